#pragma once

#include <chrono>

#include "lfe/scenarios.hpp"

namespace lfe {

// One verification check: measured vs expected at a pinned tolerance.
struct CheckResult {
    std::string name;
    bool pass = false;
    double measured = 0;
    double expected = 0;
    double tolerance = 0;
    std::string note;               // static description, part of the report
    double runtime_seconds = -1.0;  // console diagnostics only, never serialized
};

struct VerifyOptions {
    uint64_t seed = 0;
    int max_threads = 0;
};

// Endpoint-residual floor of the antipodal sphere sweep, recorded on the
// first full run and frozen as a regression constant.
inline constexpr double kSphereResidualFloor = 0.5721123627577881;

namespace detail {
inline double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
        .count();
}
}  // namespace detail

// ---------------------------------------------------------------------------
// minkowski_uniform: the Larmor oracle block (criteria 1, 2, 3, 5 and the
// flat half of 8).

inline std::vector<CheckResult> verify_minkowski(const ScenarioSpec& sc,
                                                 const VerifyOptions& = {}) {
    std::vector<CheckResult> out;
    const double B = sc.params.at("B");
    const MetricField& m = *sc.metric;
    IntegratorOptions opt;  // 1e-10

    {  // one full gyration against the closed form, runtime bounded
        const auto t0 = std::chrono::steady_clock::now();
        LarmorOracle oracle{B, 1.0, 0.6, 0.0};
        Trajectory t = integrate_lfe(m, sc.field.get(), {1.0}, oracle.state(0.0),
                                     oracle.period_s(), opt);
        double sup = 0;
        for (int i = 0; i <= 400; ++i) {
            const double s = oracle.period_s() * i / 400.0;
            sup = std::max(
                sup, (t.at(s).x.coords - oracle.state(s).x.coords).norm());
        }
        const double dt = detail::seconds_since(t0);
        out.push_back({"larmor_oracle_supnorm", sup < 1e-6 && dt < 1.0, sup, 0.0,
                       1e-6, "one gyration vs closed form", dt});
    }

    {  // speed conservation over 100 gyrations
        LarmorOracle oracle{B, 1.0, 0.6, 0.0};
        Trajectory t = integrate_lfe(m, sc.field.get(), {1.0}, oracle.state(0.0),
                                     100 * oracle.period_s(), opt);
        double drift = 0;
        for (auto& c : t.causal_record)
            drift = std::max(drift, std::abs(std::sqrt(c.g_vv) - 1.0));
        out.push_back(
            {"speed_conservation_100_gyrations", drift < 1e-7, drift, 0.0, 1e-7, ""});
    }

    {  // Kaluza-Klein projection law in the Larmor bundle
        KKBundle kk(&m, sc.potential, {1.0});
        KKState init;
        init.x.chart = 0;
        init.x.coords = Vec(4);
        init.x.coords << 0, 0, 0, 0;
        init.v = Vec(4);
        const double vsp = std::sqrt(1.0 - 0.25);
        init.v << 1, vsp, 0, -0.5;  // null, nu = 0.5 > 0
        Trajectory gamma = integrate_kk_geodesic(kk, init, 12.0, opt);
        double nu_drift = 0, law = 0;
        for (size_t i = 0; i < gamma.samples.size(); ++i) {
            KKState st{gamma.samples[i].x, gamma.samples[i].v};
            const double nu = noether_nu(kk, st);
            nu_drift = std::max(nu_drift, std::abs(nu - 0.5));
            const Event xb = kk.base_event(st.x);
            const Vec vb = st.v.head(3);
            const double speed = std::sqrt(vb.dot(m.metric_eval(xb) * vb));
            law = std::max(law, std::abs(speed - nu / kk.a()));
        }
        out.push_back({"kk_nu_drift", nu_drift < 1e-8, nu_drift, 0.0, 1e-8, ""});
        out.push_back({"kk_speed_law", law < 1e-8, law, 0.0, 1e-8, ""});
        Trajectory base = project(kk, gamma, character_band(opt));
        Trajectory pt = reparametrize(m, base, ParamKind::proper_time,
                                      character_band(opt));
        const double resid = lfe_residual(m, sc.field.get(), {1.0}, pt);
        out.push_back(
            {"kk_projection_lfe_residual", resid < 1e-6, resid, 0.0, 1e-6, ""});
    }

    {  // cross-method equivalence on the marked connection
        const auto t0 = std::chrono::steady_clock::now();
        ConnectionProblem pbd = sc.problem({1.0}, Method::direct);
        ConnectionResult rd = shoot_direct(pbd);
        ConnectionProblem pbk = sc.problem({1.0}, Method::kk_fermat);
        ConnectionResult rk = shoot_kk_fermat(pbk, default_kk_guess(pbk));
        double sup = std::numeric_limits<double>::infinity();
        if (rd.converged && rk.converged) {
            sup = 0;
            const double s1 = std::min(rd.trajectory.param_end(),
                                       rk.trajectory.param_end());
            for (int i = 0; i <= 256; ++i) {
                const double s = s1 * i / 256.0;
                sup = std::max(sup, (rd.trajectory.at(s).x.coords -
                                     rk.trajectory.at(s).x.coords)
                                        .norm());
            }
        }
        const double dt = detail::seconds_since(t0);
        out.push_back({"cross_method_supnorm", sup < 1e-5 && dt < 5.0, sup, 0.0,
                       1e-5, "direct vs kk, proper-time sup norm", dt});
    }

    {  // flat geodesics report no conjugate point
        WorldlineState init;
        init.x = Event::product(0, 0, Vec2(0, 0));
        init.v = Vec(3);
        const double g = 1 / std::sqrt(1 - 0.25);
        init.v << g, g * 0.5, 0;
        Trajectory line = integrate_geodesic(m, init, 20.0, opt);
        const bool none = !jacobi_first_conjugate(m, line).has_value();
        out.push_back(
            {"flat_geodesic_no_conjugate", none, none ? 0.0 : 1.0, 0.0, 0.5, ""});
    }
    return out;
}

// ---------------------------------------------------------------------------
// ribbon: affine Fermat relation (4) and the class structure (7).

inline std::vector<CheckResult> verify_ribbon(const ScenarioSpec& sc,
                                              const VerifyOptions& vo = {}) {
    std::vector<CheckResult> out;
    const double r = sc.params.at("r"), B = sc.params.at("B");
    const ChargeRatio ratio{2.0 / B};  // |q/m * B| = 2 > 1

    {  // affine relation over 100 random connecting causal curves
        KKBundle kk(sc.metric.get(), sc.potential, ratio);
        double worst = 0;
        for (int k = 0; k < 100; ++k) {
            const int wind = k % 3 - 1;
            Trajectory sigma =
                ribbon_random_causal_curve(sc, vo.seed * 1000 + k, wind);
            const int sign = ratio.value > 0 ? +1 : -1;
            FunctionalValue I = action_I(*sc.metric, sc.potential.get(),
                                         {sign * std::abs(ratio.value)}, sigma);
            const double y1 = arrival_coordinate(kk, sigma, 0.0, sign);
            const double dev = std::abs(y1 - (-sign * I.value / kk.a()));
            worst = std::max(worst, dev - I.quadrature_error_estimate);
        }
        out.push_back({"fermat_affine_relation", worst < 1e-9, worst, 0.0, 1e-9,
                       "100 random causal curves"});
    }

    {  // class structure via a 20 x 20 kk multistart
        const auto t0 = std::chrono::steady_clock::now();
        ConnectionProblem pb = sc.problem(ratio, Method::kk_fermat);
        GridSpec grid;
        grid.n_dir = 20;
        grid.n_mag = 20;
        grid.seed = vo.seed;
        grid.max_threads = vo.max_threads;
        MultistartReport rep = multistart(pb, grid);
        const double dt = detail::seconds_since(t0);

        bool saw_m1 = false, saw_0 = false, saw_p1 = false;
        double light_err = 0, wind0_max = -1e300;
        bool conjugate_ok = true;
        for (auto& res : rep.results) {
            if (!res.winding) continue;
            if (*res.winding == -1) saw_m1 = true;
            if (*res.winding == 0) saw_0 = true;
            if (*res.winding == +1) saw_p1 = true;
            if (res.lightlike_flagged && std::abs(*res.winding) == 1) {
                const double expect =
                    *res.winding * 2 * kPi * ratio.value * B * r;
                light_err = std::max(light_err,
                                     std::abs(res.action.value - expect));
                const double l1 = res.trajectory.param_end();
                if (res.first_conjugate && *res.first_conjugate < l1 * (1 - 1e-9))
                    conjugate_ok = false;
            }
            if (*res.winding == 0)
                wind0_max = std::max(wind0_max, res.action.value);
        }
        out.push_back({"class_tags_found", saw_m1 && saw_0 && saw_p1,
                       double(saw_m1 + saw_0 + saw_p1), 3.0, 0.0,
                       "winding tags {-1, 0, +1} present", dt});
        out.push_back({"lightlike_action_em_term", light_err < 1e-6, light_err,
                       0.0, 1e-6, "vs 2 pi (q/m) B r"});
        out.push_back({"winding0_action_bound",
                       wind0_max <= 2 * kPi * r + 1e-6, wind0_max, 2 * kPi * r,
                       1e-6, "timelike class supremum"});
        out.push_back({"lightlike_no_interior_conjugate", conjugate_ok,
                       conjugate_ok ? 0.0 : 1.0, 0.0, 0.5, ""});
        out.push_back({"multistart_runtime", dt < 60.0, dt, 0.0, 60.0,
                       "20x20 start grid", dt});
    }
    return out;
}

// ---------------------------------------------------------------------------
// cap_cylinder: the closed-form circle family (6) and the q/m = 0 reduction
// (11).

inline std::vector<CheckResult> verify_cap_cylinder(const ScenarioSpec& sc,
                                                    const VerifyOptions& = {}) {
    std::vector<CheckResult> out;
    const double r = sc.params.at("r"), B = sc.params.at("B");
    const ChargeRatio ratio = sc.default_ratio;
    const double qmB = ratio.value * B;

    {  // closed form on the alpha grid
        double worst = 0;
        for (double deg : {10.0, 30.0, 60.0, 90.0}) {
            const double alpha = deg * kPi / 180.0;
            Trajectory c = cap_cylinder_calpha(sc, alpha);
            const double expect = cap_cylinder_action_formula(r, qmB, alpha);
            const FunctionalValue I = sc.action(ratio, c);
            worst = std::max(worst, std::abs(I.value - expect) / std::abs(expect));
        }
        out.push_back({"circle_family_closed_form", worst < 1e-6, worst, 0.0,
                       1e-6, "relative, alpha in {10,30,60,90} deg"});
    }

    {  // argmax over the family plus sigma_0 is sigma_0 when (q/m) B r > 1
        std::vector<Trajectory> cands;
        cands.push_back(cap_cylinder_sigma0(sc));
        for (double deg : {10.0, 30.0, 60.0, 90.0})
            cands.push_back(cap_cylinder_calpha(sc, deg * kPi / 180.0));
        KKBundle kk(sc.metric.get(), sc.potential, ratio);
        FermatReport rep = verify_fermat(kk, cands, 0.0);
        out.push_back({"sigma0_is_argmax",
                       rep.argmax_action == 0 && rep.consistent,
                       (double)rep.argmax_action, 0.0, 0.0,
                       "Fermat arrival agreement included"});
    }

    {  // q/m = 0: geodesic connection returns the static maximizer
        ConnectionProblem pb = sc.problem({0.0}, Method::direct);
        ConnectionResult res = shoot_direct(pb, Vec2(0.0, 0.0));
        const double err =
            res.converged ? std::abs(res.action.value - 2 * kPi * r) : 1e300;
        out.push_back({"ratio0_static_action", err < 1e-6, err, 0.0, 1e-6,
                       "geodesic limit, action 2 pi r"});
    }
    return out;
}

// ---------------------------------------------------------------------------
// sphere: conjugate point (8), antipodal non-connectability (9), circle law
// (10), and the flux detector.

inline std::vector<CheckResult> verify_sphere(const ScenarioSpec& sc,
                                              const VerifyOptions& vo = {}) {
    std::vector<CheckResult> out;
    const double r = sc.params.at("r"), B = sc.params.at("B");
    const MetricField& m = *sc.metric;

    {  // first conjugate point of the equatorial lightlike geodesic at arc pi r
        WorldlineState init;
        init.x = Event::product(sc.surface->find_chart("north"), 0.0,
                                Vec2(2 * r, 0.0));
        init.v = Vec(3);
        init.v << 1.0, 0.0, 2.0;  // unit dl-speed equator direction
        Trajectory eq = integrate_geodesic(m, init, 2 * kPi * r);
        auto lc = jacobi_first_conjugate(m, eq);
        const double measured = lc ? *lc : -1.0;
        const double rel = lc ? std::abs(*lc - kPi * r) / (kPi * r) : 1.0;
        out.push_back({"equator_conjugate_arc", rel < 1e-4, measured, kPi * r,
                       1e-4, "relative tolerance"});
    }

    {  // antipodal pair: no solution for any ratio; residual floor frozen
        const auto t0 = std::chrono::steady_clock::now();
        int converged_total = 0;
        double floor = std::numeric_limits<double>::infinity();
        for (double ratio : {-5.0, -2.0, -1.0, -0.5, 0.5, 1.0, 2.0, 5.0}) {
            ConnectionProblem pb = sc.problem({ratio}, Method::direct);
            pb.tol.integrator_tol = 1e-8;
            GridSpec grid;
            grid.n_dir = 30;
            grid.n_mag = 10;
            grid.speed_max = 0.99;
            grid.seed = vo.seed;
            grid.max_threads = vo.max_threads;
            MultistartReport rep = multistart(pb, grid);
            converged_total += rep.converged_count;
            floor = std::min(floor, rep.best_residual);
        }
        const double dt = detail::seconds_since(t0);
        out.push_back({"antipodal_no_solution", converged_total == 0,
                       (double)converged_total, 0.0, 0.0,
                       "8 ratios x 30x10 starts", dt});
        out.push_back({"antipodal_residual_floor", floor > 0.05, floor, 0.05,
                       0.0, "strictly above 0.05 chart units"});
        const double rel = std::abs(floor - kSphereResidualFloor) /
                           kSphereResidualFloor;
        out.push_back({"antipodal_floor_regression", rel < 1e-6, floor,
                       kSphereResidualFloor, 1e-6,
                       "frozen on first run; relative"});
    }

    {  // circle law on converged non-antipodal solutions
        ConnectionProblem pb = sc.problem({2.0}, Method::direct);
        pb.x1 = Event::product(sc.surface->find_chart("north"), 2.0 * r,
                               Vec2(0.0, 2 * r));
        GridSpec grid;
        grid.n_dir = 8;
        grid.n_mag = 4;
        grid.seed = vo.seed;
        grid.max_threads = vo.max_threads;
        MultistartReport rep = multistart(pb, grid);
        double worst_const = 1.0, worst_rate = 1.0;
        if (!rep.results.empty()) {
            worst_const = 0.0;
            worst_rate = 0.0;
            for (auto& res : rep.results) {
                const ProjectionStats st = projection_stats(m, res.trajectory);
                worst_const = std::max(worst_const, st.speed_stdev / st.speed_mean);
                const double expect = std::abs(pb.ratio.value * B) *
                                      std::sqrt(1.0 - sqr(st.speed_mean));
                worst_rate = std::max(
                    worst_rate, std::abs(st.rotation_mean - expect) / expect);
            }
        }
        out.push_back({"circle_law_constant_speed", worst_const < 1e-6,
                       worst_const, 0.0, 1e-6,
                       std::to_string(rep.results.size()) + " solutions"});
        out.push_back({"circle_law_rotation_rate", worst_rate < 1e-5, worst_rate,
                       0.0, 1e-5, "vs |q/m B| sqrt(1-|c'|^2)"});
    }

    {  // non-exactness detector: total flux
        const double flux = flux_integral(*sc.field, *sc.surface, sphere_mesh(sc));
        const double rel = std::abs(flux - 4 * kPi * r * r * B) /
                           (4 * kPi * r * r * std::abs(B));
        out.push_back({"flux_total", rel < 1e-3, flux, 4 * kPi * r * r * B, 1e-3,
                       "relative"});
    }
    return out;
}

inline std::vector<CheckResult> verify_scenario(const ScenarioSpec& sc,
                                                const VerifyOptions& vo = {}) {
    if (sc.name == "minkowski_uniform") return verify_minkowski(sc, vo);
    if (sc.name == "ribbon") return verify_ribbon(sc, vo);
    if (sc.name == "cap_cylinder") return verify_cap_cylinder(sc, vo);
    if (sc.name == "sphere") return verify_sphere(sc, vo);
    throw ConfigError("verify: unknown scenario " + sc.name);
}

}  // namespace lfe
