#include <catch2/catch_amalgamated.hpp>

#include "lfe/scenarios.hpp"

using namespace lfe;

TEST_CASE("ribbon scenario: potential profile and field support") {
    const double r = 1.0, B = 1.5;
    ScenarioSpec sc = ribbon_scenario(r, B);
    const int rev = sc.surface->find_chart("rev");

    // mu(-2 pi r) = 1, mu(-pi r) = 0: omega(d theta) = B r mu(z)
    auto omega_theta = [&](double z) {
        Event x = Event::product(rev, 0.0, Vec2(z, 0.3));
        TangentVector v;
        v.base = x;
        v.components = Vec(3);
        v.components << 0, 0, 1;
        return potential_eval(*sc.potential, x, v);
    };
    CHECK(omega_theta(-2 * kPi * r) == Catch::Approx(B * r));
    CHECK(omega_theta(-kPi * r) == Catch::Approx(0.0).margin(1e-14));
    CHECK(omega_theta(-3 * kPi * r) == Catch::Approx(B * r));  // mu = 1 below

    // on the cap: omega vanishes identically
    const int cap = sc.surface->find_chart("cap");
    Event xc = Event::product(cap, 0.0, Vec2(0.2, 0.1));
    TangentVector vc;
    vc.base = xc;
    vc.components = Vec(3);
    vc.components << 0.4, 1.0, -0.7;
    CHECK(potential_eval(*sc.potential, xc, vc) == 0.0);

    // F vanishes outside the ribbon -2 pi r < z < -pi r
    for (double z : {-3 * kPi * r, -2.5 * kPi * r, -0.5 * kPi * r}) {
        Event x = Event::product(rev, 0.0, Vec2(z, 0.0));
        CHECK(sc.field->components(x).norm() < 1e-14);
    }
    // and is nonzero inside it
    Event xin = Event::product(rev, 0.0, Vec2(-1.5 * kPi * r, 0.0));
    CHECK(sc.field->components(xin).norm() > 1e-3);
}

TEST_CASE("ribbon scenario: lightlike circle actions are +-2 pi (q/m) B r") {
    const double r = 1.0, B = 1.0;
    ScenarioSpec sc = ribbon_scenario(r, B);
    const ChargeRatio ratio{2.0};
    const int rev = sc.surface->find_chart("rev");

    for (int wind : {+1, -1}) {
        auto pos = [=](double lam) {
            return Event::product(rev, 2 * kPi * r * lam,
                                  Vec2(-3 * kPi * r, 2 * kPi * wind * lam));
        };
        auto vel = [=](double) {
            Vec v(3);
            v << 2 * kPi * r, 0, 2 * kPi * wind;
            return v;
        };
        Trajectory sigma = make_trajectory(
            *sc.metric, std::make_shared<AnalyticCurve>(pos, vel, 0, 1), 33,
            ParamKind::affine);
        FunctionalValue I = sc.action(ratio, sigma);
        const double expect = wind * 2 * kPi * ratio.value * B * r;
        CHECK(I.value == Catch::Approx(expect).epsilon(1e-9));
    }

    // static worldline: action 2 pi r (the timelike class supremum)
    auto witness = chronology_witness(sc);
    REQUIRE(witness.has_value());
    CHECK(sc.action(ratio, *witness).value ==
          Catch::Approx(sc.reference_values.at("timelike_action_sup").value));
}

TEST_CASE("ribbon scenario: Fermat affine relation on random causal curves") {
    ScenarioSpec sc = ribbon_scenario(1.0, 1.0);
    const double qm = 2.0;
    KKBundle kk(sc.metric.get(), sc.potential, {qm});
    for (uint64_t seed = 0; seed < 10; ++seed) {
        Trajectory sigma = ribbon_random_causal_curve(sc, seed, (int)(seed % 3) - 1);
        for (int sign : {+1, -1}) {
            FunctionalValue I = action_I(*sc.metric, sc.potential.get(),
                                         {sign * qm}, sigma);
            const double y1 = arrival_coordinate(kk, sigma, 0.0, sign);
            CHECK(std::abs(y1 - (-sign * I.value / kk.a())) <
                  1e-9 + I.quadrature_error_estimate);
        }
    }
}

TEST_CASE("ribbon scenario: exact field flux over a small closed mesh") {
    ScenarioSpec sc = ribbon_scenario(1.0, 1.0);
    const int rev = sc.surface->find_chart("rev");
    // folded octahedron inside the ribbon region of the revolution chart
    SurfaceMesh mesh;
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> uz(-1.9 * kPi, -1.1 * kPi), ut(-0.4, 0.4);
    for (int i = 0; i < 6; ++i) mesh.verts.push_back({rev, Vec2(uz(rng), ut(rng))});
    mesh.tris = {{4, 0, 2}, {4, 2, 1}, {4, 1, 3}, {4, 3, 0},
                 {5, 2, 0}, {5, 1, 2}, {5, 3, 1}, {5, 0, 3}};
    CHECK(std::abs(flux_integral(*sc.field, *sc.surface, mesh)) < 1e-6);
}

TEST_CASE("cap_cylinder scenario: metric blocks and the closed-form action") {
    const double r = 1.0, B = 2.0;
    ScenarioSpec sc = cap_cylinder_scenario(r, B, {1.0});
    const double qmB = 1.0 * B;

    // cylinder region: diag(1, -1, -r^2/4) in the (t, zeta, theta) chart
    const int rev = sc.surface->find_chart("rev");
    Event xc = Event::product(rev, 0.0, Vec2(5.5 * r, 0.2));  // deep cylinder
    Mat g = metric_eval(*sc.metric, xc);
    CHECK(g(0, 0) == Catch::Approx(1.0));
    CHECK(g(1, 1) == Catch::Approx(-1.0).epsilon(1e-12));
    CHECK(g(2, 2) == Catch::Approx(-r * r / 4).epsilon(1e-12));

    // closed form I(alpha) at a grid of tilts; the alpha = pi/2 limit is the
    // static particle with action 2 pi r
    for (double deg : {10.0, 30.0, 60.0, 90.0}) {
        const double alpha = deg * kPi / 180.0;
        Trajectory c = cap_cylinder_calpha(sc, alpha);
        const double expect = cap_cylinder_action_formula(r, qmB, alpha);
        FunctionalValue I = sc.action({1.0}, c);
        CHECK(std::abs(I.value - expect) / std::abs(expect) < 1e-6);
    }
    CHECK(cap_cylinder_action_formula(r, qmB, kPi / 2) ==
          Catch::Approx(2 * kPi * r * r * qmB + 2 * kPi * r * (1 - qmB * r)));

    // sigma_0 (alpha = 0): lightlike, action 2 pi r^2 (q/m) B, and it is the
    // argmax over the family when (q/m) B r > 1
    Trajectory s0 = cap_cylinder_sigma0(sc);
    for (auto& c : s0.causal_record) CHECK(c.kind == CausalKind::lightlike);
    FunctionalValue I0 = sc.action({1.0}, s0);
    CHECK(I0.value ==
          Catch::Approx(sc.reference_values.at("action_sigma0").value)
              .epsilon(1e-9));
    for (double deg : {10.0, 30.0, 60.0, 90.0}) {
        Trajectory c = cap_cylinder_calpha(sc, deg * kPi / 180.0);
        CHECK(sc.action({1.0}, c).value < I0.value);
    }
}

TEST_CASE("cap_cylinder scenario: Fermat consistency over the circle family") {
    ScenarioSpec sc = cap_cylinder_scenario(1.0, 2.0, {1.0});
    KKBundle kk(sc.metric.get(), sc.potential, {1.0});
    std::vector<Trajectory> cands;
    cands.push_back(cap_cylinder_sigma0(sc));
    for (double deg : {15.0, 40.0, 75.0})
        cands.push_back(cap_cylinder_calpha(sc, deg * kPi / 180.0));
    FermatReport rep = verify_fermat(kk, cands, 0.0);
    CHECK(rep.argmax_action == 0);
    CHECK(rep.consistent);
}

TEST_CASE("sphere scenario: flux, non-exactness, geodesic limit") {
    const double r = 1.0, B = 1.0;
    ScenarioSpec sc = sphere_scenario(r, B);

    CHECK(flux_integral(*sc.field, *sc.surface, sphere_mesh(sc)) ==
          Catch::Approx(4 * kPi * r * r * B).epsilon(1e-3));

    // the action functional refuses the non-exact field
    auto witness_traj = [&] {
        WorldlineState init;
        init.x = sc.x0;
        init.v = Vec(3);
        init.v << 1, 0, 0;
        return integrate_lfe(*sc.metric, nullptr, {0.0}, init, 1.0);
    }();
    CHECK_THROWS_AS(sc.action({1.0}, witness_traj), NonExactField);

    // q/m = 0 limit: a great circle connects antipodes at t = pi r
    WorldlineState geo;
    geo.x = sc.x0;
    geo.v = Vec(3);
    geo.v << 1.0, -2.0, 0.0;  // unit-speed meridian start (chart factor 2)
    Trajectory t = integrate_geodesic(*sc.metric, geo, kPi * r);
    const Vec3 end =
        sc.surface->chart(t.back().x.chart).embed(t.back().x.spatial()).E;
    CHECK((end - Vec3(-r, 0, 0)).norm() < 1e-7);
    CHECK(t.back().x.t() == Catch::Approx(kPi * r));
}

TEST_CASE("sphere scenario: converged solutions obey the circle law") {
    const double r = 1.0, B = 1.0;
    ScenarioSpec sc = sphere_scenario(r, B);
    // non-antipodal target: quarter turn along the equator
    ConnectionProblem pb = sc.problem({2.0}, Method::direct);
    pb.x1 = Event::product(sc.surface->find_chart("north"), 2.0, Vec2(0.0, 2 * r));

    GridSpec grid;
    grid.n_dir = 8;
    grid.n_mag = 4;
    MultistartReport rep = multistart(pb, grid);
    REQUIRE(rep.converged_count > 0);
    for (auto& res : rep.results) {
        const ProjectionStats st = projection_stats(*sc.metric, res.trajectory);
        CHECK(st.speed_stdev / st.speed_mean < 1e-6);
        const double expect =
            std::abs(pb.ratio.value * B) * std::sqrt(1 - sqr(st.speed_mean));
        CHECK(std::abs(st.rotation_mean - expect) / expect < 1e-5);
    }
}

TEST_CASE("kk metric on the ribbon: fiber cross term is -a^2 beta B r mu(z)") {
    const double r = 1.0, B = 1.2;
    ScenarioSpec sc = ribbon_scenario(r, B);
    KKBundle kk(sc.metric.get(), sc.potential, {3.0});
    const int rev = sc.surface->find_chart("rev");
    const double z = -1.7 * kPi * r;  // inside the ribbon, mu in (0,1)
    const double mu =
        1.0 - blend_profile(z, -1.5 * kPi * r, 0.5 * kPi * r).s;
    Event p;
    p.chart = rev;
    p.coords = Vec(4);
    p.coords << 0.0, z, 0.4, 0.0;
    Mat gt = kk_metric_eval(kk, p);
    const double a2 = sqr(kk.a());
    CHECK(gt(3, 3) == Catch::Approx(-a2));
    CHECK(gt(2, 3) == Catch::Approx(-a2 * kk.beta * B * r * mu).epsilon(1e-12));
}

TEST_CASE("marked events: chronology witnesses and time ordering") {
    for (const std::string& name :
         {"minkowski_uniform", "ribbon", "cap_cylinder", "sphere"}) {
        ScenarioSpec sc = scenario_by_name(name);
        CHECK(sc.x1.t() > sc.x0.t());
        auto w = chronology_witness(sc);
        if (name == "sphere") {
            CHECK(!w.has_value());  // witness is the t > pi r bound
            CHECK(sc.x1.t() > kPi * sc.params.at("r"));
        } else {
            REQUIRE(w.has_value());
            for (auto& c : w->causal_record)
                CHECK(c.kind == CausalKind::timelike);
        }
    }
}

TEST_CASE("catalog dispatch and parameter overrides") {
    ScenarioSpec sc = scenario_by_name("ribbon", {{"r", 2.0}, {"B", 0.5}});
    CHECK(sc.params.at("r") == 2.0);
    CHECK(sc.reference_values.at("em_term_per_ratio").value ==
          Catch::Approx(2 * kPi * 0.5 * 2.0));
    CHECK_THROWS_AS(scenario_by_name("nope"), ConfigError);
}

TEST_CASE("ribbon: integrated lightlike geodesic returns after delta t = 2 pi r") {
    const double r = 1.0;
    ScenarioSpec sc = ribbon_scenario(r, 1.0);
    const int rev = sc.surface->find_chart("rev");
    WorldlineState init;
    init.x = Event::product(rev, 0.0, Vec2(-3 * kPi * r, 0.0));
    init.v = Vec(3);
    init.v << 1.0, 0.0, 1.0 / r;  // null: dt = r |d theta|
    IntegratorOptions opt;
    Trajectory sigma1 = integrate_geodesic(*sc.metric, init, 2 * kPi * r, opt);
    const WorldlineState end = sigma1.at(2 * kPi * r);
    CHECK(end.x.t() == Catch::Approx(2 * kPi * r));
    CHECK(end.x.coords[1] == Catch::Approx(-3 * kPi * r).margin(1e-8));
    CHECK(end.x.coords[2] == Catch::Approx(2 * kPi).margin(1e-8));
    for (auto& c : sigma1.causal_record) CHECK(std::abs(c.g_vv) < 10 * opt.tol);
    CHECK(homotopy_tag(sc.context(), sigma1) == 1);
}

TEST_CASE("ribbon: leaving the truncated cylinder raises LeftChartAtlas") {
    ScenarioSpec sc = ribbon_scenario(1.0, 1.0);
    const int rev = sc.surface->find_chart("rev");
    WorldlineState init;
    init.x = Event::product(rev, 0.0, Vec2(-3 * kPi, 0.0));
    init.v = Vec(3);
    const double g = 1 / std::sqrt(1 - 0.81);
    init.v << g, -g * 0.9, 0.0;  // racing down the cylinder
    CHECK_THROWS_AS(integrate_lfe(*sc.metric, nullptr, {0.0}, init, 30.0),
                    LeftChartAtlas);
}

TEST_CASE("ribbon: critical-regime flag and lift causality guard") {
    ScenarioSpec sc = ribbon_scenario(1.0, 1.0);
    CHECK(ribbon_critical_regime(sc, {2.0}));
    CHECK(!ribbon_critical_regime(sc, {0.5}));

    // spacelike curves cannot be lifted
    const int rev = sc.surface->find_chart("rev");
    auto pos = [rev](double lam) {
        return Event::product(rev, 0.0, Vec2(-3 * kPi + lam, 0.0));
    };
    auto vel = [](double) {
        Vec v(3);
        v << 0, 1, 0;
        return v;
    };
    Trajectory sp = make_trajectory(*sc.metric,
                                    std::make_shared<AnalyticCurve>(pos, vel, 0, 1),
                                    9, ParamKind::affine);
    KKBundle kk(sc.metric.get(), sc.potential, {1.0});
    CHECK_THROWS_AS(lightlike_lift(kk, sp, 0.0, +1), NonCausalCurve);
}

TEST_CASE("cap_cylinder: conjugate point of sigma_0 at the antipodal parameter") {
    const double r = 1.0;
    ScenarioSpec sc = cap_cylinder_scenario(r, 2.0, {1.0});
    const int pole = sc.surface->find_chart("pole");
    WorldlineState init;
    init.x = Event::product(pole, 0.0, Vec2(2 * r, 0.0));
    init.v = Vec(3);
    init.v << 1.0, 0.0, 2.0;  // lightlike along the cap equator
    Trajectory eq = integrate_geodesic(*sc.metric, init, 2 * kPi * r);
    auto lc = jacobi_first_conjugate(*sc.metric, eq);
    REQUIRE(lc.has_value());
    CHECK(std::abs(*lc - kPi * r) / (kPi * r) < 1e-4);
}

TEST_CASE("cap_cylinder: winding through the pole is ambiguous") {
    ScenarioSpec sc = cap_cylinder_scenario(1.0, 2.0, {1.0});
    Trajectory c = cap_cylinder_calpha(sc, kPi / 4);  // passes the north pole
    CHECK_THROWS_AS(homotopy_tag(sc.context(), c), AmbiguousWinding);
}

TEST_CASE("cap_cylinder: subcritical regime maximizes at alpha = pi/2") {
    // (q/m) B r < 1: the static particle dominates the circle family
    ScenarioSpec sc = cap_cylinder_scenario(1.0, 0.5, {1.0});
    KKBundle kk(sc.metric.get(), sc.potential, {1.0});
    std::vector<Trajectory> cands;
    cands.push_back(cap_cylinder_sigma0(sc));                      // alpha = 0
    for (double deg : {30.0, 60.0, 90.0})
        cands.push_back(cap_cylinder_calpha(sc, deg * kPi / 180.0));
    FermatReport rep = verify_fermat(kk, cands, 0.0);
    CHECK(rep.argmax_action == 3);  // the alpha = 90 deg entry
    CHECK(rep.consistent);
}

TEST_CASE("sphere: antipodal continuation sweep has only gaps") {
    ScenarioSpec sc = sphere_scenario(1.0, 1.0);
    ConnectionProblem pb = sc.problem({1.0}, Method::direct);
    pb.tol.integrator_tol = 1e-8;
    auto entries = ratio_continuation(pb, {-5.0, -2.0, -1.0, 1.0, 2.0, 5.0});
    for (auto& e : entries) {
        CHECK(!e.result.converged);
        CHECK(e.result.endpoint_residual > 0.05);
    }
}

TEST_CASE("maximizer audit (iii): ribbon winding-0 action certificate") {
    ScenarioSpec sc = ribbon_scenario(1.0, 1.0);
    ConnectionProblem pb = sc.problem({2.0}, Method::kk_fermat);
    ConnectionResult res = shoot_kk_fermat(pb, default_kk_guess(pb));
    REQUIRE(res.converged);
    REQUIRE(res.winding == 0);
    std::vector<Trajectory> probes;
    for (uint64_t s = 0; s < 8; ++s)
        probes.push_back(ribbon_random_causal_curve(sc, 100 + s, 0));
    AuditReport rep = maximizer_audit(pb, res, probes);
    CHECK(rep.residual_ok);
    CHECK(rep.argmax_ok);
    CHECK(rep.probes_checked == 8);
    // the winding-0 maximizer is the particle at rest: action 2 pi r
    CHECK(res.action.value == Catch::Approx(2 * kPi).epsilon(1e-8));
}
