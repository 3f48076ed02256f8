#pragma once

#include "lfe/trajectory.hpp"

namespace lfe {

struct IntegratorOptions {
    double tol = 1e-10;        // abs and rel tolerance of the embedded pair
    double max_step = 0.0;     // 0 => span / 20
    long max_steps = 4'000'000;
};

// Tolerance used to classify causal characters along integrated curves.
inline double character_band(const IntegratorOptions& opt) { return 10.0 * opt.tol; }

// Right-hand side of the proper-time LFE as a first-order system:
// x' = v, v'^k = -Gamma^k_{ij} v^i v^j + (q/m) Fhat^k_j v^j.
inline std::pair<Vec, Vec> lfe_rhs(const MetricField& m, const EMField* F,
                                   ChargeRatio ratio, const WorldlineState& st) {
    const Christoffels gam = m.christoffel(st.x);
    Vec dv = -gam.contract(st.v, st.v);
    if (F && ratio.value != 0.0)
        dv += ratio.value * (raise_field(m, *F, st.x) * st.v);
    return {st.v, dv};
}

namespace detail {

// Atlas-aware integration driver: integrates segment-by-segment, switching
// charts when the spatial point leaves the current chart's comfort zone.
template <class MakeRhs, class SpatialOf, class TransitionState>
std::vector<OdeSegment> integrate_atlas(const SurfacePatchwork* surf, int chart0,
                                        OdeVec y0, double l0, double l1,
                                        const IntegratorOptions& opt,
                                        MakeRhs&& make_rhs, SpatialOf&& spatial_of,
                                        TransitionState&& transition) {
    std::vector<OdeSegment> segs;
    OdeOptions ode_opt;
    ode_opt.abs_tol = ode_opt.rel_tol = opt.tol;
    ode_opt.max_step = opt.max_step > 0 ? opt.max_step : std::abs(l1 - l0) / 20.0;
    ode_opt.max_steps = opt.max_steps;

    int chart = chart0;
    double lam = l0;
    OdeVec y = y0;
    double stop_level = 0.0;
    while (std::abs(l1 - lam) > 1e-13 * (1 + std::abs(l1))) {
        auto rhs = make_rhs(chart);
        auto stop = [&](double, const OdeVec& yy) {
            if (!surf) return false;
            return surf->chart(chart).comfort(spatial_of(yy)) < stop_level;
        };
        DenseOde ode;
        try {
            ode = integrate_ode(rhs, y, lam, l1, ode_opt, stop);
        } catch (const OutOfChart&) {
            // a trial step crossed the hard chart boundary with no chart to
            // switch to: report the exit location
            const Vec3 p = surf ? surf->chart(chart).embed(spatial_of(y)).E
                                : Vec3::Zero();
            throw LeftChartAtlas("trajectory left the chart atlas", p[0], p[1],
                                 p[2]);
        }
        const double reached = ode.t_end;
        y = ode.y_final;
        segs.push_back({chart, lam, reached, std::move(ode)});
        lam = reached;
        if (std::abs(l1 - lam) <= 1e-13 * (1 + std::abs(l1))) break;
        // stopped inside the span: try to switch charts
        const Vec2 q = spatial_of(y);
        const Vec3 p = surf->chart(chart).embed(q).E;
        const int next = surf->pick_chart(p);
        if (next != chart) {
            y = transition(chart, next, y);
            chart = next;
            stop_level = 0.0;
        } else {
            // no better chart; lower the trigger so integration can proceed
            stop_level = surf->chart(chart).comfort(q) - 0.05;
        }
    }
    return segs;
}

inline Trajectory build_trajectory(const MetricField& m,
                                   std::vector<OdeSegment> segs, StateLayout layout,
                                   int dim, ParamKind kind, double char_tol) {
    auto curve =
        std::make_shared<OdeSegmentsCurve>(std::move(segs), layout, dim);
    Trajectory traj;
    traj.dense = curve;
    traj.param_kind = kind;
    for (const auto& seg : curve->segments()) {
        const bool first_seg = traj.samples.empty();
        for (size_t i = 0; i < seg.ode.steps.size() + 1; ++i) {
            if (i == 0 && !first_seg) continue;  // stitch at segment joints
            const double lam =
                (i < seg.ode.steps.size()) ? seg.ode.steps[i].t0 : seg.lam1;
            WorldlineState st = curve->state(lam);
            traj.causal_record.push_back(
                causal_character(m, st.x, st.v, char_tol));
            traj.samples.push_back(std::move(st));
        }
    }
    return traj;
}

}  // namespace detail

namespace detail {
// Shared (x, v) flow used by both the LFE and geodesic entry points, so the
// q/m = 0 reduction is the same code path bit for bit.
inline Trajectory integrate_full_state(const MetricField& m, const EMField* F,
                                       ChargeRatio ratio, const WorldlineState& init,
                                       double span, const IntegratorOptions& opt,
                                       ParamKind kind) {
    const int n = m.dim();
    auto make_rhs = [&m, F, ratio, n](int chart) {
        return [&m, F, ratio, n, chart](double, const OdeVec& y) {
            WorldlineState st;
            st.x.chart = chart;
            st.x.coords = y.head(n);
            st.v = y.tail(n);
            auto [dx, dv] = lfe_rhs(m, F, ratio, st);
            OdeVec dy(2 * n);
            dy.head(n) = dx;
            dy.tail(n) = dv;
            return dy;
        };
    };
    auto spatial_of = [](const OdeVec& y) { return Vec2(y[1], y[2]); };
    auto transition = [&m, n](int from, int to, const OdeVec& y) {
        auto [q, v] = m.surface()->transition_state(from, Vec2(y[1], y[2]),
                                                    Vec2(y[n + 1], y[n + 2]), to);
        OdeVec out = y;
        out[1] = q[0];
        out[2] = q[1];
        out[n + 1] = v[0];
        out[n + 2] = v[1];
        return out;
    };
    OdeVec y0(2 * n);
    y0.head(n) = init.x.coords;
    y0.tail(n) = init.v;
    auto segs = integrate_atlas(m.surface(), init.x.chart, y0, init.param,
                                init.param + span, opt, make_rhs, spatial_of,
                                transition);
    return build_trajectory(m, std::move(segs), StateLayout::full, n, kind,
                            character_band(opt));
}
}  // namespace detail

// Proper-time integration of the LFE. init.v must be g-normalized and
// future-directed; normalization drift is measured by tests, never corrected.
inline Trajectory integrate_lfe(const MetricField& m, const EMField* F,
                                ChargeRatio ratio, const WorldlineState& init,
                                double span, const IntegratorOptions& opt = {}) {
    const double gvv = init.v.dot(m.metric_eval(init.x) * init.v);
    if (std::abs(gvv - 1.0) > 1e-10)
        throw NotNormalized("integrate_lfe: initial velocity not proper-time normalized");
    if (init.v[0] <= 0)
        throw NotNormalized("integrate_lfe: initial velocity not future-directed");
    return detail::integrate_full_state(m, F, ratio, init, span, opt,
                                        ParamKind::proper_time);
}

// Geodesics: the ratio-0 LFE. Lightlike and timelike initial data both
// integrate; g(v,v) is conserved along the solution, not enforced.
inline Trajectory integrate_geodesic(const MetricField& m, const WorldlineState& init,
                                     double span, const IntegratorOptions& opt = {},
                                     ParamKind kind = ParamKind::affine) {
    return detail::integrate_full_state(m, nullptr, {0.0}, init, span, opt, kind);
}

// Charged motion parametrized by the Cauchy temporal coordinate, the
// parametrization used for shooting: state (q, dq/dt), fixed span [t0, t1].
inline Trajectory integrate_lfe_temporal(const MetricField& m, const EMField* F,
                                         ChargeRatio ratio, const Event& x0,
                                         const Vec2& w0, double t1,
                                         const IntegratorOptions& opt = {}) {
    const int n = m.dim();
    auto make_rhs = [&m, F, ratio, n](int chart) {
        return [&m, F, ratio, n, chart](double t, const OdeVec& y) {
            Event x;
            x.chart = chart;
            x.coords = Vec(n);
            x.coords[0] = t;
            x.coords.tail(n - 1) = y.head(n - 1);
            Vec u(n);
            u[0] = 1.0;
            u.tail(n - 1) = y.tail(n - 1);

            const Mat g = m.metric_eval(x);
            const double nu2 = u.dot(g * u);
            if (nu2 <= 1e-12)
                throw NonCausalCurve("temporal integration left the timelike cone");
            const double nu = std::sqrt(nu2);
            const Christoffels gam = m.christoffel(x);
            const Vec A = gam.contract(u, u);
            Vec Fu = Vec::Zero(n);
            if (F && ratio.value != 0.0) Fu = raise_field(m, *F, x) * u;
            const double nudot_over_nu = A[0] - nu * ratio.value * Fu[0];
            OdeVec dy(2 * (n - 1));
            dy.head(n - 1) = u.tail(n - 1);
            dy.tail(n - 1) = (-A + nu * ratio.value * Fu + nudot_over_nu * u)
                                 .tail(n - 1);
            return dy;
        };
    };
    auto spatial_of = [](const OdeVec& y) { return Vec2(y[0], y[1]); };
    auto transition = [&m](int from, int to, const OdeVec& y) {
        auto [q, v] = m.surface()->transition_state(from, Vec2(y[0], y[1]),
                                                    Vec2(y[2], y[3]), to);
        OdeVec out(4);
        out << q[0], q[1], v[0], v[1];
        return out;
    };

    OdeVec y0(2 * (n - 1));
    y0.head(n - 1) = x0.coords.tail(n - 1);
    y0.tail(n - 1) = Vec2(w0);
    auto segs = detail::integrate_atlas(m.surface(), x0.chart, y0, x0.t(), t1, opt,
                                        make_rhs, spatial_of, transition);
    return detail::build_trajectory(m, std::move(segs), StateLayout::temporal, n,
                                    ParamKind::cauchy_temporal, character_band(opt));
}

// ---------------------------------------------------------------------------
// Functionals. Quadrature: Gauss-Kronrod 7/15 per sample interval, worst
// panels bisected until the summed error estimate is acceptable.

struct FunctionalValue {
    double value = 0.0;
    double quadrature_error_estimate = 0.0;
};

namespace detail {
template <class F>
FunctionalValue panelwise_quadrature(F&& f, const std::vector<double>& knots,
                                     double abs_target = 1e-12) {
    struct Panel {
        double a, b, value, error;
    };
    std::vector<Panel> ps;
    for (size_t i = 0; i + 1 < knots.size(); ++i) {
        if (knots[i + 1] <= knots[i]) continue;
        QuadResult q = gauss_kronrod_panel(f, knots[i], knots[i + 1]);
        ps.push_back({knots[i], knots[i + 1], q.value, q.error});
    }
    for (int round = 0; round < 2000; ++round) {
        double err = 0;
        size_t worst = 0;
        for (size_t i = 0; i < ps.size(); ++i) {
            err += ps[i].error;
            if (ps[i].error > ps[worst].error) worst = i;
        }
        if (err <= abs_target || ps[worst].b - ps[worst].a < 1e-12) break;
        Panel p = ps[worst];
        const double mid = 0.5 * (p.a + p.b);
        QuadResult l = gauss_kronrod_panel(f, p.a, mid);
        QuadResult r = gauss_kronrod_panel(f, mid, p.b);
        ps[worst] = {p.a, mid, l.value, l.error};
        ps.push_back({mid, p.b, r.value, r.error});
    }
    FunctionalValue out;
    for (auto& p : ps) {
        out.value += p.value;
        out.quadrature_error_estimate += p.error;
    }
    return out;
}

inline std::vector<double> sample_knots(const Trajectory& t) {
    std::vector<double> k;
    k.reserve(t.samples.size());
    for (auto& s : t.samples) k.push_back(s.param);
    return k;
}
}  // namespace detail

// Length integrand sqrt(g(v,v)) with the causal tolerance band: |g(v,v)| within
// the band counts as lightlike (exactly zero length); below -band the curve is
// rejected as non-causal.
inline double causal_speed(double gvv, double band) {
    if (gvv < -band) throw NonCausalCurve("causal curve has spacelike tangent");
    return (std::abs(gvv) <= band) ? 0.0 : std::sqrt(std::max(gvv, 0.0));
}

// I[sigma] = integral of (ds + (q/m) omega) over a causal connecting curve.
inline FunctionalValue action_I(const MetricField& m, const EMPotential* omega,
                                ChargeRatio ratio, const Trajectory& traj,
                                double char_band = 1e-9) {
    if (!omega && ratio.value != 0.0)
        throw NonExactField("action_I: no globally defined potential");
    for (auto& c : traj.causal_record)
        if (c.kind == CausalKind::spacelike)
            throw NonCausalCurve("action_I: trajectory has spacelike samples");
    auto f = [&](double lam) {
        const WorldlineState st = traj.dense->state(lam);
        const double gvv = st.v.dot(m.metric_eval(st.x) * st.v);
        double val = causal_speed(gvv, char_band);
        if (omega && ratio.value != 0.0)
            val += ratio.value * omega->eval(st.x, st.v);
        return val;
    };
    return detail::panelwise_quadrature(f, detail::sample_knots(traj));
}

// E[sigma] = 1/2 integral g(sigma', sigma') d lambda on [0,1].
inline FunctionalValue energy_E(const MetricField& m, const Trajectory& traj) {
    if (std::abs(traj.param_begin()) > 1e-9 || std::abs(traj.param_end() - 1.0) > 1e-9)
        throw Error("energy_E: trajectory must be parametrized on [0,1]");
    auto f = [&](double lam) {
        const WorldlineState st = traj.dense->state(lam);
        return 0.5 * st.v.dot(m.metric_eval(st.x) * st.v);
    };
    return detail::panelwise_quadrature(f, detail::sample_knots(traj));
}

// J[sigma] = integral (1/2 g(sigma',sigma') + b omega(sigma')) on [0,1].
inline FunctionalValue functional_J(const MetricField& m, const EMPotential* omega,
                                    double b, const Trajectory& traj) {
    if (!omega && b != 0.0)
        throw NonExactField("functional_J: no globally defined potential");
    if (std::abs(traj.param_begin()) > 1e-9 || std::abs(traj.param_end() - 1.0) > 1e-9)
        throw Error("functional_J: trajectory must be parametrized on [0,1]");
    auto f = [&](double lam) {
        const WorldlineState st = traj.dense->state(lam);
        double val = 0.5 * st.v.dot(m.metric_eval(st.x) * st.v);
        if (omega && b != 0.0) val += b * omega->eval(st.x, st.v);
        return val;
    };
    return detail::panelwise_quadrature(f, detail::sample_knots(traj));
}

// ---------------------------------------------------------------------------
// Reparametrization: same image curve, new parameter.

inline Trajectory reparametrize(const MetricField& m, const Trajectory& traj,
                                ParamKind target, double char_band = 1e-9) {
    ReparamCurve::RateFn rate, drate;
    if (target == ParamKind::proper_time) {
        for (auto& c : traj.causal_record)
            if (c.kind != CausalKind::timelike)
                throw NotTimelike("reparametrize: proper time needs a timelike curve");
        rate = [&m, dense = traj.dense](double lam) {
            const WorldlineState st = dense->state(lam);
            return std::sqrt(st.v.dot(m.metric_eval(st.x) * st.v));
        };
        drate = [&m, dense = traj.dense](double lam) {
            const WorldlineState st = dense->state(lam);
            const Vec D =
                dense->coord_accel(lam) + m.christoffel(st.x).contract(st.v, st.v);
            const double r = std::sqrt(st.v.dot(m.metric_eval(st.x) * st.v));
            return D.dot(m.metric_eval(st.x) * st.v) / r;
        };
    } else if (target == ParamKind::cauchy_temporal) {
        for (auto& s : traj.samples)
            if (s.v[0] <= 0)
                throw NotMonotoneT("reparametrize: t not increasing along curve");
        rate = [dense = traj.dense](double lam) { return dense->state(lam).v[0]; };
        drate = [dense = traj.dense](double lam) {
            return dense->coord_accel(lam)[0];
        };
    } else {  // affine_unit: rescale the existing parameter onto [0,1]
        const double span = traj.param_end() - traj.param_begin();
        rate = [span](double) { return 1.0 / span; };
        drate = [](double) { return 0.0; };
    }

    std::vector<double> knot_lam, knot_s;
    knot_lam.reserve(traj.samples.size());
    knot_s.reserve(traj.samples.size());
    double acc = 0.0;
    knot_lam.push_back(traj.param_begin());
    knot_s.push_back(0.0);
    for (size_t i = 0; i + 1 < traj.samples.size(); ++i) {
        acc += gauss_kronrod_panel(rate, traj.samples[i].param,
                                   traj.samples[i + 1].param)
                   .value;
        knot_lam.push_back(traj.samples[i + 1].param);
        knot_s.push_back(acc);
    }

    Trajectory out;
    out.param_kind = target;
    auto curve = std::make_shared<ReparamCurve>(traj.dense, rate, drate, knot_lam,
                                                knot_s);
    out.dense = curve;
    out.samples.reserve(traj.samples.size());
    for (size_t i = 0; i < traj.samples.size(); ++i) {
        WorldlineState st = traj.samples[i];
        const double r = rate(st.param);
        st.param = knot_s[i];
        st.v /= r;
        out.causal_record.push_back(causal_character(m, st.x, st.v, char_band));
        out.samples.push_back(std::move(st));
    }
    return out;
}

// ---------------------------------------------------------------------------
// sup_lambda | D_s(dx/ds) - (q/m) Fhat[dx/ds] | in the auxiliary Euclidean
// norm, evaluated from the dense interpolant (no finite differencing).

inline double lfe_residual(const MetricField& m, const EMField* F, ChargeRatio ratio,
                           const Trajectory& traj, int oversample = 2) {
    for (auto& c : traj.causal_record)
        if (c.kind != CausalKind::timelike)
            throw NotTimelike("lfe_residual: curve must be timelike");
    double worst = 0.0;
    const auto& dense = *traj.dense;
    for (size_t i = 0; i + 1 < traj.samples.size(); ++i) {
        for (int k = 0; k < oversample; ++k) {
            const double lam =
                traj.samples[i].param +
                (traj.samples[i + 1].param - traj.samples[i].param) *
                    ((k + 0.5) / oversample);
            const WorldlineState st = dense.state(lam);
            const Mat g = m.metric_eval(st.x);
            const Vec D =
                dense.coord_accel(lam) + m.christoffel(st.x).contract(st.v, st.v);
            const double r = std::sqrt(st.v.dot(g * st.v));
            const double dr = D.dot(g * st.v) / r;
            Vec R = D / (r * r) - st.v * (dr / (r * r * r));
            if (F && ratio.value != 0.0)
                R -= ratio.value * (raise_field(m, *F, st.x) * st.v) / r;
            worst = std::max(worst, aux_euclidean_norm(m, st.x, R));
        }
    }
    return worst;
}

}  // namespace lfe
