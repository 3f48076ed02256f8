#pragma once

#include <optional>
#include <random>

#include "lfe/kaluza_klein.hpp"

namespace lfe {

enum class Method { direct, kk_fermat };

// Winding numbers are read off the embedding azimuth about the z axis, so they
// are chart-independent. Curves passing within pole_margin of the axis have no
// well-defined winding.
struct AngularStructure {
    bool present = false;
    double pole_margin = 0.05;
};

// Immutable slice of a scenario the solvers operate on.
struct ConnectionContext {
    const MetricField* metric = nullptr;
    const EMField* field = nullptr;                 // may be null (free motion)
    std::shared_ptr<const EMPotential> potential;   // null for non-exact fields
    AngularStructure angular;
};

struct SolverTolerances {
    double endpoint_tol = 1e-8;
    double integrator_tol = 1e-10;
    int max_iter = 50;
    double jacobian_step = 1e-7;
    double dedup_tol = 1e-4;
    double nu_lightlike_factor = 1e-6;  // |nu| < factor * a flags a lightlike geodesic
};

struct ConnectionProblem {
    ConnectionContext ctx;
    Event x0, x1;
    ChargeRatio ratio;
    Method method = Method::direct;
    SolverTolerances tol;

    void validate() const {
        if (x1.t() <= x0.t())
            throw ConfigError("ConnectionProblem: t(x1) must exceed t(x0)");
        const SurfacePatchwork* s = ctx.metric->surface();
        const Vec3 p0 = s->chart(x0.chart).embed(x0.spatial()).E;
        const Vec3 p1 = s->chart(x1.chart).embed(x1.spatial()).E;
        if ((p0 - p1).norm() < 1e-14 && std::abs(x0.t() - x1.t()) < 1e-14)
            throw ConfigError("ConnectionProblem: x0 and x1 coincide");
    }
};

struct ConnectionResult {
    Trajectory trajectory;           // proper time when timelike, affine otherwise
    bool converged = false;
    double endpoint_residual = std::numeric_limits<double>::infinity();
    int iterations = 0;
    FunctionalValue action;
    bool action_valid = false;
    double nu = std::numeric_limits<double>::quiet_NaN();       // kk method
    double arrival = std::numeric_limits<double>::quiet_NaN();  // kk method
    bool lightlike_flagged = false;
    std::optional<double> first_conjugate;
    std::optional<int> winding;
    Vec shooting_variables;          // realized unknowns (warm starts, dedup)
    double lfe_resid = std::numeric_limits<double>::quiet_NaN();
    std::shared_ptr<const Trajectory> kk_trajectory;  // bundle curve (kk method)
};

// ---------------------------------------------------------------------------
// Embedding azimuth and winding numbers.

inline double embedding_azimuth(const SurfacePatchwork& s, const Event& x,
                                double pole_margin) {
    const Vec3 p = s.chart(x.chart).embed(x.spatial()).E;
    if (std::hypot(p[0], p[1]) < pole_margin)
        throw AmbiguousWinding("curve passes through the chart-excluded axis region");
    return std::atan2(p[1], p[0]);
}

namespace detail {
inline double wrap_angle(double a) {
    a = std::fmod(a + kPi, 2 * kPi);
    if (a < 0) a += 2 * kPi;
    return a - kPi;
}

inline double unwrapped_azimuth_delta(const SurfacePatchwork& s,
                                      const DenseCurve& dense, double l0, double l1,
                                      double th0, double th1, double margin,
                                      int depth) {
    const double d = wrap_angle(th1 - th0);
    if (std::abs(d) <= kPi / 2) return d;
    if (depth > 40)
        throw AmbiguousWinding("azimuth refinement failed to resolve the winding");
    const double lm = 0.5 * (l0 + l1);
    const WorldlineState st = dense.state(lm);
    const double thm = embedding_azimuth(s, st.x, margin);
    return unwrapped_azimuth_delta(s, dense, l0, lm, th0, thm, margin, depth + 1) +
           unwrapped_azimuth_delta(s, dense, lm, l1, thm, th1, margin, depth + 1);
}
}  // namespace detail

// Winding of the trajectory's projection: unwrapped azimuth change / 2 pi.
inline int homotopy_tag(const ConnectionContext& ctx, const Trajectory& traj) {
    if (!ctx.angular.present)
        throw NoAngularStructure("scenario declares no angular coordinate");
    const SurfacePatchwork& s = *ctx.metric->surface();
    const double margin = ctx.angular.pole_margin;
    double total = 0.0;
    double prev = embedding_azimuth(s, traj.samples.front().x, margin);
    for (size_t i = 0; i + 1 < traj.samples.size(); ++i) {
        const double next = embedding_azimuth(s, traj.samples[i + 1].x, margin);
        total += detail::unwrapped_azimuth_delta(
            s, *traj.dense, traj.samples[i].param, traj.samples[i + 1].param, prev,
            next, margin, 0);
        prev = next;
    }
    return (int)std::lround(total / (2 * kPi));
}

// ---------------------------------------------------------------------------
// Endpoint residuals. The mismatch is measured in the target's chart; angular
// chart coordinates are compared modulo 2 pi so each homotopy class is found
// by whatever basin the start lands in.

namespace detail {
// Spatial endpoint mismatch measured through the embedding: zero exactly when
// the surface points coincide (any winding), smooth for arbitrary reached
// points. The full 3-vector is used so that no off-surface direction can hide
// a miss; the damped least-squares step handles the overdetermined system.
inline Vec endpoint_mismatch(const ConnectionContext& ctx, const Event& reached,
                             const Event& target) {
    const SurfacePatchwork& s = *ctx.metric->surface();
    const Vec3 Et = s.chart(target.chart).embed(target.spatial()).E;
    const Vec3 Er = s.chart(reached.chart).embed(reached.spatial()).E;
    Vec d(3);
    d << Er[0] - Et[0], Er[1] - Et[1], Er[2] - Et[2];
    return d;
}

// Damped least-squares Newton on a small residual map (2 or 3 residuals, 2 or
// 3 unknowns). The map may throw (chart exits, cone exits); such evaluations
// count as invalid points.
struct NewtonReport {
    bool converged = false;
    int iterations = 0;
    double best_residual = std::numeric_limits<double>::infinity();
    Vec p;
};

template <class ResidualMap>
NewtonReport damped_newton(ResidualMap&& map, Vec p, const SolverTolerances& tol) {
    NewtonReport rep;
    rep.p = p;
    auto eval = [&](const Vec& q, Vec* out) {
        try {
            *out = map(q);
            return true;
        } catch (const Error&) {
            return false;
        }
    };
    Vec R;
    if (!eval(p, &R)) return rep;
    int stall = 0;
    std::vector<double> history;
    for (int it = 0; it < tol.max_iter; ++it) {
        rep.iterations = it;
        const double rn = R.norm();
        if (rn < rep.best_residual) {
            rep.best_residual = rn;
            rep.p = p;
        }
        if (rn < tol.endpoint_tol) {
            rep.converged = true;
            return rep;
        }
        history.push_back(rep.best_residual);
        if (history.size() > 5 &&
            rep.best_residual > 0.99 * history[history.size() - 6])
            return rep;  // stagnant: no meaningful progress in 5 iterations
        // forward-difference Jacobian
        const int k = (int)p.size();
        Mat J((int)R.size(), k);
        bool jac_ok = true;
        for (int c = 0; c < k && jac_ok; ++c) {
            Vec q = p;
            q[c] += tol.jacobian_step;
            Vec Rq;
            if (!eval(q, &Rq)) {
                q[c] = p[c] - tol.jacobian_step;
                if (!eval(q, &Rq)) {
                    jac_ok = false;
                    break;
                }
                J.col(c) = (R - Rq) / tol.jacobian_step;
            } else {
                J.col(c) = (Rq - R) / tol.jacobian_step;
            }
        }
        if (!jac_ok) return rep;
        Mat JtJ = (J.transpose() * J).eval();
        const double mu = 1e-12 * (1.0 + JtJ.trace());
        JtJ.diagonal().array() += mu;
        const Vec step = JtJ.ldlt().solve((-J.transpose() * R).eval());

        // Armijo backtracking on the squared residual
        const double phi0 = 0.5 * rn * rn;
        double alpha = 1.0;
        bool accepted = false;
        for (int ls = 0; ls < 14; ++ls, alpha *= 0.5) {
            Vec Rn;
            if (!eval((p + alpha * step).eval(), &Rn)) continue;
            if (0.5 * Rn.squaredNorm() <= phi0 * (1.0 - 1e-4 * alpha)) {
                p += alpha * step;
                R = Rn;
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            if (++stall >= 2) return rep;
        } else {
            stall = 0;
        }
    }
    rep.iterations = tol.max_iter;
    return rep;
}
}  // namespace detail

// ---------------------------------------------------------------------------
// Conjugate points via the linearized geodesic flow. For lightlike geodesics
// the deviation is analyzed on the quotient by the flow direction (vector
// fields modulo gamma'), realized as a Euclidean-orthogonal gauge slice.

inline std::optional<double> jacobi_first_conjugate(
    const MetricField& m, const Trajectory& traj, double geodesic_tol = 1e-6,
    const IntegratorOptions& opt = {}) {
    const int n = m.dim();
    const auto& dense = *traj.dense;
    const double l0 = traj.param_begin(), l1 = traj.param_end();

    // geodesic defect check
    for (int i = 0; i < 17; ++i) {
        const double lam = l0 + (l1 - l0) * (i + 0.5) / 17.0;
        const WorldlineState st = dense.state(lam);
        const Vec D = dense.coord_accel(lam) + m.christoffel(st.x).contract(st.v, st.v);
        if (aux_euclidean_norm(m, st.x, D) >
            geodesic_tol * (1.0 + st.v.squaredNorm()))
            throw NotAGeodesic("jacobi_first_conjugate: curve is not a geodesic");
    }

    bool lightlike = true, timelike = true;
    for (auto& c : traj.causal_record) {
        lightlike &= (c.kind == CausalKind::lightlike);
        timelike &= (c.kind == CausalKind::timelike);
    }
    if (!lightlike && !timelike)
        throw NotAGeodesic("jacobi_first_conjugate: mixed causal character");

    const Mat g0 = m.metric_eval(traj.samples.front().x);
    const Vec v0 = traj.samples.front().v;

    // initial transverse directions: g-orthogonal to v0 (timelike case) or a
    // slice of v0^perp modulo v0 (lightlike case)
    std::vector<Vec> basis;
    {
        std::vector<Vec> seeds;
        for (int i = 0; i < n; ++i) {
            Vec e = Vec::Zero(n);
            e[i] = 1;
            seeds.push_back(e);
        }
        for (Vec e : seeds) {
            if (timelike)
                e -= v0 * (e.dot(g0 * v0) / v0.dot(g0 * v0));
            else {
                // project into v0^perp_g, then remove the v0 direction itself
                const Vec gv = g0 * v0;
                Vec w = Vec::Zero(n);
                // choose a helper with g(w, v0) != 0 to remove the g-component
                int h = 0;
                for (int i = 1; i < n; ++i)
                    if (std::abs(gv[i]) > std::abs(gv[h])) h = i;
                w[h] = 1.0;
                e -= w * (e.dot(gv) / gv[h]);
                e -= v0 * (e.dot(v0) / v0.dot(v0));
            }
            for (auto& b : basis) e -= b * (e.dot(b));
            if (e.norm() > 1e-6) basis.push_back(e.normalized());
        }
        const size_t want = timelike ? n - 1 : n - 2;
        if (basis.size() < want)
            throw NotAGeodesic("jacobi_first_conjugate: degenerate initial frame");
        basis.resize(want);
    }
    const int k = (int)basis.size();

    // deviation system: delta' = A(lambda) delta with A the finite-difference
    // Jacobian of the geodesic right-hand side around the reference states
    auto rhs_state = [&m, n](int chart, const Vec& coords, const Vec& vel) {
        WorldlineState st;
        st.x.chart = chart;
        st.x.coords = coords;
        st.v = vel;
        auto [dx, dv] = lfe_rhs(m, nullptr, {0.0}, st);
        OdeVec dy(2 * n);
        dy.head(n) = dx;
        dy.tail(n) = dv;
        return dy;
    };
    auto deviation_rhs = [&, k, n](double lam, const OdeVec& y) {
        const WorldlineState st = dense.state(lam);
        OdeVec dy(2 * n * k);
        const double h = 1e-6;
        for (int c = 0; c < k; ++c) {
            Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 12, 1> col =
                y.segment(2 * n * c, 2 * n);
            // directional finite difference of the flow field
            Vec xp = st.x.coords + h * col.head(n);
            Vec vp = st.v + h * col.tail(n);
            Vec xm = st.x.coords - h * col.head(n);
            Vec vm = st.v - h * col.tail(n);
            const OdeVec fp = rhs_state(st.x.chart, xp, vp);
            const OdeVec fm = rhs_state(st.x.chart, xm, vm);
            dy.segment(2 * n * c, 2 * n) = (fp - fm) / (2 * h);
        }
        return dy;
    };

    OdeOptions ode_opt;
    ode_opt.abs_tol = ode_opt.rel_tol = std::max(opt.tol, 1e-10);
    OdeVec y0 = OdeVec::Zero(2 * n * k);
    for (int c = 0; c < k; ++c) y0.segment(2 * n * c + n, n) = basis[c];

    // integrate segment-wise so chart changes of the reference transport the
    // deviation through the transition map's differential
    std::vector<std::pair<double, int>> breaks;  // (param, chart)
    breaks.push_back({traj.samples.front().param, traj.samples.front().x.chart});
    for (auto& s : traj.samples)
        if (s.x.chart != breaks.back().second) breaks.push_back({s.param, s.x.chart});
    breaks.push_back({l1, breaks.back().second});

    std::vector<DenseOde> dev_segments;
    std::vector<double> seg_start;
    OdeVec y = y0;
    for (size_t b = 0; b + 1 < breaks.size(); ++b) {
        const double a0 = breaks[b].first, a1 = breaks[b + 1].first;
        if (a1 <= a0) continue;
        DenseOde seg = integrate_ode(deviation_rhs, y, a0, a1, ode_opt);
        y = seg.y_final;
        seg_start.push_back(a0);
        dev_segments.push_back(std::move(seg));
        if (b + 2 < breaks.size()) {
            // transport deviation columns through the chart transition
            const SurfacePatchwork& s = *m.surface();
            const int from = breaks[b].second, to = breaks[b + 1].second;
            const WorldlineState st = dense.state(a1);
            // reference state is stored in chart `to` already; rebuild the
            // `from`-chart representation for the transition differential
            const Vec2 hint = st.x.spatial();
            const double h = 1e-6;
            auto push = [&](const Vec& coords, const Vec& vel) {
                auto [q, v] = s.transition_state(from, Vec2(coords[1], coords[2]),
                                                 Vec2(vel[1], vel[2]), to, &hint);
                Vec c2 = coords, v2 = vel;
                c2[1] = q[0];
                c2[2] = q[1];
                v2[1] = v[0];
                v2[2] = v[1];
                return std::make_pair(c2, v2);
            };
            const Vec2 back_hint = [&] {
                const Vec3 p = s.chart(to).embed(st.x.spatial()).E;
                return *s.chart(from).from_r3(p, nullptr);
            }();
            Vec coords_from = st.x.coords, vel_from = st.v;
            {
                auto [qf, vf] = s.transition_state(to, st.x.spatial(),
                                                   Vec2(st.v[1], st.v[2]), from,
                                                   &back_hint);
                coords_from[1] = qf[0];
                coords_from[2] = qf[1];
                vel_from[1] = vf[0];
                vel_from[2] = vf[1];
            }
            for (int c = 0; c < k; ++c) {
                Vec dxc = y.segment(2 * n * c, n);
                Vec dvc = y.segment(2 * n * c + n, n);
                auto [cp, vp] = push(coords_from + h * dxc, vel_from + h * dvc);
                auto [cm, vm] = push(coords_from - h * dxc, vel_from - h * dvc);
                y.segment(2 * n * c, n) = (cp - cm) / (2 * h);
                y.segment(2 * n * c + n, n) = (vp - vm) / (2 * h);
            }
        }
    }
    auto dev_at = [&](double lam) -> OdeVec {
        size_t i = 0;
        while (i + 1 < seg_start.size() && lam >= seg_start[i + 1]) ++i;
        return dev_segments[i].eval(lam);
    };

    // continued transverse frame and the projected position-block determinant
    std::vector<Vec> frame = basis;
    auto det_at = [&](double lam, std::vector<Vec>& fr) {
        const WorldlineState st = dense.state(lam);
        const Mat g = m.metric_eval(st.x);
        const Vec v = st.v;
        std::vector<Vec> nf;
        for (Vec b : fr) {
            if (timelike)
                b -= v * (b.dot(g * v) / v.dot(g * v));
            else {
                const Vec gv = g * v;
                int hidx = 0;
                for (int i = 1; i < n; ++i)
                    if (std::abs(gv[i]) > std::abs(gv[hidx])) hidx = i;
                Vec w = Vec::Zero(n);
                w[hidx] = 1.0;
                b -= w * (b.dot(gv) / gv[hidx]);
                b -= v * (b.dot(v) / v.dot(v));
            }
            for (auto& u : nf) b -= u * b.dot(u);
            nf.push_back(b.normalized());
        }
        fr = nf;
        const OdeVec dv = dev_at(lam);
        Mat P(k, k);
        for (int j = 0; j < k; ++j) {
            Vec J = dv.segment(2 * n * j, n);
            if (!timelike) J -= v * (J.dot(v) / v.dot(v));
            for (int i = 0; i < k; ++i) P(i, j) = nf[i].dot(J);
        }
        return P.determinant();
    };

    // scan for a sign change past the initial degenerate zone
    std::vector<double> grid;
    for (auto& s : traj.samples) grid.push_back(s.param);
    double prev_det = 0;
    double prev_lam = l0;
    bool primed = false;
    const double span = l1 - l0;
    for (double lam : grid) {
        if (lam <= l0 + 1e-3 * span) continue;
        std::vector<Vec> fr = frame;  // advance a copy; keep continuity by reuse
        const double d = det_at(lam, fr);
        frame = fr;
        if (primed && prev_det != 0 && d != 0 && (d > 0) != (prev_det > 0)) {
            // bisection refinement inside [prev_lam, lam]
            std::vector<Vec> fb = frame;
            auto f = [&](double x) {
                std::vector<Vec> tmp = fb;
                return det_at(x, tmp);
            };
            return find_root(f, prev_lam, lam, prev_det, d, 1e-12);
        }
        prev_det = d;
        prev_lam = lam;
        primed = true;
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Shooting.

namespace detail {
// dl-orthonormal frame of the surface tangent plane at a chart point.
inline std::pair<Vec2, Vec2> dl_orthonormal_frame(const SurfacePatchwork& s,
                                                  int chart, const Vec2& q) {
    const Mat2 gs = s.induced_metric(chart, q);
    Vec2 b1(1, 0), b2(0, 1);
    b1 /= std::sqrt(b1.dot(gs * b1));
    b2 -= b1 * (b2.dot(gs * b1));
    b2 /= std::sqrt(b2.dot(gs * b2));
    return {b1, b2};
}

inline void attach_action_and_winding(const ConnectionProblem& pb,
                                      ConnectionResult& res) {
    try {
        if (!pb.ctx.field || pb.ctx.field->origin() == EMField::Origin::exact ||
            pb.ratio.value == 0.0) {
            res.action = action_I(*pb.ctx.metric, pb.ctx.potential.get(), pb.ratio,
                                  res.trajectory,
                                  character_band({pb.tol.integrator_tol}));
            res.action_valid = true;
        }
    } catch (const Error&) {
        res.action_valid = false;
    }
    try {
        res.winding = homotopy_tag(pb.ctx, res.trajectory);
    } catch (const Error&) {
        res.winding = std::nullopt;
    }
}
}  // namespace detail

// Chord-velocity starting guess for the direct method.
inline Vec2 default_direct_guess(const ConnectionProblem& pb) {
    const SurfacePatchwork& s = *pb.ctx.metric->surface();
    const EmbedDerivs d0 = s.chart(pb.x0.chart).embed(pb.x0.spatial());
    const Vec3 E1 = s.chart(pb.x1.chart).embed(pb.x1.spatial()).E;
    const double dt = pb.x1.t() - pb.x0.t();
    const Mat2 gram = d0.J.transpose() * d0.J;
    Vec2 w = gram.ldlt().solve(d0.J.transpose() * (E1 - d0.E)) / dt;
    const Mat2 gs = s.induced_metric(pb.x0.chart, pb.x0.spatial());
    const double speed = std::sqrt(w.dot(gs * w));
    if (speed > 0.8) w *= 0.8 / speed;
    return w;
}

// Direct LFE shooting: unknowns are the initial spatial velocity components
// dq/dt, the curve is t-parametrized on [t0, t1], and the residual is the
// spatial mismatch at t1.
inline ConnectionResult shoot_direct(const ConnectionProblem& pb, const Vec2& guess) {
    pb.validate();
    IntegratorOptions iopt;
    iopt.tol = pb.tol.integrator_tol;
    const MetricField& m = *pb.ctx.metric;
    const Mat2 gs0 = m.surface()->induced_metric(pb.x0.chart, pb.x0.spatial());

    auto integrate = [&](const Vec2& w) {
        if (w.dot(gs0 * w) >= 1.0 - 1e-9)
            throw NonCausalCurve("shoot_direct: start velocity not timelike");
        return integrate_lfe_temporal(m, pb.ctx.field, pb.ratio, pb.x0, w,
                                      pb.x1.t(), iopt);
    };
    auto map = [&](const Vec& p) -> Vec {
        Trajectory t = integrate(Vec2(p[0], p[1]));
        return detail::endpoint_mismatch(pb.ctx, t.back().x, pb.x1);
    };
    Vec p0(2);
    p0 << guess[0], guess[1];
    detail::NewtonReport rep = detail::damped_newton(map, p0, pb.tol);

    ConnectionResult res;
    res.iterations = rep.iterations;
    res.endpoint_residual = rep.best_residual;
    res.shooting_variables = rep.p;
    if (!rep.converged) return res;

    Trajectory t = integrate(Vec2(rep.p[0], rep.p[1]));
    res.converged = true;
    res.endpoint_residual =
        detail::endpoint_mismatch(pb.ctx, t.back().x, pb.x1).norm();
    res.trajectory = reparametrize(m, t, ParamKind::proper_time,
                                   character_band(iopt));
    res.lfe_resid = lfe_residual(m, pb.ctx.field, pb.ratio, res.trajectory);
    detail::attach_action_and_winding(pb, res);
    if (pb.ratio.value == 0.0) {
        try {
            res.first_conjugate = jacobi_first_conjugate(m, res.trajectory);
        } catch (const Error&) {
        }
    }
    return res;
}

inline ConnectionResult shoot_direct(const ConnectionProblem& pb) {
    return shoot_direct(pb, default_direct_guess(pb));
}

// Kaluza-Klein / Fermat shooting: shoot lightlike bundle geodesics from
// p0 = (x0, 0) over the future null cone, Newton on the base endpoint.
// Unknowns: a raw direction vector in a Q-orthonormal frame of the spatial
// bundle form, normalized inside the map (the radial direction is flat and
// absorbed by the damped least-squares step).
inline KKState kk_initial_state(const KKBundle& kk, const ConnectionProblem& pb,
                                const Vec3& dir_raw) {
    const MetricField& m = *kk.base;
    const Vec3 d = dir_raw.normalized();
    auto [b1, b2] = detail::dl_orthonormal_frame(*m.surface(), pb.x0.chart,
                                                 pb.x0.spatial());
    const Vec2 spatial = d[0] * b1 + d[1] * b2;
    const Vec w0 = kk.omega->components(pb.x0);
    Vec u = Vec::Zero(3);
    u.tail(2) = spatial;
    const double y_horizontal = -kk.beta * w0.dot(u);
    const double yp = y_horizontal + d[2] / kk.a();
    const double tp = pb.x1.t() - pb.x0.t();

    KKState st;
    st.x.chart = pb.x0.chart;
    st.x.coords = Vec(4);
    st.x.coords << pb.x0.t(), pb.x0.coords[1], pb.x0.coords[2], 0.0;
    st.v = Vec(4);
    st.v << tp, tp * spatial[0], tp * spatial[1], tp * yp;
    return st;
}

inline ConnectionResult shoot_kk_fermat(const ConnectionProblem& pb,
                                        const Vec3& guess) {
    pb.validate();
    if (pb.ratio.value == 0.0)
        throw ConfigError("shoot_kk_fermat: ratio must be nonzero");
    if (!pb.ctx.potential)
        throw NonExactField("shoot_kk_fermat: scenario has no global potential");
    const MetricField& m = *pb.ctx.metric;
    KKBundle kk(&m, pb.ctx.potential, pb.ratio);
    IntegratorOptions iopt;
    iopt.tol = pb.tol.integrator_tol;

    auto integrate = [&](const Vec3& d) {
        return integrate_kk_geodesic(kk, kk_initial_state(kk, pb, d), 1.0, iopt);
    };
    auto map = [&](const Vec& p) -> Vec {
        Trajectory t = integrate(Vec3(p[0], p[1], p[2]));
        Event back = t.back().x;
        Event base;
        base.chart = back.chart;
        base.coords = Vec(back.coords.head(3));
        return detail::endpoint_mismatch(pb.ctx, base, pb.x1);
    };
    Vec p0(3);
    p0 << guess[0], guess[1], guess[2];
    detail::NewtonReport rep = detail::damped_newton(map, p0, pb.tol);

    ConnectionResult res;
    res.iterations = rep.iterations;
    res.endpoint_residual = rep.best_residual;
    res.shooting_variables = rep.p.normalized();
    if (!rep.converged) return res;

    Trajectory gamma = integrate(Vec3(rep.p[0], rep.p[1], rep.p[2]));
    {
        Event back = gamma.back().x;
        Event base;
        base.chart = back.chart;
        base.coords = Vec(back.coords.head(3));
        res.endpoint_residual =
            detail::endpoint_mismatch(pb.ctx, base, pb.x1).norm();
    }
    res.converged = true;
    KKState st0{gamma.samples.front().x, gamma.samples.front().v};
    res.nu = noether_nu(kk, st0);
    res.arrival = gamma.samples.back().x.coords[3];
    res.kk_trajectory = std::make_shared<Trajectory>(gamma);

    Trajectory base = project(kk, gamma, character_band(iopt));
    res.lightlike_flagged =
        std::abs(res.nu) < pb.tol.nu_lightlike_factor * kk.a();
    if (res.lightlike_flagged) {
        // lightlike geodesic class: keep the affine projection, locate the
        // first conjugate point (the maximizer must not contain one)
        res.trajectory = base;
        try {
            res.first_conjugate = jacobi_first_conjugate(m, res.trajectory);
        } catch (const Error&) {
        }
    } else {
        res.trajectory = reparametrize(m, base, ParamKind::proper_time,
                                       character_band(iopt));
        const double effective =
            (res.nu > 0 ? 1.0 : -1.0) * std::abs(pb.ratio.value);
        res.lfe_resid =
            lfe_residual(m, pb.ctx.field, {effective}, res.trajectory);
    }
    detail::attach_action_and_winding(pb, res);
    return res;
}

inline Vec3 default_kk_guess(const ConnectionProblem& pb) {
    const Vec2 chord = default_direct_guess(pb);
    const SurfacePatchwork& s = *pb.ctx.metric->surface();
    auto [b1, b2] = detail::dl_orthonormal_frame(s, pb.x0.chart, pb.x0.spatial());
    const Mat2 gs = s.induced_metric(pb.x0.chart, pb.x0.spatial());
    // chord coefficients in the dl-orthonormal frame, mixed with a fiber part
    // whose sign keeps nu sgn-consistent with the ratio
    const double c1 = chord.dot(gs * b1), c2 = chord.dot(gs * b2);
    Vec3 d(0.86 * c1, 0.86 * c2, -0.5 * (pb.ratio.value > 0 ? 1.0 : -1.0));
    if (d.head<2>().norm() < 1e-12) d[0] = 0.1;
    return d.normalized();
}

inline ConnectionResult solve(const ConnectionProblem& pb) {
    if (pb.method == Method::direct) return shoot_direct(pb);
    return shoot_kk_fermat(pb, default_kk_guess(pb));
}

// ---------------------------------------------------------------------------
// Multistart enumeration across homotopy classes.

struct GridSpec {
    int n_dir = 12;          // azimuthal starts
    int n_mag = 6;           // speeds (direct) or cone polar angles (kk)
    double speed_max = 0.95; // direct method only
    double jitter = 0.0;     // fraction of a grid cell
    uint64_t seed = 0;
    int max_threads = 0;     // 0 = hardware default
};

struct MultistartReport {
    std::vector<ConnectionResult> results;  // converged, deduplicated, sorted
    int attempts = 0;
    int converged_count = 0;  // before deduplication and sign filtering
    double best_residual = std::numeric_limits<double>::infinity();
    std::optional<int> selected;  // kk: extremal-arrival entry
};

inline MultistartReport multistart(const ConnectionProblem& pb,
                                   const GridSpec& grid) {
    pb.validate();
    if (grid.n_dir <= 0 || grid.n_mag <= 0)
        throw ConfigError("multistart: empty grid");
    std::mt19937_64 rng(grid.seed);
    std::uniform_real_distribution<double> jit(-0.5, 0.5);

    std::vector<Vec> starts;
    const SurfacePatchwork& s = *pb.ctx.metric->surface();
    auto [b1, b2] = detail::dl_orthonormal_frame(s, pb.x0.chart, pb.x0.spatial());
    for (int i = 0; i < grid.n_dir; ++i)
        for (int j = 0; j < grid.n_mag; ++j) {
            const double phi =
                2 * kPi * (i + 0.5 + grid.jitter * jit(rng)) / grid.n_dir;
            const double frac = (j + 0.5 + grid.jitter * jit(rng)) / grid.n_mag;
            if (pb.method == Method::direct) {
                const Vec2 w =
                    grid.speed_max * frac * (std::cos(phi) * b1 + std::sin(phi) * b2);
                Vec p(2);
                p << w[0], w[1];
                starts.push_back(p);
            } else {
                const double psi = kPi * frac;
                Vec p(3);
                p << std::sin(psi) * std::cos(phi), std::sin(psi) * std::sin(phi),
                    std::cos(psi);
                starts.push_back(p);
            }
        }

    std::vector<ConnectionResult> all(starts.size());
    parallel_for(
        (int)starts.size(),
        [&](int i) {
            try {
                all[i] = (pb.method == Method::direct)
                             ? shoot_direct(pb, Vec2(starts[i][0], starts[i][1]))
                             : shoot_kk_fermat(
                                   pb, Vec3(starts[i][0], starts[i][1],
                                            starts[i][2]));
            } catch (const Error&) {
                all[i] = ConnectionResult{};
            }
        },
        grid.max_threads);

    MultistartReport rep;
    rep.attempts = (int)starts.size();
    for (auto& r : all) {
        rep.best_residual = std::min(rep.best_residual, r.endpoint_residual);
        if (r.converged) ++rep.converged_count;
    }

    const double a = std::abs(pb.ratio.value);
    for (auto& r : all) {
        if (!r.converged) continue;
        // kk: drop geodesics whose Noether charge belongs to the opposite
        // charge sign (their projections solve the LFE for -q/m)
        if (pb.method == Method::kk_fermat && !r.lightlike_flagged &&
            r.nu * (pb.ratio.value > 0 ? 1.0 : -1.0) < 0)
            continue;
        bool dup = false;
        for (auto& kept : rep.results) {
            const bool same_class = kept.winding == r.winding;
            if (same_class && (kept.shooting_variables - r.shooting_variables)
                                      .norm() < pb.tol.dedup_tol) {
                dup = true;
                if (r.endpoint_residual < kept.endpoint_residual) kept = r;
                break;
            }
        }
        if (!dup) rep.results.push_back(r);
    }
    (void)a;

    std::sort(rep.results.begin(), rep.results.end(),
              [](const ConnectionResult& x, const ConnectionResult& y) {
                  const double ax = x.action_valid ? x.action.value : -1e300;
                  const double ay = y.action_valid ? y.action.value : -1e300;
                  if (ax != ay) return ax > ay;
                  const int wx = x.winding.value_or(1 << 20);
                  const int wy = y.winding.value_or(1 << 20);
                  if (wx != wy) return wx < wy;
                  return x.endpoint_residual < y.endpoint_residual;
              });

    if (pb.method == Method::kk_fermat && !rep.results.empty()) {
        int best = 0;
        for (int i = 1; i < (int)rep.results.size(); ++i) {
            const bool lower = rep.results[i].arrival < rep.results[best].arrival;
            if (pb.ratio.value > 0 ? lower : !lower) best = i;
        }
        rep.selected = best;
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Maximizer audit: the computational content of the main theorem's claims on
// a converged result.

struct AuditReport {
    bool residual_ok = true;    // timelike results solve the LFE
    bool conjugate_ok = true;   // lightlike results have no interior conjugate point
    bool argmax_ok = true;      // one-sided action certificate within the class
    double lfe_resid = std::numeric_limits<double>::quiet_NaN();
    std::optional<double> first_conjugate;
    int probes_checked = 0;
    double max_probe_action = -std::numeric_limits<double>::infinity();
};

inline AuditReport maximizer_audit(const ConnectionProblem& pb,
                                   const ConnectionResult& result,
                                   const std::vector<Trajectory>& probe_family) {
    AuditReport rep;
    if (!result.converged) throw ConfigError("maximizer_audit: result not converged");
    if (!result.lightlike_flagged) {
        rep.lfe_resid = result.lfe_resid;
        rep.residual_ok = result.lfe_resid < 1e-6;
    } else {
        rep.first_conjugate = result.first_conjugate;
        const double l0 = result.trajectory.param_begin();
        const double l1 = result.trajectory.param_end();
        rep.conjugate_ok = !result.first_conjugate ||
                           *result.first_conjugate >= l1 - 1e-9 * (l1 - l0);
    }
    if (result.action_valid) {
        for (const auto& probe : probe_family) {
            std::optional<int> probe_tag;
            try {
                probe_tag = homotopy_tag(pb.ctx, probe);
            } catch (const Error&) {
            }
            if (probe_tag != result.winding) continue;
            const FunctionalValue I = action_I(
                *pb.ctx.metric, pb.ctx.potential.get(), pb.ratio, probe,
                character_band({pb.tol.integrator_tol}));
            ++rep.probes_checked;
            rep.max_probe_action = std::max(rep.max_probe_action, I.value);
            if (I.value > result.action.value + 1e-9 +
                              I.quadrature_error_estimate +
                              result.action.quadrature_error_estimate)
                rep.argmax_ok = false;
        }
    }
    return rep;
}

// Warm-started sweep over charge-to-mass ratios.
struct ContinuationEntry {
    double ratio;
    ConnectionResult result;
};

inline std::vector<ContinuationEntry> ratio_continuation(
    ConnectionProblem pb, const std::vector<double>& ratios) {
    std::vector<ContinuationEntry> out;
    std::optional<Vec> warm;
    for (double r : ratios) {
        pb.ratio = {r};
        auto attempt = [&](bool use_warm) {
            ConnectionResult res;
            try {
                if (pb.method == Method::direct || r == 0.0) {
                    const Vec2 g = use_warm && warm && warm->size() == 2
                                       ? Vec2((*warm)[0], (*warm)[1])
                                       : default_direct_guess(pb);
                    res = shoot_direct(pb, g);
                } else {
                    const Vec3 g = use_warm && warm && warm->size() == 3
                                       ? Vec3((*warm)[0], (*warm)[1], (*warm)[2])
                                       : default_kk_guess(pb);
                    res = shoot_kk_fermat(pb, g);
                }
            } catch (const Error&) {
                res = ConnectionResult{};
            }
            return res;
        };
        ConnectionResult res = attempt(true);
        if (!res.converged && warm) res = attempt(false);
        if (res.converged) warm = res.shooting_variables;
        out.push_back({r, std::move(res)});
    }
    return out;
}

}  // namespace lfe
