#pragma once

#include "lfe/dynamics.hpp"

namespace lfe {

// Trivial bundle P = M x R with metric gt = g - a^2 (dy + beta*omega)^2 and
// scale factor a = |q/m| / beta. Points carry the base chart plus fiber
// coordinate y appended to the event coordinates.
struct KKBundle {
    const MetricField* base;
    std::shared_ptr<const EMPotential> omega;
    ChargeRatio ratio;
    double beta = 1.0;
    EMField field = EMField::exact(nullptr);

    double a() const { return std::abs(ratio.value) / beta; }

    KKBundle(const MetricField* base_metric, std::shared_ptr<const EMPotential> w,
             ChargeRatio r, double b = 1.0)
        : base(base_metric), omega(std::move(w)), ratio(r), beta(b) {
        if (ratio.value == 0.0)
            throw ConfigError("KKBundle: charge-to-mass ratio must be nonzero");
        if (!omega)
            throw NonExactField("KKBundle: requires a globally defined potential");
        field = EMField::exact(omega);
    }

    Event base_event(const Event& p) const {
        Event e;
        e.chart = p.chart;
        e.coords = p.coords.head(base->dim());
        return e;
    }
};

struct KKState {
    Event x;  // coords = (t, q..., y)
    Vec v;    // (t', q'..., y')
};

inline Mat kk_metric_eval(const KKBundle& kk, const Event& p) {
    const int n = kk.base->dim();
    const Event xb = kk.base_event(p);
    const Mat g = kk.base->metric_eval(xb);
    const Vec w = kk.omega->components(xb);
    const double a2 = sqr(kk.a());
    Mat gt = Mat::Zero(n + 1, n + 1);
    gt.topLeftCorner(n, n) = g - a2 * sqr(kk.beta) * (w * w.transpose());
    gt.block(0, n, n, 1) = -a2 * kk.beta * w;
    gt.block(n, 0, 1, n) = -a2 * kk.beta * w.transpose();
    gt(n, n) = -a2;
    return gt;
}

// MetricField view of the bundle metric (diagnostics, causal records).
inline MetricField kk_metric_field(const KKBundle& kk) {
    return MetricField::from_function(
        kk.base->dim() + 1, [kk](const Event& p) { return kk_metric_eval(kk, p); });
}

// nu = gt(gamma', d_y) = -a^2 (y' + beta omega(sigma')); conserved along
// geodesics since d_y is Killing.
inline double noether_nu(const KKBundle& kk, const KKState& st) {
    const int n = kk.base->dim();
    const Event xb = kk.base_event(st.x);
    const double w_of_v = kk.omega->components(xb).dot(st.v.head(n));
    return -sqr(kk.a()) * (st.v[n] + kk.beta * w_of_v);
}

// ---------------------------------------------------------------------------
// Lightlike lifts: y^{+-}'(lambda) = -+ |sigma'| / a - beta omega(sigma').

namespace detail {
class LiftCurve final : public DenseCurve {
  public:
    LiftCurve(std::shared_ptr<const DenseCurve> base, const KKBundle* kk, double y0,
              int sign, double char_band, std::vector<double> knot_lam)
        : base_(std::move(base)),
          kk_(kk),
          y0_(y0),
          sign_(sign),
          band_(char_band),
          knot_lam_(std::move(knot_lam)) {
        knot_y_.push_back(y0_);
        double acc = y0_;
        for (size_t i = 0; i + 1 < knot_lam_.size(); ++i) {
            acc += integrate_adaptive([this](double l) { return y_rate(l); },
                                      knot_lam_[i], knot_lam_[i + 1], 1e-13, 1e-13)
                       .value;
            knot_y_.push_back(acc);
        }
    }

    double y_rate(double lam) const {
        const WorldlineState st = base_->state(lam);
        const Mat g = kk_->base->metric_eval(st.x);
        const double speed = causal_speed(st.v.dot(g * st.v), band_);
        const double w_of_v = kk_->omega->components(st.x).dot(st.v);
        return -sign_ * speed / kk_->a() - kk_->beta * w_of_v;
    }

    double y_at(double lam) const {
        size_t lo = 0, hi = knot_lam_.size() - 1;
        while (hi - lo > 1) {
            size_t mid = (lo + hi) / 2;
            (knot_lam_[mid] <= lam ? lo : hi) = mid;
        }
        return knot_y_[lo] + integrate_adaptive(
                                 [this](double l) { return y_rate(l); },
                                 knot_lam_[lo], lam, 1e-13, 1e-13)
                                 .value;
    }

    WorldlineState state(double lam) const override {
        WorldlineState st = base_->state(lam);
        const int n = (int)st.x.coords.size();
        Vec coords(n + 1), vel(n + 1);
        coords.head(n) = st.x.coords;
        coords[n] = y_at(lam);
        vel.head(n) = st.v;
        vel[n] = y_rate(lam);
        st.x.coords = coords;
        st.v = vel;
        return st;
    }

    Vec coord_accel(double lam) const override {
        const Vec a_base = base_->coord_accel(lam);
        const int n = (int)a_base.size();
        Vec a(n + 1);
        a.head(n) = a_base;
        const double h = 1e-6 * (1 + std::abs(lam));
        a[n] = (y_rate(lam + h) - y_rate(lam - h)) / (2 * h);
        return a;
    }

    double param_begin() const override { return base_->param_begin(); }
    double param_end() const override { return base_->param_end(); }

  private:
    std::shared_ptr<const DenseCurve> base_;
    const KKBundle* kk_;
    double y0_;
    int sign_;
    double band_;
    std::vector<double> knot_lam_;
    std::vector<double> knot_y_;
};
}  // namespace detail

struct LiftResult {
    Trajectory lifted;   // trajectory in P, same parameter as sigma
    int sign;            // +1 or -1
    double arrival;      // fiber coordinate of the endpoint
    double nu_initial;   // Noether charge of the lift at the start
};

inline LiftResult lightlike_lift(const KKBundle& kk, const Trajectory& sigma,
                                 double y0, int sign, double char_band = 1e-9) {
    for (auto& c : sigma.causal_record)
        if (c.kind == CausalKind::spacelike)
            throw NonCausalCurve("lightlike_lift: curve must be causal");
    std::vector<double> knots;
    for (auto& s : sigma.samples) knots.push_back(s.param);
    auto curve = std::make_shared<detail::LiftCurve>(sigma.dense, &kk, y0, sign,
                                                     char_band, knots);
    LiftResult out;
    out.sign = sign;
    out.lifted.param_kind = sigma.param_kind;
    out.lifted.dense = curve;
    const int nkk = kk.base->dim() + 1;
    for (auto& s : sigma.samples) {
        WorldlineState st = curve->state(s.param);
        // record the causal character under the bundle metric
        CausalCharacter c;
        c.g_vv = st.v.dot(kk_metric_eval(kk, st.x) * st.v);
        c.kind = std::abs(c.g_vv) <= 10 * char_band ? CausalKind::lightlike
                 : c.g_vv > 0                       ? CausalKind::timelike
                                                    : CausalKind::spacelike;
        c.future = st.v[0] > 0;
        out.lifted.causal_record.push_back(c);
        out.lifted.samples.push_back(std::move(st));
    }
    out.arrival = out.lifted.samples.back().x.coords[nkk - 1];
    KKState st0{out.lifted.samples.front().x, out.lifted.samples.front().v};
    out.nu_initial = noether_nu(kk, st0);
    return out;
}

inline double arrival_coordinate(const KKBundle& kk, const Trajectory& sigma,
                                 double y0, int sign, double char_band = 1e-9) {
    return lightlike_lift(kk, sigma, y0, sign, char_band).arrival;
}

// ---------------------------------------------------------------------------
// Geodesics of the bundle metric, integrated through the closed-form reduced
// equations (base Christoffels, Fhat, omega and its first derivatives):
//   x''  = -Gamma(x', x') + nu * beta * Fhat x'      nu = -a^2 (y' + b w(x'))
//   y''  = -beta (d_i w_j x'^i x'^j + w_j x''^j)
// nu is a derived quantity of the state; its conservation is measured.
inline Trajectory integrate_kk_geodesic(const KKBundle& kk, const KKState& init,
                                        double span,
                                        const IntegratorOptions& opt = {}) {
    const int n = kk.base->dim();  // bundle dimension n + 1
    const MetricField& m = *kk.base;

    auto make_rhs = [&kk, &m, n](int chart) {
        return [&kk, &m, n, chart](double, const OdeVec& y) {
            Event xb;
            xb.chart = chart;
            xb.coords = y.head(n);
            const Vec vb = y.segment(n + 1, n);
            const double yp = y[2 * n + 1];

            const Vec w = kk.omega->components(xb);
            const Mat dw = kk.omega->component_derivs(xb);
            const double nu = -sqr(kk.a()) * (yp + kk.beta * w.dot(vb));
            const Christoffels gam = m.christoffel(xb);
            Vec dvb = -gam.contract(vb, vb);
            dvb += (nu * kk.beta) * (raise_field(m, kk.field, xb) * vb);
            const double dyp =
                -kk.beta * (vb.dot(dw * vb) + w.dot(dvb));

            OdeVec dy(2 * (n + 1));
            dy.head(n) = vb;
            dy[n] = yp;
            dy.segment(n + 1, n) = dvb;
            dy[2 * n + 1] = dyp;
            return dy;
        };
    };
    auto spatial_of = [](const OdeVec& y) { return Vec2(y[1], y[2]); };
    auto transition = [&m, n](int from, int to, const OdeVec& y) {
        auto [q, v] = m.surface()->transition_state(
            from, Vec2(y[1], y[2]), Vec2(y[n + 2], y[n + 3]), to);
        OdeVec out = y;
        out[1] = q[0];
        out[2] = q[1];
        out[n + 2] = v[0];
        out[n + 3] = v[1];
        return out;
    };

    OdeVec y0(2 * (n + 1));
    y0.head(n + 1) = init.x.coords;
    y0.tail(n + 1) = init.v;
    auto segs =
        detail::integrate_atlas(m.surface(), init.x.chart, y0, 0.0, span, opt,
                                make_rhs, spatial_of, transition);
    const MetricField kk_m = kk_metric_field(kk);
    return detail::build_trajectory(kk_m, std::move(segs), StateLayout::full, n + 1,
                                    ParamKind::affine, character_band(opt));
}

// ---------------------------------------------------------------------------
// Projection Pi : P -> M (drop the fiber coordinate).

namespace detail {
class ProjectedCurve final : public DenseCurve {
  public:
    ProjectedCurve(std::shared_ptr<const DenseCurve> kk_curve, int base_dim)
        : base_(std::move(kk_curve)), n_(base_dim) {}
    WorldlineState state(double lam) const override {
        WorldlineState st = base_->state(lam);
        st.x.coords = Vec(st.x.coords.head(n_));
        st.v = Vec(st.v.head(n_));
        return st;
    }
    Vec coord_accel(double lam) const override {
        return base_->coord_accel(lam).head(n_);
    }
    double param_begin() const override { return base_->param_begin(); }
    double param_end() const override { return base_->param_end(); }

  private:
    std::shared_ptr<const DenseCurve> base_;
    int n_;
};
}  // namespace detail

inline Trajectory project(const KKBundle& kk, const Trajectory& gamma,
                          double char_band = 1e-9) {
    Trajectory out;
    out.param_kind = gamma.param_kind;
    out.dense = std::make_shared<detail::ProjectedCurve>(gamma.dense, kk.base->dim());
    for (auto& s : gamma.samples) {
        WorldlineState st = s;
        st.x.coords = Vec(st.x.coords.head(kk.base->dim()));
        st.v = Vec(st.v.head(kk.base->dim()));
        out.causal_record.push_back(
            causal_character(*kk.base, st.x, st.v, char_band));
        out.samples.push_back(std::move(st));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Fermat-type consistency report: among connecting candidates, the maximizer
// of I must be the extremizer of the arrival coordinate (exact arg agreement).

struct FermatReport {
    std::vector<double> action;
    std::vector<double> arrival;
    int argmax_action = -1;
    int arg_extremal_arrival = -1;
    bool consistent = false;
};

inline FermatReport verify_fermat(const KKBundle& kk,
                                  const std::vector<Trajectory>& candidates,
                                  double y0, double char_band = 1e-9) {
    if (candidates.empty())
        throw EmptyCandidateSet("verify_fermat: no candidate curves");
    FermatReport rep;
    const int sign = kk.ratio.value > 0 ? +1 : -1;
    for (const auto& sigma : candidates) {
        rep.action.push_back(
            action_I(*kk.base, kk.omega.get(), kk.ratio, sigma, char_band).value);
        rep.arrival.push_back(arrival_coordinate(kk, sigma, y0, sign, char_band));
    }
    rep.argmax_action =
        (int)(std::max_element(rep.action.begin(), rep.action.end()) -
              rep.action.begin());
    if (sign > 0)
        rep.arg_extremal_arrival =
            (int)(std::min_element(rep.arrival.begin(), rep.arrival.end()) -
                  rep.arrival.begin());
    else
        rep.arg_extremal_arrival =
            (int)(std::max_element(rep.arrival.begin(), rep.arrival.end()) -
                  rep.arrival.begin());
    rep.consistent = rep.argmax_action == rep.arg_extremal_arrival;
    return rep;
}

}  // namespace lfe
