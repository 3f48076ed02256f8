#pragma once

#include <memory>
#include <vector>

#include "lfe/fields.hpp"

namespace lfe {

enum class ParamKind { affine, proper_time, cauchy_temporal };

struct WorldlineState {
    Event x;
    Vec v;          // d(coords)/d(param) in x.chart
    double param = 0;
};

// Continuous view of an integrated or constructed curve.
class DenseCurve {
  public:
    virtual ~DenseCurve() = default;
    virtual WorldlineState state(double lam) const = 0;
    // Second coordinate derivative d^2(coords)/d(param)^2 in the local chart.
    virtual Vec coord_accel(double lam) const = 0;
    virtual double param_begin() const = 0;
    virtual double param_end() const = 0;
};

struct Trajectory {
    std::vector<WorldlineState> samples;
    ParamKind param_kind = ParamKind::affine;
    std::vector<CausalCharacter> causal_record;
    std::shared_ptr<const DenseCurve> dense;

    double param_begin() const { return samples.front().param; }
    double param_end() const { return samples.back().param; }
    const WorldlineState& front() const { return samples.front(); }
    const WorldlineState& back() const { return samples.back(); }
    WorldlineState at(double lam) const { return dense->state(lam); }
};

// ---------------------------------------------------------------------------
// Dense curve backed by ODE segments (one chart per segment).

enum class StateLayout {
    full,     // y = [coords(n), velocity(n)], affine or proper-time parameter
    temporal  // y = [q(n-1), dq/dt(n-1)], parameter is the coordinate t
};

struct OdeSegment {
    int chart;
    double lam0, lam1;
    DenseOde ode;
};

class OdeSegmentsCurve final : public DenseCurve {
  public:
    OdeSegmentsCurve(std::vector<OdeSegment> segs, StateLayout layout, int dim)
        : segs_(std::move(segs)), layout_(layout), dim_(dim) {}

    double param_begin() const override { return segs_.front().lam0; }
    double param_end() const override { return segs_.back().lam1; }

    const std::vector<OdeSegment>& segments() const { return segs_; }

    WorldlineState state(double lam) const override {
        const OdeSegment& s = locate(lam);
        const OdeVec y = s.ode.eval(lam);
        WorldlineState out;
        out.param = lam;
        out.x.chart = s.chart;
        if (layout_ == StateLayout::full) {
            out.x.coords = y.head(dim_);
            out.v = y.tail(dim_);
        } else {
            out.x.coords = Vec(dim_);
            out.x.coords[0] = lam;
            out.x.coords.tail(dim_ - 1) = y.head(dim_ - 1);
            out.v = Vec(dim_);
            out.v[0] = 1.0;
            out.v.tail(dim_ - 1) = y.tail(dim_ - 1);
        }
        return out;
    }

    Vec coord_accel(double lam) const override {
        const OdeSegment& s = locate(lam);
        const OdeVec dy = s.ode.deriv(lam);
        if (layout_ == StateLayout::full) return dy.tail(dim_);
        Vec a = Vec::Zero(dim_);
        a.tail(dim_ - 1) = dy.tail(dim_ - 1);
        return a;
    }

  private:
    const OdeSegment& locate(double lam) const {
        const bool fwd = param_end() >= param_begin();
        size_t lo = 0;
        while (lo + 1 < segs_.size() &&
               (fwd ? lam >= segs_[lo + 1].lam0 : lam <= segs_[lo + 1].lam0))
            ++lo;
        return segs_[lo];
    }
    std::vector<OdeSegment> segs_;
    StateLayout layout_;
    int dim_;
};

// ---------------------------------------------------------------------------
// Hand-constructed curves (probe families, oracles).

class AnalyticCurve final : public DenseCurve {
  public:
    using PosFn = std::function<Event(double)>;
    using VelFn = std::function<Vec(double)>;

    AnalyticCurve(PosFn pos, VelFn vel, double lam0, double lam1,
                  VelFn accel = nullptr)
        : pos_(std::move(pos)),
          vel_(std::move(vel)),
          accel_(std::move(accel)),
          lam0_(lam0),
          lam1_(lam1) {}

    WorldlineState state(double lam) const override {
        return {pos_(lam), vel_(lam), lam};
    }
    Vec coord_accel(double lam) const override {
        if (accel_) return accel_(lam);
        const double h = 1e-6 * (1.0 + std::abs(lam));
        return (vel_(lam + h) - vel_(lam - h)) / (2 * h);
    }
    double param_begin() const override { return lam0_; }
    double param_end() const override { return lam1_; }

  private:
    PosFn pos_;
    VelFn vel_, accel_;
    double lam0_, lam1_;
};

// Wrap a dense curve as a sampled Trajectory (probe families, user curves).
inline Trajectory make_trajectory(const MetricField& m,
                                  std::shared_ptr<const DenseCurve> curve,
                                  int n_samples, ParamKind kind,
                                  double char_tol = 1e-9) {
    Trajectory t;
    t.dense = std::move(curve);
    t.param_kind = kind;
    const double a = t.dense->param_begin(), b = t.dense->param_end();
    for (int i = 0; i < n_samples; ++i) {
        const double lam = a + (b - a) * i / (n_samples - 1);
        WorldlineState st = t.dense->state(lam);
        t.causal_record.push_back(causal_character(m, st.x, st.v, char_tol));
        t.samples.push_back(std::move(st));
    }
    return t;
}

// ---------------------------------------------------------------------------
// Monotone reparametrization of a base curve. The map is defined by a rate
// r(lam) = d(new)/d(lam) > 0 and its derivative; inversion is Newton with a
// bracket over cached knots.

class ReparamCurve final : public DenseCurve {
  public:
    using RateFn = std::function<double(double)>;

    ReparamCurve(std::shared_ptr<const DenseCurve> base, RateFn rate, RateFn drate,
                 std::vector<double> knot_lam, std::vector<double> knot_s)
        : base_(std::move(base)),
          rate_(std::move(rate)),
          drate_(std::move(drate)),
          knot_lam_(std::move(knot_lam)),
          knot_s_(std::move(knot_s)) {}

    double param_begin() const override { return knot_s_.front(); }
    double param_end() const override { return knot_s_.back(); }

    // Requires increasing parameter along the base curve (all integrators and
    // probe constructors produce that).
    double lam_of(double s) const {
        size_t lo = 0, hi = knot_s_.size() - 1;
        while (hi - lo > 1) {
            size_t mid = (lo + hi) / 2;
            (knot_s_[mid] <= s ? lo : hi) = mid;
        }
        double a = knot_lam_[lo], b = knot_lam_[lo + 1];
        const double span_s = knot_s_[lo + 1] - knot_s_[lo];
        double lam =
            a + (b - a) * std::clamp((s - knot_s_[lo]) / span_s, 0.0, 1.0);
        for (int it = 0; it < 60; ++it) {
            const double f = seg_s(lo, lam) - s;
            if (std::abs(f) < 1e-13 * (1 + std::abs(s))) break;
            (f > 0 ? b : a) = lam;
            double next = lam - f / rate_(lam);
            if (!(next > a && next < b)) next = 0.5 * (a + b);
            lam = next;
        }
        return lam;
    }

    WorldlineState state(double s) const override {
        const double lam = lam_of(s);
        WorldlineState st = base_->state(lam);
        st.v /= rate_(lam);
        st.param = s;
        return st;
    }

    Vec coord_accel(double s) const override {
        const double lam = lam_of(s);
        const double r = rate_(lam), dr = drate_(lam);
        const WorldlineState st = base_->state(lam);
        const Vec a = base_->coord_accel(lam);
        // x'' in s = (a - x' * dr/r) / r^2 with x' the base-parameter velocity
        return (a - st.v * (dr / r)) / (r * r);
    }

  private:
    // new-parameter value at lam inside knot interval [lo, lo+1]
    double seg_s(size_t lo, double lam) const {
        const double a = knot_lam_[lo];
        const QuadResult q = gauss_kronrod_panel(rate_, a, lam);
        return knot_s_[lo] + q.value;
    }

    std::shared_ptr<const DenseCurve> base_;
    RateFn rate_, drate_;
    std::vector<double> knot_lam_, knot_s_;
};

}  // namespace lfe
