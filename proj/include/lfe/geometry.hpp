#pragma once

#include <functional>
#include <memory>

#include "lfe/surface.hpp"

namespace lfe {

// Spacetime point: chart id plus coordinates. In product charts coords[0] is
// the Cauchy temporal coordinate t and the remainder are surface coordinates.
struct Event {
    int chart = 0;
    Vec coords;

    double t() const { return coords[0]; }
    Vec2 spatial() const { return Vec2(coords[1], coords[2]); }
    static Event product(int chart, double t, const Vec2& q) {
        Event e;
        e.chart = chart;
        e.coords = Vec(3);
        e.coords << t, q[0], q[1];
        return e;
    }
};

struct TangentVector {
    Event base;
    Vec components;
};

inline bool same_base(const Event& a, const Event& b, double tol = 1e-9) {
    return a.chart == b.chart && a.coords.size() == b.coords.size() &&
           (a.coords - b.coords).norm() <= tol * (1.0 + a.coords.norm());
}

// Christoffel symbols at a point, Gamma^k_{ij}; dimensions stay <= 4.
struct Christoffels {
    int n = 0;
    double c[4][4][4] = {};
    double operator()(int k, int i, int j) const { return c[k][i][j]; }
    double& at(int k, int i, int j) { return c[k][i][j]; }

    // Gamma^k_{ij} u^i v^j contracted into a vector.
    Vec contract(const Vec& u, const Vec& v) const {
        Vec out = Vec::Zero(n);
        for (int k = 0; k < n; ++k) {
            double s = 0;
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) s += c[k][i][j] * u[i] * v[j];
            out[k] = s;
        }
        return out;
    }
};

enum class ChristoffelMode { analytic, finite_difference };

// Chart-based pseudo-Riemannian metric, signature (+,-,...,-). Catalog
// spacetimes are products dt^2 - dl^2 over a SurfacePatchwork and carry
// analytic Christoffels; user metrics fall back to central differences.
class MetricField {
  public:
    static MetricField product(std::shared_ptr<const SurfacePatchwork> surf) {
        MetricField m;
        m.dim_ = 3;
        m.surface_ = std::move(surf);
        m.mode_ = ChristoffelMode::analytic;
        return m;
    }

    static MetricField from_function(int dim, std::function<Mat(const Event&)> g,
                                     double fd_step = 1e-5) {
        MetricField m;
        m.dim_ = dim;
        m.g_eval_ = std::move(g);
        m.mode_ = ChristoffelMode::finite_difference;
        m.fd_step_ = fd_step;
        return m;
    }

    int dim() const { return dim_; }
    ChristoffelMode christoffel_mode() const { return mode_; }
    double fd_step() const { return fd_step_; }
    const SurfacePatchwork* surface() const { return surface_.get(); }
    std::shared_ptr<const SurfacePatchwork> surface_ptr() const { return surface_; }

    Mat metric_eval(const Event& x) const {
        if (surface_) {
            const Vec2 q = x.spatial();
            if (!surface_->chart(x.chart).in_domain(q))
                throw OutOfChart("metric_eval: point outside chart domain");
            const Mat2 gs = surface_->induced_metric(x.chart, q);
            Mat g = Mat::Zero(3, 3);
            g(0, 0) = 1.0;
            g.block<2, 2>(1, 1) = -gs;
            return g;
        }
        return g_eval_(x);
    }

    Christoffels christoffel(const Event& x) const {
        if (mode_ == ChristoffelMode::finite_difference || !surface_)
            return christoffel_fd(x);
        const Vec2 q = x.spatial();
        if (!surface_->chart(x.chart).in_domain(q))
            throw OutOfChart("christoffel: point outside chart domain");
        // product structure: every component with a t index vanishes, and the
        // spatial block equals the surface Christoffels (sign-flip invariant).
        const auto gs = surface_->christoffel(x.chart, q);
        Christoffels out;
        out.n = 3;
        for (int c = 0; c < 2; ++c)
            for (int a = 0; a < 2; ++a)
                for (int b = 0; b < 2; ++b) out.at(c + 1, a + 1, b + 1) = gs[c](a, b);
        return out;
    }

    // Central-difference Christoffels from metric_eval; the cross-check path.
    Christoffels christoffel_fd(const Event& x) const {
        const int n = dim_;
        const double h = fd_step_;
        const Mat g0 = metric_eval(x);
        // dg[l](i,j) = d_l g_ij
        std::vector<Mat> dg(n);
        for (int l = 0; l < n; ++l) {
            Event xp = x, xm = x;
            xp.coords[l] += h;
            xm.coords[l] -= h;
            dg[l] = (metric_eval(xp) - metric_eval(xm)) / (2 * h);
        }
        Eigen::FullPivLU<Mat> lu(g0);
        const double scale = g0.cwiseAbs().maxCoeff();
        lu.setThreshold(1e-12);
        if (!lu.isInvertible() || scale == 0.0)
            throw SingularMetric("christoffel: metric not invertible");
        const Mat ginv = lu.inverse();
        Christoffels out;
        out.n = n;
        for (int k = 0; k < n; ++k)
            for (int i = 0; i < n; ++i)
                for (int j = i; j < n; ++j) {
                    double s = 0;
                    for (int l = 0; l < n; ++l)
                        s += ginv(k, l) * (dg[i](l, j) + dg[j](l, i) - dg[l](i, j));
                    out.at(k, i, j) = 0.5 * s;
                    out.at(k, j, i) = 0.5 * s;
                }
        return out;
    }

  private:
    int dim_ = 3;
    std::shared_ptr<const SurfacePatchwork> surface_;
    std::function<Mat(const Event&)> g_eval_;
    ChristoffelMode mode_ = ChristoffelMode::analytic;
    double fd_step_ = 1e-5;
};

inline Mat metric_eval(const MetricField& m, const Event& x) {
    return m.metric_eval(x);
}
inline Christoffels christoffel(const MetricField& m, const Event& x) {
    return m.christoffel(x);
}

inline double inner(const MetricField& m, const Event& x, const TangentVector& u,
                    const TangentVector& v) {
    if (!same_base(u.base, x) || !same_base(v.base, x))
        throw BaseMismatch("inner: vectors not based at the evaluation point");
    return u.components.dot(m.metric_eval(x) * v.components);
}

enum class CausalKind { timelike, lightlike, spacelike };

struct CausalCharacter {
    CausalKind kind;
    bool future;  // meaningful for non-spacelike vectors in product charts
    double g_vv;
};

inline CausalCharacter causal_character(const MetricField& m, const Event& x,
                                        const Vec& v, double tol) {
    if (v.norm() == 0.0) throw ZeroVector("causal_character: zero vector");
    const double q = v.dot(m.metric_eval(x) * v);
    CausalCharacter out;
    out.g_vv = q;
    out.kind = (q > tol) ? CausalKind::timelike
                         : (q >= -tol ? CausalKind::lightlike : CausalKind::spacelike);
    out.future = v[0] > 0;
    return out;
}

inline Mat2 induced_surface_metric(const SurfacePatchwork& s, int chart,
                                   const Vec2& q) {
    if (!s.chart(chart).in_domain(q))
        throw OutOfChart("induced_surface_metric: point outside chart domain");
    return s.induced_metric(chart, q);
}

// Auxiliary Euclidean norm of a spacetime tangent: (dt, embedded spatial part).
// Chart-independent; used for residuals and deduplication.
inline double aux_euclidean_norm(const MetricField& m, const Event& x, const Vec& v) {
    if (const SurfacePatchwork* s = m.surface()) {
        const EmbedDerivs d = s->chart(x.chart).embed(x.spatial());
        const Vec3 V = d.J * Vec2(v[1], v[2]);
        return std::sqrt(sqr(v[0]) + V.squaredNorm());
    }
    return v.norm();
}

}  // namespace lfe
