#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <limits>
#include <thread>
#include <vector>

#include "lfe/errors.hpp"

namespace lfe {

// Spacetime dimensions stay tiny (<= 4 incl. the Kaluza-Klein fiber), so all
// vectors/matrices use bounded dynamic storage: runtime-sized, stack-allocated.
using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 6, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 6, 6>;
using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2d;
using Mat32 = Eigen::Matrix<double, 3, 2>;

// ODE state: position+velocity blocks, or a flattened deviation matrix.
using OdeVec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 40, 1>;

constexpr double kPi = 3.14159265358979323846;

inline double sqr(double x) { return x * x; }

// ---------------------------------------------------------------------------
// Quintic smoothstep 6u^5 - 15u^4 + 10u^3: C^2 with vanishing first and second
// derivatives at both edges of the band.

struct BlendValue {
    double s, ds, dds;  // value and derivatives w.r.t. the raw coordinate
};

// Normalized step on [0,1].
inline BlendValue smoothstep_quintic(double u) {
    if (u <= 0.0) return {0.0, 0.0, 0.0};
    if (u >= 1.0) return {1.0, 0.0, 0.0};
    const double u2 = u * u, u3 = u2 * u;
    return {u3 * (10.0 + u * (-15.0 + 6.0 * u)),
            30.0 * u2 * (1.0 + u * (-2.0 + u)),
            60.0 * u * (1.0 + u * (-3.0 + 2.0 * u))};
}

// Step over the band [center - half_width, center + half_width].
inline BlendValue blend_profile(double z, double center, double half_width) {
    const double w = 2.0 * half_width;
    BlendValue b = smoothstep_quintic((z - (center - half_width)) / w);
    b.ds /= w;
    b.dds /= (w * w);
    return b;
}

// ---------------------------------------------------------------------------
// Adaptive Gauss-Kronrod 7/15 quadrature. Error estimate per panel is the
// difference between the embedded Gauss-7 and Kronrod-15 results.

namespace detail {
// Kronrod-15 abscissae (positive half) and weights; Gauss-7 shares nodes 1,3,5,7.
inline constexpr double kGK15Node[8] = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144838258730, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr double kGK15WK[8] = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr double kGK15WG[4] = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};
}  // namespace detail

struct QuadResult {
    double value = 0.0;
    double error = 0.0;  // accumulated |K15 - G7| estimate
};

template <class F>
QuadResult gauss_kronrod_panel(F&& f, double a, double b) {
    const double c = 0.5 * (a + b), h = 0.5 * (b - a);
    double k = 0.0, g = 0.0;
    for (int i = 0; i < 8; ++i) {
        const double x = detail::kGK15Node[i] * h;
        const double fv = (i == 7) ? f(c) : f(c - x) + f(c + x);
        k += detail::kGK15WK[i] * fv;
        if (i % 2 == 1) g += detail::kGK15WG[i / 2] * fv;
    }
    return {k * h, std::abs(k - g) * h};
}

// Adaptive bisection until the summed error estimate meets abs/rel targets.
template <class F>
QuadResult integrate_adaptive(F&& f, double a, double b, double abs_tol = 1e-12,
                              double rel_tol = 1e-12, int max_panels = 4000) {
    struct Panel {
        double a, b, value, error;
    };
    QuadResult whole = gauss_kronrod_panel(f, a, b);
    std::vector<Panel> panels{{a, b, whole.value, whole.error}};
    auto total_err = [&panels] {
        double e = 0;
        for (auto& p : panels) e += p.error;
        return e;
    };
    auto total_val = [&panels] {
        double v = 0;
        for (auto& p : panels) v += p.value;
        return v;
    };
    while ((int)panels.size() < max_panels) {
        double err = total_err();
        if (err <= abs_tol + rel_tol * std::abs(total_val())) break;
        size_t worst = 0;
        for (size_t i = 1; i < panels.size(); ++i)
            if (panels[i].error > panels[worst].error) worst = i;
        Panel p = panels[worst];
        if (p.b - p.a < 1e-14 * (std::abs(a) + std::abs(b) + 1.0)) break;
        const double m = 0.5 * (p.a + p.b);
        QuadResult left = gauss_kronrod_panel(f, p.a, m);
        QuadResult right = gauss_kronrod_panel(f, m, p.b);
        panels[worst] = {p.a, m, left.value, left.error};
        panels.push_back({m, p.b, right.value, right.error});
    }
    return {total_val(), total_err()};
}

// ---------------------------------------------------------------------------
// Dormand-Prince 5(4) with the classical 4th-order continuous extension.

struct OdeOptions {
    double abs_tol = 1e-10;
    double rel_tol = 1e-10;
    double initial_step = 0.0;  // 0 => heuristic
    double max_step = std::numeric_limits<double>::infinity();
    long max_steps = 4'000'000;
};

// One accepted step's interpolation record.
struct OdeStep {
    double t0, h;
    OdeVec r1, r2, r3, r4, r5;
};

class DenseOde {
  public:
    std::vector<OdeStep> steps;
    double t_begin = 0, t_end = 0;
    OdeVec y_final;

    OdeVec eval(double t) const { return eval_impl(t, false); }
    // Derivative of the interpolant w.r.t. the integration parameter.
    OdeVec deriv(double t) const { return eval_impl(t, true); }

  private:
    const OdeStep& locate(double t) const {
        const bool fwd = t_end >= t_begin;
        size_t lo = 0, hi = steps.size();
        while (hi - lo > 1) {
            size_t mid = (lo + hi) / 2;
            const double edge = steps[mid].t0;
            if (fwd ? (t >= edge) : (t <= edge))
                lo = mid;
            else
                hi = mid;
        }
        return steps[lo];
    }
    OdeVec eval_impl(double t, bool want_deriv) const {
        const OdeStep& s = locate(t);
        const double th = (t - s.t0) / s.h;
        if (!want_deriv) {
            // P(th) = r1 + th*r2 + th(1-th)*r3 + th^2(1-th)*r4 + th^2(1-th)^2*r5
            return s.r1 + th * s.r2 + th * (1 - th) * s.r3 +
                   th * th * (1 - th) * s.r4 + sqr(th * (1 - th)) * s.r5;
        }
        OdeVec d = s.r2 + (1 - 2 * th) * s.r3 + th * (2 - 3 * th) * s.r4 +
                   2 * th * (1 - th) * (1 - 2 * th) * s.r5;
        return d / s.h;
    }
};

// Dense-output coefficients for the 5th-order Dormand-Prince pair.
namespace detail {
inline constexpr double kDP_D1 = -12715105075.0 / 11282082432.0;
inline constexpr double kDP_D3 = 87487479700.0 / 32700410799.0;
inline constexpr double kDP_D4 = -10690763975.0 / 1880347072.0;
inline constexpr double kDP_D5 = 701980252875.0 / 199316789632.0;
inline constexpr double kDP_D6 = -1453857185.0 / 822651844.0;
inline constexpr double kDP_D7 = 69997945.0 / 29380423.0;
}  // namespace detail

// Integrate y' = rhs(t, y) from t0 to t1 (t1 may be < t0). `stop` is checked
// after each accepted step; returning true truncates the integration there.
template <class RHS, class Stop>
DenseOde integrate_ode(RHS&& rhs, OdeVec y, double t0, double t1,
                       const OdeOptions& opt, Stop&& stop) {
    DenseOde out;
    out.t_begin = t0;
    out.t_end = t1;
    const double dir = (t1 >= t0) ? 1.0 : -1.0;
    const double span = std::abs(t1 - t0);
    if (span == 0.0) {
        out.y_final = y;
        out.t_end = t0;
        return out;
    }

    OdeVec k1 = rhs(t0, y), k2, k3, k4, k5, k6, k7;
    double h = opt.initial_step > 0 ? opt.initial_step : span / 100.0;
    h = std::min(h, opt.max_step);
    double t = t0;
    long n_steps = 0;

    while (dir * (t1 - t) > 0) {
        if (++n_steps > opt.max_steps)
            throw StepUnderflow("integrate_ode: step budget exhausted");
        h = std::min(h, std::abs(t1 - t));
        if (h < 1e-14 * (std::abs(t) + span))
            throw StepUnderflow("integrate_ode: step size underflow");
        const double hd = dir * h;

        OdeVec y2 = y + hd * (1.0 / 5) * k1;
        k2 = rhs(t + hd / 5, y2);
        OdeVec y3 = y + hd * ((3.0 / 40) * k1 + (9.0 / 40) * k2);
        k3 = rhs(t + hd * 3 / 10, y3);
        OdeVec y4 = y + hd * ((44.0 / 45) * k1 - (56.0 / 15) * k2 + (32.0 / 9) * k3);
        k4 = rhs(t + hd * 4 / 5, y4);
        OdeVec y5 = y + hd * ((19372.0 / 6561) * k1 - (25360.0 / 2187) * k2 +
                              (64448.0 / 6561) * k3 - (212.0 / 729) * k4);
        k5 = rhs(t + hd * 8 / 9, y5);
        OdeVec y6 = y + hd * ((9017.0 / 3168) * k1 - (355.0 / 33) * k2 +
                              (46732.0 / 5247) * k3 + (49.0 / 176) * k4 -
                              (5103.0 / 18656) * k5);
        k6 = rhs(t + hd, y6);
        OdeVec y7 = y + hd * ((35.0 / 384) * k1 + (500.0 / 1113) * k3 +
                              (125.0 / 192) * k4 - (2187.0 / 6784) * k5 +
                              (11.0 / 84) * k6);
        k7 = rhs(t + hd, y7);  // FSAL

        OdeVec err_v = hd * ((35.0 / 384 - 5179.0 / 57600) * k1 +
                             (500.0 / 1113 - 7571.0 / 16695) * k3 +
                             (125.0 / 192 - 393.0 / 640) * k4 +
                             (-2187.0 / 6784 + 92097.0 / 339200) * k5 +
                             (11.0 / 84 - 187.0 / 2100) * k6 - (1.0 / 40) * k7);
        double err = 0;
        for (int i = 0; i < y.size(); ++i) {
            const double sc =
                opt.abs_tol +
                opt.rel_tol * std::max(std::abs(y[i]), std::abs(y7[i]));
            err += sqr(err_v[i] / sc);
        }
        err = std::sqrt(err / y.size());

        if (err <= 1.0) {
            OdeStep st;
            st.t0 = t;
            st.h = hd;
            st.r1 = y;
            st.r2 = y7 - y;
            st.r3 = hd * k1 - st.r2;
            st.r4 = st.r2 - hd * k7 - st.r3;
            st.r5 = hd * (detail::kDP_D1 * k1 + detail::kDP_D3 * k3 +
                          detail::kDP_D4 * k4 + detail::kDP_D5 * k5 +
                          detail::kDP_D6 * k6 + detail::kDP_D7 * k7);
            out.steps.push_back(std::move(st));
            t += hd;
            y = y7;
            k1 = k7;
            if (stop(t, y)) break;
        }
        const double fac =
            std::clamp(0.9 * std::pow(std::max(err, 1e-10), -0.2), 0.2, 5.0);
        h = std::min(h * fac, opt.max_step);
    }
    out.t_end = t;
    out.y_final = y;
    return out;
}

template <class RHS>
DenseOde integrate_ode(RHS&& rhs, const OdeVec& y0, double t0, double t1,
                       const OdeOptions& opt) {
    return integrate_ode(std::forward<RHS>(rhs), y0, t0, t1, opt,
                         [](double, const OdeVec&) { return false; });
}

// ---------------------------------------------------------------------------
// Scalar root finding: bisection safeguarded by secant steps. f(a), f(b) must
// bracket a sign change.

template <class F>
double find_root(F&& f, double a, double b, double fa, double fb,
                 double x_tol = 1e-14) {
    if (fa == 0) return a;
    if (fb == 0) return b;
    if (fa * fb > 0) throw Error("find_root: endpoints do not bracket a root");
    for (int it = 0; it < 200 && std::abs(b - a) > x_tol * (1 + std::abs(a)); ++it) {
        double m = 0.5 * (a + b);
        if (std::abs(fb - fa) > 0) {
            const double s = a - fa * (b - a) / (fb - fa);
            if (s > std::min(a, b) && s < std::max(a, b)) m = s;
        }
        const double fm = f(m);
        if (fm == 0) return m;
        if (fa * fm < 0) {
            b = m;
            fb = fm;
        } else {
            a = m;
            fa = fm;
        }
    }
    return 0.5 * (a + b);
}

template <class F>
double find_root(F&& f, double a, double b, double x_tol = 1e-14) {
    return find_root(f, a, b, f(a), f(b), x_tol);
}

// ---------------------------------------------------------------------------
// Deterministic work distribution: results land in index order no matter how
// the workers are scheduled.

template <class Fn>
void parallel_for(int n, Fn&& fn, int max_threads = 0) {
    int hw = (int)std::thread::hardware_concurrency();
    int n_threads = std::max(1, max_threads > 0 ? max_threads : hw);
    n_threads = std::min(n_threads, n);
    if (n_threads <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    std::atomic<int> next{0};
    for (int w = 0; w < n_threads; ++w)
        pool.emplace_back([&] {
            for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
        });
    for (auto& th : pool) th.join();
}

}  // namespace lfe
