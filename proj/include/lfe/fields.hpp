#pragma once

#include <map>
#include <utility>

#include "lfe/geometry.hpp"

namespace lfe {

// Only q/m enters the Lorentz force equation; q and m separately never appear.
struct ChargeRatio {
    double value = 0.0;
};

// Electromagnetic potential 1-form. Catalog potentials supply analytic
// component derivatives; otherwise d(omega) falls back to central differences.
class EMPotential {
  public:
    using Components = std::function<Vec(const Event&)>;
    using ComponentDerivs = std::function<Mat(const Event&)>;  // D(i,j) = d_i w_j

    EMPotential(Components comps, ComponentDerivs derivs = nullptr,
                double fd_step = 1e-5)
        : comps_(std::move(comps)), derivs_(std::move(derivs)), fd_step_(fd_step) {}

    Vec components(const Event& x) const { return comps_(x); }

    Mat component_derivs(const Event& x) const {
        if (derivs_) return derivs_(x);
        const int n = (int)x.coords.size();
        Mat d(n, n);
        for (int i = 0; i < n; ++i) {
            Event xp = x, xm = x;
            xp.coords[i] += fd_step_;
            xm.coords[i] -= fd_step_;
            d.row(i) = ((comps_(xp) - comps_(xm)) / (2 * fd_step_)).transpose();
        }
        return d;
    }

    double eval(const Event& x, const Vec& v) const { return comps_(x).dot(v); }

  private:
    Components comps_;
    ComponentDerivs derivs_;
    double fd_step_;
};

inline double potential_eval(const EMPotential& w, const Event& x,
                             const TangentVector& v) {
    if (!same_base(v.base, x))
        throw BaseMismatch("potential_eval: vector not based at x");
    return w.eval(x, v.components);
}

// Electromagnetic 2-form F. Either exact (F = d omega) or given directly
// (non-exact case; the action functional refuses such fields).
class EMField {
  public:
    enum class Origin { exact, direct };

    static EMField exact(std::shared_ptr<const EMPotential> omega) {
        EMField f;
        f.origin_ = Origin::exact;
        f.omega_ = std::move(omega);
        return f;
    }
    static EMField direct(std::function<Mat(const Event&)> f_comps) {
        EMField f;
        f.origin_ = Origin::direct;
        f.direct_ = std::move(f_comps);
        return f;
    }

    Origin origin() const { return origin_; }
    const EMPotential* potential() const { return omega_.get(); }

    // F_{ij}, antisymmetric by construction.
    Mat components(const Event& x) const {
        if (origin_ == Origin::exact) {
            const Mat d = omega_->component_derivs(x);
            return d - d.transpose();
        }
        return direct_(x);
    }

    double eval(const Event& x, const Vec& u, const Vec& v) const {
        return u.dot(components(x) * v);
    }

  private:
    Origin origin_ = Origin::exact;
    std::shared_ptr<const EMPotential> omega_;
    std::function<Mat(const Event&)> direct_;
};

inline double field_eval(const EMField& f, const Event& x, const TangentVector& u,
                         const TangentVector& v) {
    if (!same_base(u.base, x) || !same_base(v.base, x))
        throw BaseMismatch("field_eval: vectors not based at x");
    return f.eval(x, u.components, v.components);
}

// Index-raised endomorphism: g(v, Fhat w) = F(v, w), i.e. Fhat = g^{-1} F.
inline Mat raise_field(const MetricField& m, const EMField& f, const Event& x) {
    const Mat g = m.metric_eval(x);
    Eigen::FullPivLU<Mat> lu(g);
    lu.setThreshold(1e-12);
    if (!lu.isInvertible())
        throw SingularMetric("raise_field: metric not invertible");
    return lu.solve(f.components(x));
}

// ---------------------------------------------------------------------------
// Closed oriented triangle meshes on a surface and the flux of F through them.

struct SurfacePoint {
    int chart;
    Vec2 q;
};

struct SurfaceMesh {
    std::vector<SurfacePoint> verts;
    std::vector<std::array<int, 3>> tris;
};

namespace detail {
inline void require_closed(const SurfaceMesh& mesh) {
    std::map<std::pair<int, int>, int> edges;
    for (auto& t : mesh.tris)
        for (int e = 0; e < 3; ++e) edges[{t[e], t[(e + 1) % 3]}]++;
    for (auto& [edge, count] : edges) {
        auto rev = edges.find({edge.second, edge.first});
        if (count != 1 || rev == edges.end() || rev->second != 1)
            throw OpenMesh("flux_integral: mesh is not closed and oriented");
    }
}

// Chart of one of the listed vertices able to represent them all.
inline int common_chart(const SurfacePatchwork& s,
                        const std::vector<const SurfacePoint*>& pts) {
    for (const SurfacePoint* candidate : pts) {
        bool ok = true;
        for (const SurfacePoint* p : pts) {
            if (p->chart == candidate->chart) continue;
            const Vec3 r3 = s.chart(p->chart).embed(p->q).E;
            if (!s.chart(candidate->chart).from_r3(r3, nullptr)) {
                ok = false;
                break;
            }
        }
        if (ok) return candidate->chart;
    }
    throw OutOfChart("mesh: no common chart for a triangle");
}

inline SurfaceMesh refine(const SurfacePatchwork& s, const SurfaceMesh& mesh) {
    SurfaceMesh out;
    out.verts = mesh.verts;
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
        auto key = std::minmax(a, b);
        auto it = midpoint.find(key);
        if (it != midpoint.end()) return it->second;
        const int chart = common_chart(s, {&mesh.verts[a], &mesh.verts[b]});
        const Vec2 qa =
            s.transition_point(mesh.verts[a].chart, mesh.verts[a].q, chart);
        const Vec2 qb = s.transition_point(mesh.verts[b].chart, mesh.verts[b].q,
                                           chart, &qa);
        SurfacePoint m{chart, 0.5 * (qa + qb)};
        // keep midpoints in a comfortable chart
        if (s.chart(m.chart).comfort(m.q) < 0) {
            const Vec3 p = s.chart(m.chart).embed(m.q).E;
            const int better = s.pick_chart(p);
            m.q = s.transition_point(m.chart, m.q, better, nullptr);
            m.chart = better;
        }
        out.verts.push_back(m);
        int id = (int)out.verts.size() - 1;
        midpoint[key] = id;
        return id;
    };
    for (auto& t : mesh.tris) {
        const int ab = mid(t[0], t[1]), bc = mid(t[1], t[2]), ca = mid(t[2], t[0]);
        out.tris.push_back({t[0], ab, ca});
        out.tris.push_back({ab, t[1], bc});
        out.tris.push_back({ca, bc, t[2]});
        out.tris.push_back({ab, bc, ca});
    }
    return out;
}

inline double flux_once(const EMField& f, const SurfacePatchwork& s,
                        const SurfaceMesh& mesh) {
    double total = 0;
    for (auto& t : mesh.tris) {
        const int chart = common_chart(
            s, {&mesh.verts[t[0]], &mesh.verts[t[1]], &mesh.verts[t[2]]});
        const Vec2 qa =
            s.transition_point(mesh.verts[t[0]].chart, mesh.verts[t[0]].q, chart);
        const Vec2 qb = s.transition_point(mesh.verts[t[1]].chart,
                                           mesh.verts[t[1]].q, chart, &qa);
        const Vec2 qc = s.transition_point(mesh.verts[t[2]].chart,
                                           mesh.verts[t[2]].q, chart, &qa);
        const Vec2 centroid = (qa + qb + qc) / 3.0;
        const Event x = Event::product(chart, 0.0, centroid);
        const Mat F = f.components(x);
        Vec e1 = Vec::Zero(3), e2 = Vec::Zero(3);
        e1.segment<2>(1) = qb - qa;
        e2.segment<2>(1) = qc - qa;
        total += 0.5 * e1.dot(F * e2);
    }
    return total;
}
}  // namespace detail

// Midpoint-rule flux with 4-way refinement until two successive levels agree
// to 1e-3 relative.
inline double flux_integral(const EMField& f, const SurfacePatchwork& s,
                            const SurfaceMesh& mesh, int max_refine = 6) {
    detail::require_closed(mesh);
    SurfaceMesh current = mesh;
    double prev = detail::flux_once(f, s, current);
    for (int k = 0; k < max_refine; ++k) {
        current = detail::refine(s, current);
        const double next = detail::flux_once(f, s, current);
        if (std::abs(next - prev) <= 1e-3 * std::max(std::abs(next), 1e-9))
            return next;
        prev = next;
    }
    return prev;
}

}  // namespace lfe
