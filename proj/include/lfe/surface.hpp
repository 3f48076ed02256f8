#pragma once

#include <memory>
#include <utility>
#include <vector>

#include "lfe/chart.hpp"

namespace lfe {

// Atlas of overlapping charts covering one embedded surface. Immutable after
// construction; all queries are pure.
class SurfacePatchwork {
  public:
    int add_chart(std::unique_ptr<SurfaceChart> c) {
        c->id = (int)charts_.size();
        charts_.push_back(std::move(c));
        return charts_.back()->id;
    }
    const SurfaceChart& chart(int id) const { return *charts_.at(id); }
    int n_charts() const { return (int)charts_.size(); }

    int find_chart(const std::string& name) const {
        for (auto& c : charts_)
            if (c->name() == name) return c->id;
        throw ConfigError("unknown chart: " + name);
    }

    // Integration-enabled chart with the largest comfort at an embedded point.
    int pick_chart(const Vec3& p) const {
        int best = -1;
        double best_comfort = -1e300;
        for (auto& c : charts_) {
            if (!c->integration_enabled()) continue;
            auto q = c->from_r3(p, nullptr);
            if (!q || !c->in_domain(*q)) continue;
            const double m = c->comfort(*q);
            if (m > best_comfort) {
                best_comfort = m;
                best = c->id;
            }
        }
        if (best < 0)
            throw LeftChartAtlas("point left the chart atlas", p[0], p[1], p[2]);
        return best;
    }

    Vec2 transition_point(int from, const Vec2& q, int to,
                          const Vec2* hint = nullptr) const {
        if (from == to) return q;
        const Vec3 p = chart(from).embed(q).E;
        auto out = chart(to).from_r3(p, hint);
        if (!out)
            throw OutOfChart("transition: point not representable in chart " +
                             chart(to).name());
        return *out;
    }

    // Transport a (point, velocity) pair between charts. The velocity moves
    // through the shared tangent plane in R^3, so the map is exact.
    std::pair<Vec2, Vec2> transition_state(int from, const Vec2& q, const Vec2& vel,
                                           int to, const Vec2* hint = nullptr) const {
        if (from == to) return {q, vel};
        const EmbedDerivs da = chart(from).embed(q);
        auto qb = chart(to).from_r3(da.E, hint);
        if (!qb)
            throw OutOfChart("transition: point not representable in chart " +
                             chart(to).name());
        const EmbedDerivs db = chart(to).embed(*qb);
        const Vec3 V = da.J * vel;
        const Mat2 gram = db.J.transpose() * db.J;
        const Vec2 vb = gram.ldlt().solve(db.J.transpose() * V);
        return {*qb, vb};
    }

    // Pullback of the Euclidean metric: positive definite 2x2.
    Mat2 induced_metric(int chart_id, const Vec2& q) const {
        const EmbedDerivs d = chart(chart_id).embed(q);
        return d.J.transpose() * d.J;
    }

    // Christoffels of the induced metric from the Gauss formula:
    // Gamma^c_{ab} = g^{cd} <J_d, d_a d_b E>. Exact given analytic embeddings.
    std::array<Mat2, 2> christoffel(int chart_id, const Vec2& q) const {
        const EmbedDerivs d = chart(chart_id).embed(q);
        const Mat2 g = d.J.transpose() * d.J;
        const Eigen::LDLT<Mat2> solver(g);
        Eigen::Matrix<double, 2, 3> rhs;  // columns: H00, H01, H11 projected
        rhs.col(0) = d.J.transpose() * d.H00;
        rhs.col(1) = d.J.transpose() * d.H01;
        rhs.col(2) = d.J.transpose() * d.H11;
        const Eigen::Matrix<double, 2, 3> gam = solver.solve(rhs);
        std::array<Mat2, 2> out;
        for (int c = 0; c < 2; ++c) {
            out[c](0, 0) = gam(c, 0);
            out[c](0, 1) = out[c](1, 0) = gam(c, 1);
            out[c](1, 1) = gam(c, 2);
        }
        return out;
    }

  private:
    std::vector<std::unique_ptr<SurfaceChart>> charts_;
};

}  // namespace lfe
