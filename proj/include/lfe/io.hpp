#pragma once

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "lfe/scenarios.hpp"

namespace lfe::io {

using json = nlohmann::ordered_json;

inline std::string format17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

inline json event_json(const ScenarioSpec& sc, const Event& e) {
    json j;
    j["chart"] = sc.surface->chart(e.chart).name();
    j["coords"] = json::array();
    for (int i = 0; i < e.coords.size(); ++i) j["coords"].push_back(e.coords[i]);
    return j;
}

// Trajectory CSV: param, coords..., velocity..., g(v,v); 17 significant digits.
inline void write_trajectory_csv(const std::filesystem::path& path,
                                 const ScenarioSpec& sc, const Trajectory& traj) {
    std::ofstream out(path);
    const int n = (int)traj.samples.front().x.coords.size();
    out << "param,chart";
    for (int i = 0; i < n; ++i) out << ",x" << i;
    for (int i = 0; i < n; ++i) out << ",v" << i;
    out << ",g_vv\n";
    for (size_t k = 0; k < traj.samples.size(); ++k) {
        const WorldlineState& s = traj.samples[k];
        out << format17(s.param) << ',' << sc.surface->chart(s.x.chart).name();
        for (int i = 0; i < n; ++i) out << ',' << format17(s.x.coords[i]);
        for (int i = 0; i < n; ++i) out << ',' << format17(s.v[i]);
        out << ',' << format17(traj.causal_record[k].g_vv) << '\n';
    }
}

// Bundle-trajectory CSV with the fiber coordinate, fiber velocity and the
// Noether charge as extra columns.
inline void write_kk_trajectory_csv(const std::filesystem::path& path,
                                    const ScenarioSpec& sc, const KKBundle& kk,
                                    const Trajectory& traj) {
    std::ofstream out(path);
    out << "param,chart,t,q1,q2,y,vt,vq1,vq2,vy,nu,gkk_vv\n";
    for (size_t k = 0; k < traj.samples.size(); ++k) {
        const WorldlineState& s = traj.samples[k];
        out << format17(s.param) << ',' << sc.surface->chart(s.x.chart).name();
        for (int i = 0; i < 4; ++i) out << ',' << format17(s.x.coords[i]);
        for (int i = 0; i < 4; ++i) out << ',' << format17(s.v[i]);
        KKState st{s.x, s.v};
        out << ',' << format17(noether_nu(kk, st)) << ','
            << format17(traj.causal_record[k].g_vv) << '\n';
    }
}

inline json result_json(const ScenarioSpec& sc, const ConnectionProblem& pb,
                        const ConnectionResult& res,
                        const std::string& trajectory_ref) {
    json j;
    j["problem"] = {{"scenario", sc.name},
                    {"x0", event_json(sc, pb.x0)},
                    {"x1", event_json(sc, pb.x1)},
                    {"ratio", pb.ratio.value},
                    {"method", pb.method == Method::direct ? "direct" : "kk"},
                    {"endpoint_tol", pb.tol.endpoint_tol},
                    {"integrator_tol", pb.tol.integrator_tol}};
    j["converged"] = res.converged;
    j["residual"] = res.endpoint_residual;
    j["iterations"] = res.iterations;
    j["action"] = res.action_valid
                      ? json{{"value", res.action.value},
                             {"error", res.action.quadrature_error_estimate}}
                      : json(nullptr);
    j["nu"] = std::isnan(res.nu) ? json(nullptr) : json(res.nu);
    j["winding"] = res.winding ? json(*res.winding) : json(nullptr);
    j["conjugate_param"] =
        res.first_conjugate ? json(*res.first_conjugate) : json(nullptr);
    j["lightlike"] = res.lightlike_flagged;
    j["lfe_residual"] =
        std::isnan(res.lfe_resid) ? json(nullptr) : json(res.lfe_resid);
    if (res.converged) {
        const Trajectory& t = res.trajectory;
        j["trajectory"] = {
            {"param_kind", t.param_kind == ParamKind::proper_time ? "proper_time"
                           : t.param_kind == ParamKind::cauchy_temporal
                               ? "cauchy_temporal"
                               : "affine"},
            {"param_begin", t.param_begin()},
            {"param_end", t.param_end()},
            {"samples", t.samples.size()}};
    }
    j["trajectory_ref"] = trajectory_ref;
    return j;
}

}  // namespace lfe::io
