// Batch front door: solve connection problems, run catalog verifications,
// sweep parameters; JSON results, CSV tables.

#include <CLI11.hpp>

#include <chrono>
#include <iostream>

#include "lfe/io.hpp"
#include "lfe/verify.hpp"

using namespace lfe;
using io::json;

namespace {

struct RunConfig {
    std::string scenario;
    std::string scenario_file;
    std::string command;
    double ratio = 1.0;
    std::string method = "direct";
    std::string target = "marked";
    double tol = 1e-10;
    double endpoint_tol = 1e-8;
    int grid_dir = 12, grid_mag = 6;
    std::string out_dir;
    uint64_t seed = 0;
    std::string ratios;  // sweep: "a,b,c" or "lo:hi:n"
    std::string alphas;  // sweep: degrees list
    bool direction_grid = false;
};

std::string now_timestamp() {
    const auto t = std::chrono::system_clock::to_time_t(
        std::chrono::system_clock::now());
    char buf[64];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

std::vector<double> parse_list(const std::string& text) {
    std::vector<double> out;
    if (text.empty()) return out;
    const auto colon = text.find(':');
    if (colon != std::string::npos) {  // lo:hi:n
        const auto colon2 = text.find(':', colon + 1);
        if (colon2 == std::string::npos)
            throw ConfigError("range must be lo:hi:n");
        const double lo = std::stod(text.substr(0, colon));
        const double hi = std::stod(text.substr(colon + 1, colon2 - colon - 1));
        const int n = std::stoi(text.substr(colon2 + 1));
        for (int i = 0; i < n; ++i)
            out.push_back(n == 1 ? lo : lo + (hi - lo) * i / (n - 1));
        return out;
    }
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
    return out;
}

ScenarioSpec load_scenario(const RunConfig& cfg) {
    if (!cfg.scenario_file.empty()) {
        std::ifstream in(cfg.scenario_file);
        if (!in) throw ConfigError("cannot open " + cfg.scenario_file);
        json j = json::parse(in);
        std::map<std::string, double> params;
        if (j.contains("parameters"))
            for (auto& [k, v] : j["parameters"].items())
                params[k] = v.get<double>();
        ScenarioSpec sc = scenario_by_name(j.at("name").get<std::string>(), params);
        if (j.contains("events")) {
            auto read_event = [&](const json& je) {
                Event e;
                e.chart = sc.surface->find_chart(je.at("chart").get<std::string>());
                const auto& c = je.at("coords");
                e.coords = Vec((int)c.size());
                for (size_t i = 0; i < c.size(); ++i)
                    e.coords[(int)i] = c[i].get<double>();
                return e;
            };
            if (j["events"].contains("x0")) sc.x0 = read_event(j["events"]["x0"]);
            if (j["events"].contains("x1")) sc.x1 = read_event(j["events"]["x1"]);
        }
        return sc;
    }
    if (cfg.scenario.empty())
        throw ConfigError("missing --scenario or --scenario-file");
    return scenario_by_name(cfg.scenario);
}

void apply_target(const RunConfig& cfg, const ScenarioSpec& sc,
                  ConnectionProblem& pb) {
    if (cfg.target == "marked" || cfg.target == "antipodal") return;
    // "t,q1,q2" or "t,q1,q2@chart"
    std::string spec = cfg.target;
    int chart = pb.x1.chart;
    const auto at = spec.find('@');
    if (at != std::string::npos) {
        chart = sc.surface->find_chart(spec.substr(at + 1));
        spec = spec.substr(0, at);
    }
    const std::vector<double> c = parse_list(spec);
    if (c.size() != 3) throw ConfigError("--target expects t,q1,q2[@chart]");
    pb.x1 = Event::product(chart, c[0], Vec2(c[1], c[2]));
}

int cmd_solve(const RunConfig& cfg) {
    const ScenarioSpec sc = load_scenario(cfg);
    const Method method = cfg.method == "kk" ? Method::kk_fermat : Method::direct;
    SolverTolerances tol;
    tol.integrator_tol = cfg.tol;
    tol.endpoint_tol = cfg.endpoint_tol;
    ConnectionProblem pb = sc.problem({cfg.ratio}, method, tol);
    apply_target(cfg, sc, pb);

    ConnectionResult res;
    if (method == Method::direct) {
        res = shoot_direct(pb);
    } else {
        res = shoot_kk_fermat(pb, default_kk_guess(pb));
        if (!res.converged) {  // modest fallback grid before giving up
            GridSpec grid;
            grid.n_dir = cfg.grid_dir;
            grid.n_mag = cfg.grid_mag;
            grid.seed = cfg.seed;
            MultistartReport rep = multistart(pb, grid);
            if (rep.selected) res = rep.results[*rep.selected];
        }
    }

    std::string traj_ref;
    if (!cfg.out_dir.empty() && res.converged) {
        std::filesystem::create_directories(cfg.out_dir);
        traj_ref = "trajectory.csv";
        io::write_trajectory_csv(std::filesystem::path(cfg.out_dir) / traj_ref,
                                 sc, res.trajectory);
        if (res.kk_trajectory) {
            KKBundle kk(sc.metric.get(), sc.potential, pb.ratio);
            io::write_kk_trajectory_csv(
                std::filesystem::path(cfg.out_dir) / "trajectory_kk.csv", sc, kk,
                *res.kk_trajectory);
        }
    }
    json j = io::result_json(sc, pb, res, traj_ref);
    j["meta"] = {{"seed", cfg.seed}, {"timestamp", now_timestamp()}};
    if (!cfg.out_dir.empty()) {
        std::ofstream out(std::filesystem::path(cfg.out_dir) / "result.json");
        out << j.dump(2) << '\n';
    }
    std::cout << j.dump(2) << '\n';
    return res.converged ? 0 : 2;
}

int cmd_verify(const RunConfig& cfg) {
    const ScenarioSpec sc = load_scenario(cfg);
    VerifyOptions vo;
    vo.seed = cfg.seed;
    const std::vector<CheckResult> checks = verify_scenario(sc, vo);

    bool all = true;
    json jchecks = json::array();
    for (const auto& c : checks) {
        all = all && c.pass;
        jchecks.push_back({{"name", c.name},
                           {"pass", c.pass},
                           {"measured", c.measured},
                           {"expected", c.expected},
                           {"tolerance", c.tolerance},
                           {"note", c.note}});
        std::fprintf(stderr, "%-34s %s  measured=%.6g\n", c.name.c_str(),
                     c.pass ? "PASS" : "FAIL", c.measured);
    }
    json j = {{"scenario", sc.name},
              {"seed", cfg.seed},
              {"pass", all},
              {"checks", jchecks},
              {"timestamp", now_timestamp()}};
    if (!cfg.out_dir.empty()) {
        std::filesystem::create_directories(cfg.out_dir);
        std::ofstream out(std::filesystem::path(cfg.out_dir) /
                          ("verify_" + sc.name + ".json"));
        out << j.dump(2) << '\n';
    }
    std::cout << j.dump(2) << '\n';
    return all ? 0 : 1;
}

int cmd_sweep(const RunConfig& cfg) {
    const ScenarioSpec sc = load_scenario(cfg);
    const Method method = cfg.method == "kk" ? Method::kk_fermat : Method::direct;
    SolverTolerances tol;
    tol.integrator_tol = cfg.tol;
    tol.endpoint_tol = cfg.endpoint_tol;

    std::ostringstream csv;
    auto opt_str = [](const std::optional<int>& v) {
        return v ? std::to_string(*v) : std::string("");
    };
    auto num = [](double v) { return io::format17(v); };

    if (!cfg.ratios.empty()) {
        const std::vector<double> ratios = parse_list(cfg.ratios);
        if (ratios.empty()) throw ConfigError("empty ratio range");
        ConnectionProblem pb = sc.problem({ratios.front()}, method, tol);
        apply_target(cfg, sc, pb);
        auto entries = ratio_continuation(pb, ratios);
        csv << "ratio,converged,residual,action,nu,winding,conjugate_param,iterations\n";
        for (auto& e : entries) {
            const ConnectionResult& r = e.result;
            csv << num(e.ratio) << ',' << (r.converged ? 1 : 0) << ','
                << num(r.endpoint_residual) << ','
                << (r.action_valid ? num(r.action.value) : "") << ','
                << (std::isnan(r.nu) ? "" : num(r.nu)) << ','
                << opt_str(r.winding) << ','
                << (r.first_conjugate ? num(*r.first_conjugate) : "") << ','
                << r.iterations << '\n';
        }
    } else if (!cfg.alphas.empty()) {
        if (sc.name != "cap_cylinder")
            throw ConfigError("--alphas requires the cap_cylinder scenario");
        const std::vector<double> alphas = parse_list(cfg.alphas);
        if (alphas.empty()) throw ConfigError("empty alpha grid");
        const double r = sc.params.at("r"), B = sc.params.at("B");
        csv << "alpha_deg,action,closed_form,abs_error\n";
        for (double deg : alphas) {
            const double alpha = deg * kPi / 180.0;
            Trajectory c = cap_cylinder_calpha(sc, alpha);
            const FunctionalValue I = sc.action({cfg.ratio}, c);
            const double expect =
                cap_cylinder_action_formula(r, cfg.ratio * B, alpha);
            csv << num(deg) << ',' << num(I.value) << ',' << num(expect) << ','
                << num(std::abs(I.value - expect)) << '\n';
        }
    } else if (cfg.direction_grid) {
        ConnectionProblem pb = sc.problem({cfg.ratio}, method, tol);
        apply_target(cfg, sc, pb);
        GridSpec grid;
        grid.n_dir = cfg.grid_dir;
        grid.n_mag = cfg.grid_mag;
        grid.seed = cfg.seed;
        MultistartReport rep = multistart(pb, grid);
        csv << "index,converged,residual,action,nu,winding,conjugate_param\n";
        for (size_t i = 0; i < rep.results.size(); ++i) {
            const ConnectionResult& r = rep.results[i];
            csv << i << ',' << (r.converged ? 1 : 0) << ','
                << num(r.endpoint_residual) << ','
                << (r.action_valid ? num(r.action.value) : "") << ','
                << (std::isnan(r.nu) ? "" : num(r.nu)) << ','
                << opt_str(r.winding) << ','
                << (r.first_conjugate ? num(*r.first_conjugate) : "") << '\n';
        }
        csv << "# attempts=" << rep.attempts
            << " converged=" << rep.converged_count
            << " best_residual=" << num(rep.best_residual) << '\n';
    } else {
        throw ConfigError("sweep needs --ratios, --alphas or --direction-grid");
    }

    if (!cfg.out_dir.empty()) {
        std::filesystem::create_directories(cfg.out_dir);
        std::ofstream out(std::filesystem::path(cfg.out_dir) / "sweep.csv");
        out << csv.str();
    }
    std::cout << csv.str();
    return 0;
}

// JSON config file mirroring the flags; explicitly passed flags win.
void apply_config_file(const std::string& path, CLI::App& app, RunConfig& cfg) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path);
    json j = json::parse(in);
    auto set_if_unset = [&](const char* flag, auto& field) {
        using T = std::decay_t<decltype(field)>;
        if (j.contains(flag) && app.count(std::string("--") + flag) == 0)
            field = j.at(flag).get<T>();
    };
    set_if_unset("scenario", cfg.scenario);
    set_if_unset("scenario-file", cfg.scenario_file);
    set_if_unset("ratio", cfg.ratio);
    set_if_unset("method", cfg.method);
    set_if_unset("target", cfg.target);
    set_if_unset("tol", cfg.tol);
    set_if_unset("endpoint-tol", cfg.endpoint_tol);
    set_if_unset("out", cfg.out_dir);
    set_if_unset("seed", cfg.seed);
    set_if_unset("ratios", cfg.ratios);
    set_if_unset("alphas", cfg.alphas);
    if (j.contains("grid") && app.count("--grid") == 0) {
        cfg.grid_dir = j["grid"][0].get<int>();
        cfg.grid_mag = j["grid"][1].get<int>();
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Timelike connections through the Lorentz force equation"};
    app.require_subcommand(1);

    RunConfig cfg;
    std::string config_file;
    std::vector<int> grid_pair;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--scenario", cfg.scenario, "catalog scenario name");
        sub->add_option("--scenario-file", cfg.scenario_file,
                        "JSON scenario file");
        sub->add_option("--ratio", cfg.ratio, "charge-to-mass ratio q/m");
        sub->add_option("--method", cfg.method, "direct|kk")
            ->check(CLI::IsMember({"direct", "kk"}));
        sub->add_option("--target", cfg.target,
                        "marked | t,q1,q2[@chart] endpoint override");
        sub->add_option("--tol", cfg.tol, "integrator tolerance");
        sub->add_option("--endpoint-tol", cfg.endpoint_tol,
                        "endpoint residual tolerance");
        sub->add_option("--grid", grid_pair, "multistart grid N_dir N_mag")
            ->expected(2);
        sub->add_option("--out", cfg.out_dir, "output directory");
        sub->add_option("--seed", cfg.seed, "grid jitter seed");
        sub->add_option("--config", config_file, "JSON config mirroring flags");
    };

    CLI::App* solve = app.add_subcommand("solve", "solve one connection problem");
    add_common(solve);
    CLI::App* verify = app.add_subcommand("verify", "run a scenario's check list");
    add_common(verify);
    CLI::App* sweep = app.add_subcommand("sweep", "parameter sweeps, CSV output");
    add_common(sweep);
    sweep->add_option("--ratios", cfg.ratios, "ratio list a,b,c or lo:hi:n");
    sweep->add_option("--alphas", cfg.alphas, "alpha grid in degrees");
    sweep->add_flag("--direction-grid", cfg.direction_grid,
                    "multistart direction grid sweep");

    CLI11_PARSE(app, argc, argv);

    try {
        CLI::App* sub = app.get_subcommands().front();
        if (!config_file.empty()) apply_config_file(config_file, *sub, cfg);
        if (!grid_pair.empty()) {
            cfg.grid_dir = grid_pair[0];
            cfg.grid_mag = grid_pair[1];
        }
        if (sub == solve) return cmd_solve(cfg);
        if (sub == verify) return cmd_verify(cfg);
        return cmd_sweep(cfg);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 1;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
