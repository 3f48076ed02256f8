#include <catch2/catch_amalgamated.hpp>

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

#ifndef LFE_CLI_PATH
#error "LFE_CLI_PATH must be defined by the build"
#endif

int run(const std::string& args, const std::string& log = "/dev/null") {
    const std::string cmd =
        std::string(LFE_CLI_PATH) + " " + args + " >" + log + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

std::string strip_timestamp(const fs::path& p) {
    std::ifstream in(p);
    std::ostringstream out;
    std::string line;
    while (std::getline(in, line))
        if (line.find("timestamp") == std::string::npos) out << line << '\n';
    return out.str();
}

}  // namespace

TEST_CASE("solve: exit codes and result artifacts") {
    const fs::path dir = fs::temp_directory_path() / "lfe_cli_solve";
    fs::remove_all(dir);
    CHECK(run("solve --scenario minkowski_uniform --ratio 1 --method direct --out " +
              dir.string()) == 0);
    json j = json::parse(std::ifstream(dir / "result.json"));
    CHECK(j["converged"].get<bool>());
    CHECK(j["residual"].get<double>() < 1e-8);
    CHECK(fs::exists(dir / "trajectory.csv"));

    // antipodal sphere target: no solution exists, exit 2
    CHECK(run("solve --scenario sphere --ratio 2 --method direct") == 2);

    // config errors exit 1
    CHECK(run("solve") == 1);
    CHECK(run("solve --scenario no_such_scenario") == 1);
}

TEST_CASE("solve with the kk method writes the bundle trajectory") {
    const fs::path dir = fs::temp_directory_path() / "lfe_cli_kk";
    fs::remove_all(dir);
    CHECK(run("solve --scenario minkowski_uniform --ratio 1 --method kk --out " +
              dir.string()) == 0);
    json j = json::parse(std::ifstream(dir / "result.json"));
    CHECK(j["nu"].get<double>() > 0);
    CHECK(fs::exists(dir / "trajectory_kk.csv"));
    // header carries the fiber and Noether columns
    std::string header;
    std::getline(std::ifstream(dir / "trajectory_kk.csv"), header);
    CHECK(header.find(",y,") != std::string::npos);
    CHECK(header.find(",nu,") != std::string::npos);
}

TEST_CASE("verify: determinism at fixed seed, timestamp excluded") {
    const fs::path d1 = fs::temp_directory_path() / "lfe_cli_v1";
    const fs::path d2 = fs::temp_directory_path() / "lfe_cli_v2";
    fs::remove_all(d1);
    fs::remove_all(d2);
    CHECK(run("verify --scenario cap_cylinder --seed 7 --out " + d1.string()) == 0);
    CHECK(run("verify --scenario cap_cylinder --seed 7 --out " + d2.string()) == 0);
    const std::string a = strip_timestamp(d1 / "verify_cap_cylinder.json");
    const std::string b = strip_timestamp(d2 / "verify_cap_cylinder.json");
    CHECK(!a.empty());
    CHECK(a == b);

    CHECK(run("verify --scenario no_such_scenario") == 1);
}

TEST_CASE("sweep: ratio table, alpha table, empty range") {
    const fs::path dir = fs::temp_directory_path() / "lfe_cli_sweep";
    fs::remove_all(dir);
    CHECK(run("sweep --scenario minkowski_uniform --ratios 0,0.5,1 --out " +
              dir.string()) == 0);
    std::ifstream csv(dir / "sweep.csv");
    std::string line;
    std::getline(csv, line);
    CHECK(line ==
          "ratio,converged,residual,action,nu,winding,conjugate_param,iterations");
    int rows = 0, converged = 0;
    while (std::getline(csv, line)) {
        ++rows;
        converged += (line.find(",1,") != std::string::npos);
    }
    CHECK(rows == 3);
    CHECK(converged == 3);

    CHECK(run("sweep --scenario cap_cylinder --alphas 10,90 --ratio 1") == 0);
    CHECK(run("sweep --scenario minkowski_uniform --ratios ''") == 1);
    CHECK(run("sweep --scenario minkowski_uniform") == 1);
}

TEST_CASE("scenario file and config file mirror the flags") {
    const fs::path dir = fs::temp_directory_path() / "lfe_cli_cfg";
    fs::remove_all(dir);
    fs::create_directories(dir);
    {
        std::ofstream f(dir / "scenario.json");
        f << R"({"name": "ribbon", "parameters": {"r": 1.0, "B": 0.5}})";
    }
    {
        std::ofstream f(dir / "config.json");
        f << R"({"scenario-file": ")" << (dir / "scenario.json").string()
          << R"(", "ratio": 4.0, "method": "kk"})";
    }
    // config supplies everything; the solve connects the ribbon marked events
    CHECK(run("solve --config " + (dir / "config.json").string() + " --out " +
              dir.string()) == 0);
    json j = json::parse(std::ifstream(dir / "result.json"));
    CHECK(j["problem"]["scenario"] == "ribbon");
    CHECK(j["problem"]["ratio"].get<double>() == 4.0);
    // explicit flags override the config file
    CHECK(run("solve --config " + (dir / "config.json").string() +
              " --ratio 2 --out " + dir.string()) == 0);
    json j2 = json::parse(std::ifstream(dir / "result.json"));
    CHECK(j2["problem"]["ratio"].get<double>() == 2.0);
}
