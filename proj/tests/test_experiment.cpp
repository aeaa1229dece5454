#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"

#include "hmpc/errors.hpp"
#include "hmpc/experiment.hpp"

using namespace hmpc;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

// Trace content with the solve_ms column blanked: wall times are
// measurements, not replayable state.
std::string trace_without_timing(const fs::path& p) {
    std::ifstream in(p);
    std::ostringstream os;
    std::string line;
    while (std::getline(in, line)) {
        const auto last = line.rfind(',');
        const auto prev = line.rfind(',', last - 1);
        os << line.substr(0, prev) << line.substr(last) << '\n';
    }
    return os.str();
}

ExperimentConfig tiny_di_config(const std::string& out) {
    ExperimentConfig cfg;
    cfg.kind = ExperimentConfig::Kind::DoubleIntegrator;
    cfg.schemes = {{"HMPC", 0.1, 0.4}};
    cfg.horizon = 2.0;
    cfg.t_sim = 2.0;
    cfg.disturbance = DisturbanceSignal::piecewise_random(0.3, 0.5, 1);
    cfg.seeds = {1};
    cfg.output_dir = out;
    return cfg;
}

}  // namespace

TEST_CASE("bundled configs parse and validate") {
    const auto di =
        ExperimentConfig::from_file(std::string(HMPC_CONFIG_DIR) + "/double_integrator.json");
    CHECK_NOTHROW(di.validate());
    REQUIRE(di.schemes.size() == 3);
    CHECK(di.schemes[0].name == "MPC1");
    CHECK(di.schemes[1].t_s == 0.02);
    CHECK(di.schemes[1].t_d == 0.4);
    CHECK(di.seeds.size() == 5);

    const auto lane =
        ExperimentConfig::from_file(std::string(HMPC_CONFIG_DIR) + "/lane_change.json");
    CHECK_NOTHROW(lane.validate());
    CHECK(lane.kind == ExperimentConfig::Kind::LaneChange);
    REQUIRE(lane.lane_x_set.has_value());
    // "7 deg" bounds resolve to radians.
    CHECK(lane.lane_x_set->h[2] == doctest::Approx(7.0 * M_PI / 180.0));
    CHECK(lane.lane_x_set->h[5] == doctest::Approx(35.0 * M_PI / 180.0));
}

TEST_CASE("invalid configs are rejected") {
    auto cfg = tiny_di_config("out/x");
    cfg.schemes = {{"HMPC", 0.4, 0.4}};  // label demands t_s < t_d
    CHECK_THROWS_AS(cfg.validate(), ConfigError);

    cfg = tiny_di_config("out/x");
    cfg.schemes = {{"custom", 0.3, 0.3}};  // horizon/t_d not integer
    CHECK_THROWS_AS(cfg.validate(), ConfigError);

    cfg = tiny_di_config("out/x");
    cfg.schemes = {{"custom", 0.5, 0.4}};  // sampling slower than the model step
    CHECK_THROWS_AS(cfg.validate(), ConfigError);

    cfg = tiny_di_config("out/x");
    cfg.seeds.clear();
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("config json round trip") {
    const auto cfg = tiny_di_config("out/rt");
    const auto back = ExperimentConfig::from_json(cfg.to_json());
    CHECK(back.to_json() == cfg.to_json());
}

TEST_CASE("experiment artifacts and reproducibility from the embedded config") {
    const fs::path tmp(HMPC_TEST_TMP_DIR);
    fs::create_directories(tmp);
    const fs::path out1 = tmp / "exp1";
    const fs::path out2 = tmp / "exp2";
    fs::remove_all(out1);
    fs::remove_all(out2);

    auto cfg = tiny_di_config(out1.string());
    const auto results = run_experiment(cfg, 1);
    CHECK(results.size() == 2);  // nominal + one seed
    REQUIRE(fs::exists(out1 / "HMPC.trace.csv"));
    REQUIRE(fs::exists(out1 / "HMPC.summary.json"));
    REQUIRE(fs::exists(out1 / "comparison.json"));

    nlohmann::json comparison;
    std::ifstream(out1 / "comparison.json") >> comparison;
    auto replay_cfg = ExperimentConfig::from_json(comparison.at("config"));
    replay_cfg.output_dir = out2.string();
    run_experiment(replay_cfg, 1);
    CHECK(trace_without_timing(out1 / "HMPC.trace.csv") ==
          trace_without_timing(out2 / "HMPC.trace.csv"));
}

TEST_CASE("concurrent workers reproduce the single-thread artifacts") {
    const fs::path tmp(HMPC_TEST_TMP_DIR);
    const fs::path serial = tmp / "workers1";
    const fs::path parallel = tmp / "workers2";
    fs::remove_all(serial);
    fs::remove_all(parallel);
    auto cfg = tiny_di_config(serial.string());
    cfg.seeds = {1, 2};
    run_experiment(cfg, 1);
    cfg.output_dir = parallel.string();
    run_experiment(cfg, 2);
    CHECK(trace_without_timing(serial / "HMPC.trace.csv") ==
          trace_without_timing(parallel / "HMPC.trace.csv"));
}

TEST_CASE("a one-cell sweep matches the run output for that scheme") {
    const fs::path tmp(HMPC_TEST_TMP_DIR);
    const fs::path out_run = tmp / "sweep_run";
    const fs::path out_sweep = tmp / "sweep_grid";
    fs::remove_all(out_run);
    fs::remove_all(out_sweep);

    auto cfg = tiny_di_config(out_run.string());
    cfg.schemes = {{"custom", 0.4, 0.4}};
    const auto results = run_experiment(cfg, 1);
    double run_limsup = 0.0;
    for (const auto& r : results) {
        if (r.seed == 1) {
            run_limsup = r.tail_limsup;
        }
    }

    cfg.output_dir = out_sweep.string();
    sweep_experiment(cfg, {0.4}, {0.4}, 1);
    std::ifstream csv(out_sweep / "sweep.csv");
    std::string header, row;
    std::getline(csv, header);
    std::getline(csv, row);
    CHECK(header == "t_s,t_d,N,converged,limsup,p95_solve_ms,realtime_feasible");
    std::istringstream fields(row);
    std::string field;
    std::getline(fields, field, ',');
    CHECK(std::stod(field) == 0.4);  // t_s
    std::getline(fields, field, ',');
    CHECK(std::stod(field) == 0.4);  // t_d
    std::getline(fields, field, ',');
    CHECK(std::stoi(field) == 5);  // N
    std::getline(fields, field, ',');
    std::getline(fields, field, ',');
    CHECK(std::stod(field) == doctest::Approx(run_limsup).epsilon(1e-12));
}

namespace {

struct SweepRow {
    double t_s, t_d, limsup, p95;
    int N, converged, realtime;
};

std::vector<SweepRow> read_sweep(const fs::path& dir) {
    std::ifstream csv(dir / "sweep.csv");
    std::string line;
    std::getline(csv, line);  // header
    std::vector<SweepRow> rows;
    while (std::getline(csv, line)) {
        SweepRow r{};
        std::istringstream fields(line);
        std::string f;
        std::getline(fields, f, ',');
        r.t_s = std::stod(f);
        std::getline(fields, f, ',');
        r.t_d = std::stod(f);
        std::getline(fields, f, ',');
        r.N = std::stoi(f);
        std::getline(fields, f, ',');
        r.converged = std::stoi(f);
        std::getline(fields, f, ',');
        r.limsup = std::stod(f);
        std::getline(fields, f, ',');
        r.p95 = std::stod(f);
        std::getline(fields, f, ',');
        r.realtime = std::stoi(f);
        rows.push_back(r);
    }
    return rows;
}

}  // namespace

TEST_CASE("sweep trends: cost grows with horizon length, reaction improves with sampling") {
    const fs::path tmp(HMPC_TEST_TMP_DIR);
    auto cfg = tiny_di_config((tmp / "sweep_td").string());
    cfg.t_sim = 10.0;
    cfg.disturbance = DisturbanceSignal::piecewise_random(0.5, 0.5, 1);
    cfg.schemes = {{"custom", 0.02, 0.4}};

    sweep_experiment(cfg, {0.4, 0.2, 0.1}, {0.02}, 1);
    const auto by_td = read_sweep(tmp / "sweep_td");
    REQUIRE(by_td.size() == 3);
    // N grows 5 → 20; the dense solve cost gap is far above timer noise.
    CHECK(by_td.front().N == 5);
    CHECK(by_td.back().N == 20);
    CHECK(by_td.back().p95 > by_td.front().p95);

    cfg.output_dir = (tmp / "sweep_ts").string();
    sweep_experiment(cfg, {0.4}, {0.4, 0.1, 0.02}, 1);
    const auto by_ts = read_sweep(tmp / "sweep_ts");
    REQUIRE(by_ts.size() == 3);
    for (std::size_t i = 1; i < by_ts.size(); ++i) {
        CHECK(by_ts[i].t_s < by_ts[i - 1].t_s);
        CHECK(by_ts[i].limsup <= by_ts[i - 1].limsup);
        CHECK(by_ts[i].converged == 1);
    }
}

TEST_CASE("custom LTI models load from a model file") {
    const fs::path tmp(HMPC_TEST_TMP_DIR);
    fs::create_directories(tmp);
    const fs::path model_path = tmp / "custom_model.json";
    {
        std::ofstream out(model_path);
        out << R"({
            "A": [[-1.0]],
            "B": [[1.0]],
            "Q": [[1.0]],
            "R": [[1.0]],
            "x_set": {"H": [[1.0], [-1.0]], "h": [5.0, 5.0]},
            "u_set": {"H": [[1.0], [-1.0]], "h": [2.0, 2.0]},
            "x0": [1.0]
        })";
    }
    ExperimentConfig cfg;
    cfg.kind = ExperimentConfig::Kind::CustomLti;
    cfg.custom_model_path = model_path.string();
    cfg.schemes = {{"custom", 0.2, 0.2}};
    cfg.horizon = 2.0;
    cfg.t_sim = 6.0;
    cfg.seeds = {0};
    cfg.output_dir = (tmp / "custom_out").string();
    CHECK_NOTHROW(cfg.validate());

    const ExperimentProblem prob = build_problem(cfg, 0.2);
    CHECK(prob.ocp.N == 10);
    CHECK(prob.x0[0] == 1.0);
    const ClosedLoopTrace trace =
        run_closed_loop(prob.plant, prob.ocp,
                        SimConfig{0.2, 0.2, 6.0, 0.0, DisturbanceSignal::zero(), Scheme::Custom},
                        prob.x0);
    CHECK(trace.status == TraceStatus::Completed);
    CHECK(trace.tail_limsup() <= 1e-2);
}

TEST_CASE("lane-change problems assemble with Riccati terminal cost") {
    auto cfg = tiny_di_config("out/lane");
    cfg.kind = ExperimentConfig::Kind::LaneChange;
    cfg.schemes = {{"HMPC", 0.04, 0.2}};
    const ExperimentProblem prob = build_problem(cfg, 0.2);
    CHECK(prob.ocp.N == 10);
    CHECK(prob.ocp.model_d.t_d == 0.2);
    CHECK(prob.ocp.P.rows() == 6);
    CHECK(prob.x0[0] == 5.0);
    CHECK_FALSE(prob.ocp.model_d.linear_part.has_value());
}
