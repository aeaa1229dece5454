#include "hmpc/experiment.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <thread>

#include "hmpc/errors.hpp"
#include "hmpc/riccati.hpp"
#include "hmpc/terminal.hpp"

namespace hmpc {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// Angles may be given as plain numbers (radians) or strings with a
// "deg" suffix, e.g. "-7 deg".
double parse_angle(const nlohmann::json& j) {
    if (j.is_number()) {
        return j.get<double>();
    }
    if (j.is_string()) {
        std::string s = j.get<std::string>();
        double scale = 1.0;
        const auto pos = s.find("deg");
        if (pos != std::string::npos) {
            scale = M_PI / 180.0;
            s = s.substr(0, pos);
        }
        return std::stod(s) * scale;
    }
    throw ConfigError("angle values must be numbers or \"<value> deg\" strings");
}

VectorXd parse_vector(const nlohmann::json& j) {
    VectorXd v(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) {
        v[i] = j.at(i).get<double>();
    }
    return v;
}

nlohmann::json vector_json(const VectorXd& v) {
    nlohmann::json out = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        out.push_back(v[i]);
    }
    return out;
}

MatrixXd parse_matrix(const nlohmann::json& j) {
    const auto rows = j.size();
    const auto cols = j.at(0).size();
    MatrixXd m(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            m(r, c) = j.at(r).at(c).get<double>();
        }
    }
    return m;
}

DisturbanceSignal parse_disturbance(const nlohmann::json& j) {
    const std::string kind = j.value("kind", "zero");
    if (kind == "zero") {
        return DisturbanceSignal::zero();
    }
    if (kind == "constant") {
        return DisturbanceSignal::make_constant(parse_vector(j.at("value")));
    }
    if (kind == "piecewise-constant-random") {
        return DisturbanceSignal::piecewise_random(j.at("amplitude").get<double>(),
                                                   j.value("hold_time", 0.5),
                                                   j.value("seed", std::uint64_t{0}));
    }
    if (kind == "sinusoid") {
        return DisturbanceSignal::sinusoid(j.at("amplitude").get<double>(),
                                           j.at("frequency").get<double>());
    }
    throw ConfigError("unknown disturbance kind: " + kind);
}

nlohmann::json disturbance_json(const DisturbanceSignal& d) {
    switch (d.kind) {
        case DisturbanceSignal::Kind::Zero:
            return {{"kind", "zero"}};
        case DisturbanceSignal::Kind::Constant:
            return {{"kind", "constant"}, {"value", vector_json(d.constant)}};
        case DisturbanceSignal::Kind::PiecewiseConstantRandom:
            return {{"kind", "piecewise-constant-random"},
                    {"amplitude", d.amplitude},
                    {"hold_time", d.hold_time},
                    {"seed", d.seed}};
        case DisturbanceSignal::Kind::Sinusoid:
            return {{"kind", "sinusoid"}, {"amplitude", d.amplitude}, {"frequency", d.frequency}};
    }
    return {{"kind", "zero"}};
}

Scheme scheme_from_name(const std::string& name) {
    if (name == "MPC1") return Scheme::MPC1;
    if (name == "MPC2") return Scheme::MPC2;
    if (name == "HMPC") return Scheme::HMPC;
    return Scheme::Custom;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
    ExperimentConfig cfg;
    const std::string kind = j.value("experiment", "double-integrator");
    if (kind == "double-integrator") {
        cfg.kind = Kind::DoubleIntegrator;
    } else if (kind == "lane-change") {
        cfg.kind = Kind::LaneChange;
    } else if (kind == "custom-lti") {
        cfg.kind = Kind::CustomLti;
        cfg.custom_model_path = j.at("model_path").get<std::string>();
    } else {
        throw ConfigError("unknown experiment kind: " + kind);
    }

    for (const auto& s : j.at("schemes")) {
        cfg.schemes.push_back(
            {s.at("name").get<std::string>(), s.at("t_s").get<double>(), s.at("t_d").get<double>()});
    }
    cfg.horizon = j.value("horizon", 2.0);
    cfg.t_sim = j.value("t_sim", 20.0);
    if (j.contains("x0")) {
        cfg.x0 = parse_vector(j.at("x0"));
    }
    if (j.contains("disturbance")) {
        cfg.disturbance = parse_disturbance(j.at("disturbance"));
    }
    if (j.contains("seeds")) {
        cfg.seeds.clear();
        for (const auto& s : j.at("seeds")) {
            cfg.seeds.push_back(s.get<std::uint64_t>());
        }
    }
    cfg.output_dir = j.value("output_dir", std::string("out"));
    if (j.contains("solver")) {
        cfg.qp_settings.tol = j.at("solver").value("tol", 1e-6);
        cfg.qp_settings.max_iter = j.at("solver").value("max_iterations", 4000);
        cfg.sqp_settings.qp = cfg.qp_settings;
    }
    if (j.contains("sqp")) {
        cfg.sqp_settings.max_iter = j.at("sqp").value("max_iterations", 50);
        cfg.sqp_settings.trust_radius = j.at("sqp").value("trust_radius", 0.5);
    }
    cfg.use_terminal_set = j.value("use_terminal_set", false);
    cfg.state_constraint_at_final = j.value("state_constraint_at_final", true);
    cfg.prediction_substeps = j.value("prediction_substeps", 1);

    if (j.contains("model")) {
        const auto& m = j.at("model");
        cfg.lane_params.mass = m.value("mass", cfg.lane_params.mass);
        cfg.lane_params.yaw_inertia = m.value("yaw_inertia", cfg.lane_params.yaw_inertia);
        cfg.lane_params.dist_front = m.value("dist_front", cfg.lane_params.dist_front);
        cfg.lane_params.dist_rear = m.value("dist_rear", cfg.lane_params.dist_rear);
        cfg.lane_params.speed = m.value("speed", cfg.lane_params.speed);
        cfg.lane_params.stiffness_front =
            m.value("stiffness_front", cfg.lane_params.stiffness_front);
        cfg.lane_params.stiffness_rear = m.value("stiffness_rear", cfg.lane_params.stiffness_rear);
        cfg.lane_params.wind_force = m.value("wind_force", cfg.lane_params.wind_force);
        if (m.contains("x_set")) {
            cfg.lane_x_set = Polyhedron::from_json(m.at("x_set"));
        }
        if (m.contains("u_set")) {
            cfg.lane_u_set = Polyhedron::from_json(m.at("u_set"));
        }
        if (m.contains("bounds")) {
            const auto& b = m.at("bounds");
            LaneChangeSpec spec = LaneChangeSpec::standard(cfg.lane_params);
            Polyhedron x_set = spec.x_set;
            const auto set_pair = [&](const std::string& key, int plus_row, int minus_row,
                                      bool angle) {
                if (!b.contains(key)) {
                    return;
                }
                const auto& pair = b.at(key);
                const double lo = angle ? parse_angle(pair.at(0)) : pair.at(0).get<double>();
                const double hi = angle ? parse_angle(pair.at(1)) : pair.at(1).get<double>();
                x_set.h[plus_row] = hi;
                x_set.h[minus_row] = -lo;
            };
            set_pair("y", 0, 1, false);
            set_pair("psi", 2, 3, true);
            set_pair("delta_f", 4, 5, true);
            set_pair("delta_r", 6, 7, true);
            cfg.lane_x_set = x_set;
            if (b.contains("u1") || b.contains("u2")) {
                Polyhedron u_set = spec.u_set;
                if (b.contains("u1")) {
                    u_set.h[0] = b.at("u1").at(1).get<double>();
                    u_set.h[1] = -b.at("u1").at(0).get<double>();
                }
                if (b.contains("u2")) {
                    u_set.h[2] = b.at("u2").at(1).get<double>();
                    u_set.h[3] = -b.at("u2").at(0).get<double>();
                }
                cfg.lane_u_set = u_set;
            }
        }
    }
    return cfg;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config file: " + path);
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    return from_json(j);
}

nlohmann::json ExperimentConfig::to_json() const {
    nlohmann::json j;
    switch (kind) {
        case Kind::DoubleIntegrator:
            j["experiment"] = "double-integrator";
            break;
        case Kind::LaneChange:
            j["experiment"] = "lane-change";
            break;
        case Kind::CustomLti:
            j["experiment"] = "custom-lti";
            j["model_path"] = custom_model_path;
            break;
    }
    j["schemes"] = nlohmann::json::array();
    for (const auto& s : schemes) {
        j["schemes"].push_back({{"name", s.name}, {"t_s", s.t_s}, {"t_d", s.t_d}});
    }
    j["horizon"] = horizon;
    j["t_sim"] = t_sim;
    if (x0) {
        j["x0"] = vector_json(*x0);
    }
    j["disturbance"] = disturbance_json(disturbance);
    j["seeds"] = seeds;
    j["output_dir"] = output_dir;
    j["solver"] = {{"tol", qp_settings.tol}, {"max_iterations", qp_settings.max_iter}};
    j["sqp"] = {{"max_iterations", sqp_settings.max_iter},
                {"trust_radius", sqp_settings.trust_radius}};
    j["use_terminal_set"] = use_terminal_set;
    j["state_constraint_at_final"] = state_constraint_at_final;
    j["prediction_substeps"] = prediction_substeps;
    if (kind == Kind::LaneChange) {
        nlohmann::json m;
        m["mass"] = lane_params.mass;
        m["yaw_inertia"] = lane_params.yaw_inertia;
        m["dist_front"] = lane_params.dist_front;
        m["dist_rear"] = lane_params.dist_rear;
        m["speed"] = lane_params.speed;
        m["stiffness_front"] = lane_params.stiffness_front;
        m["stiffness_rear"] = lane_params.stiffness_rear;
        m["wind_force"] = lane_params.wind_force;
        const LaneChangeSpec spec = LaneChangeSpec::standard(lane_params);
        m["x_set"] = (lane_x_set ? *lane_x_set : spec.x_set).to_json();
        m["u_set"] = (lane_u_set ? *lane_u_set : spec.u_set).to_json();
        j["model"] = m;
    }
    return j;
}

void ExperimentConfig::validate() const {
    if (schemes.empty()) {
        throw ConfigError("at least one scheme is required");
    }
    if (horizon <= 0.0 || t_sim <= 0.0) {
        throw ConfigError("horizon and t_sim must be positive");
    }
    if (seeds.empty()) {
        throw ConfigError("at least one seed is required");
    }
    for (const auto& s : schemes) {
        if (s.t_s <= 0.0 || s.t_d <= 0.0) {
            throw ConfigError("scheme " + s.name + ": t_s and t_d must be positive");
        }
        const double steps = horizon / s.t_d;
        if (std::abs(steps - std::round(steps)) > 1e-9 * steps || std::round(steps) < 1.0) {
            throw ConfigError("scheme " + s.name + ": horizon/t_d must be a positive integer");
        }
        SimConfig sim;
        sim.t_s = s.t_s;
        sim.t_d = s.t_d;
        sim.t_sim = t_sim;
        sim.scheme = scheme_from_name(s.name);
        sim.validate();
    }
    if (kind == Kind::LaneChange && use_terminal_set) {
        throw ConfigError("terminal sets are supported for LTI experiments only");
    }
    if (prediction_substeps < 1) {
        throw ConfigError("prediction_substeps must be >= 1");
    }
}

ExperimentProblem build_problem(const ExperimentConfig& cfg, double t_d) {
    ExperimentProblem prob;
    const double steps = cfg.horizon / t_d;
    const int N = static_cast<int>(std::round(steps));

    if (cfg.kind == ExperimentConfig::Kind::DoubleIntegrator || cfg.kind == ExperimentConfig::Kind::CustomLti) {
        MatrixXd A, B, Q, R;
        Polyhedron x_set, u_set;
        VectorXd x0;
        if (cfg.kind == ExperimentConfig::Kind::DoubleIntegrator) {
            const DoubleIntegratorSpec spec = DoubleIntegratorSpec::standard();
            A = spec.A;
            B = spec.B;
            Q = spec.Q;
            R = spec.R;
            x_set = spec.x_set;
            u_set = spec.u_set;
            x0 = spec.x0;
            prob.plant = double_integrator();
        } else {
            std::ifstream in(cfg.custom_model_path);
            if (!in) {
                throw ConfigError("cannot open model file: " + cfg.custom_model_path);
            }
            nlohmann::json j;
            in >> j;
            A = parse_matrix(j.at("A"));
            B = parse_matrix(j.at("B"));
            Q = parse_matrix(j.at("Q"));
            R = parse_matrix(j.at("R"));
            x_set = Polyhedron::from_json(j.at("x_set"));
            u_set = Polyhedron::from_json(j.at("u_set"));
            x0 = j.contains("x0") ? parse_vector(j.at("x0"))
                                  : VectorXd(VectorXd::Zero(A.rows()));
            prob.plant.n = static_cast<int>(A.rows());
            prob.plant.m = static_cast<int>(B.cols());
            prob.plant.f = [A, B](const VectorXd& x, const VectorXd& u) -> VectorXd {
                return A * x + B * u;
            };
            prob.plant.jacobians = [A, B](const VectorXd&, const VectorXd&) {
                return std::make_pair(A, B);
            };
        }
        prob.ocp.model_d = make_discrete_lti(A, B, t_d);
        prob.ocp.cost = StageCost{Q, R};
        prob.ocp.P = solve_care(A, B, Q, R);
        prob.ocp.terminal_gain = lqr_gain(prob.ocp.P, B, R);
        if (cfg.use_terminal_set) {
            // The admissible set is built at the finest benchmark step.
            const TerminalIngredients ti =
                make_terminal_ingredients(A, B, Q, R, x_set, u_set, 0.02);
            prob.ocp.terminal_set = ti.omega;
        }
        prob.x_set = x_set;
        prob.u_set = u_set;
        prob.x0 = cfg.x0 ? *cfg.x0 : x0;
    } else {
        const LaneChangeSpec spec = LaneChangeSpec::standard(cfg.lane_params);
        prob.plant = lane_change(cfg.lane_params);
        prob.x_set = cfg.lane_x_set ? *cfg.lane_x_set : spec.x_set;
        prob.u_set = cfg.lane_u_set ? *cfg.lane_u_set : spec.u_set;
        prob.ocp.model_d = discretize_rk4(prob.plant, t_d, cfg.prediction_substeps);
        prob.ocp.cost = StageCost{spec.Q, spec.R};
        const auto [A0, B0] =
            linearize(prob.plant, VectorXd::Zero(6), VectorXd::Zero(2));
        prob.ocp.P = solve_care(A0, B0, spec.Q, spec.R);
        prob.ocp.terminal_gain = lqr_gain(prob.ocp.P, B0, spec.R);
        prob.x0 = cfg.x0 ? *cfg.x0 : spec.x0;
    }
    prob.ocp.N = N;
    prob.ocp.x_set = prob.x_set;
    prob.ocp.u_set = prob.u_set;
    prob.ocp.state_constraint_at_final = cfg.state_constraint_at_final;
    return prob;
}

namespace {

struct Job {
    std::size_t scheme_index;
    std::optional<std::uint64_t> seed;  // nullopt → nominal (zero-disturbance) run
};

SchemeRunResult run_job(const ExperimentConfig& cfg, const SchemeSpec& scheme,
                        const Job& job) {
    ExperimentProblem prob = build_problem(cfg, scheme.t_d);
    SimConfig sim;
    sim.t_s = scheme.t_s;
    sim.t_d = scheme.t_d;
    sim.t_sim = cfg.t_sim;
    sim.scheme = scheme_from_name(scheme.name);
    if (job.seed) {
        sim.disturbance = cfg.disturbance;
        if (sim.disturbance.kind == DisturbanceSignal::Kind::PiecewiseConstantRandom) {
            sim.disturbance.seed = *job.seed;
        }
    } else {
        sim.disturbance = DisturbanceSignal::zero();
    }

    SchemeRunResult result;
    result.scheme = scheme.name;
    result.seed = job.seed.value_or(0);
    result.trace = run_closed_loop(prob.plant, prob.ocp, sim, prob.x0);
    result.tail_limsup = result.trace.tail_limsup();
    const double final_norm =
        result.trace.states.row(result.trace.states.rows() - 1).norm();
    result.converged = result.trace.status == TraceStatus::Completed && final_norm <= 1e-2;
    result.constraint_violation_max = result.trace.max_state_violation(prob.x_set);
    std::vector<double> ms;
    for (double s : result.trace.solve_wall_times) {
        ms.push_back(1e3 * s);
    }
    result.solve_ms_p50 = quantile(ms, 0.5);
    result.solve_ms_p95 = quantile(ms, 0.95);
    result.solve_ms_max = quantile(ms, 1.0);
    result.realtime_feasible = result.solve_ms_p95 <= 1e3 * scheme.t_s;
    return result;
}

// Fixed-size job list executed by `workers` threads; exceptions are
// captured and rethrown on the caller thread.
template <typename Fn>
void run_parallel(std::size_t n_jobs, int workers, const Fn& fn) {
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    const auto worker = [&] {
        for (std::size_t i = next.fetch_add(1); i < n_jobs; i = next.fetch_add(1)) {
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                if (!failure) {
                    failure = std::current_exception();
                }
            }
        }
    };
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back(worker);
        }
        for (auto& th : pool) {
            th.join();
        }
    }
    if (failure) {
        std::rethrow_exception(failure);
    }
}

}  // namespace

std::vector<SchemeRunResult> run_experiment(const ExperimentConfig& cfg, int workers) {
    cfg.validate();
    const std::filesystem::path out_dir(cfg.output_dir);
    std::filesystem::create_directories(out_dir);

    std::vector<Job> jobs;
    for (std::size_t s = 0; s < cfg.schemes.size(); ++s) {
        jobs.push_back({s, std::nullopt});
        for (std::uint64_t seed : cfg.seeds) {
            jobs.push_back({s, seed});
        }
    }
    std::vector<SchemeRunResult> results(jobs.size());
    run_parallel(jobs.size(), workers,
                 [&](std::size_t i) { results[i] = run_job(cfg, cfg.schemes[jobs[i].scheme_index], jobs[i]); });

    nlohmann::json comparison;
    comparison["config"] = cfg.to_json();
    for (std::size_t s = 0; s < cfg.schemes.size(); ++s) {
        const SchemeSpec& scheme = cfg.schemes[s];
        const SchemeRunResult* nominal = nullptr;
        std::vector<const SchemeRunResult*> seeded;
        for (std::size_t i = 0; i < jobs.size(); ++i) {
            if (jobs[i].scheme_index != s) {
                continue;
            }
            if (jobs[i].seed) {
                seeded.push_back(&results[i]);
            } else {
                nominal = &results[i];
            }
        }

        {
            std::ofstream csv(out_dir / (scheme.name + ".trace.csv"));
            seeded.front()->trace.write_csv(csv);
        }

        nlohmann::json summary = seeded.front()->trace.summary_json(scheme.t_s);
        const auto [rate, prefactor] = fit_exponential_decay(nominal->trace);
        summary["scheme"] = scheme.name;
        summary["t_s"] = scheme.t_s;
        summary["t_d"] = scheme.t_d;
        summary["N"] = static_cast<int>(std::round(cfg.horizon / scheme.t_d));
        summary["converged"] = nominal->converged;
        summary["decay_fit"] = {{"rate", rate}, {"prefactor", prefactor}};
        nlohmann::json table = nlohmann::json::array();
        std::vector<double> all_ms;
        double worst_limsup = 0.0;
        double worst_violation = -std::numeric_limits<double>::infinity();
        bool any_diverged = false;
        for (const auto* r : seeded) {
            table.push_back({{"seed", r->seed},
                             {"limsup", std::isfinite(r->tail_limsup)
                                            ? nlohmann::json(r->tail_limsup)
                                            : nlohmann::json("inf")}});
            for (double t : r->trace.solve_wall_times) {
                all_ms.push_back(1e3 * t);
            }
            worst_limsup = std::max(worst_limsup, r->tail_limsup);
            worst_violation = std::max(worst_violation, r->constraint_violation_max);
            any_diverged = any_diverged || r->trace.status == TraceStatus::Diverged;
        }
        summary["limsup_table"] = table;
        {
            std::ofstream js(out_dir / (scheme.name + ".summary.json"));
            js << summary.dump(2) << '\n';
        }

        const double p95 = quantile(all_ms, 0.95);
        comparison["schemes"][scheme.name] = {
            {"converged", nominal->converged},
            {"constraint_violation_max", worst_violation},
            {"solve_time_ms",
             {{"p50", quantile(all_ms, 0.5)}, {"p95", p95}, {"max", quantile(all_ms, 1.0)}}},
            {"realtime_feasible", p95 <= 1e3 * scheme.t_s},
            {"tail_limsup", std::isfinite(worst_limsup) ? nlohmann::json(worst_limsup)
                                                        : nlohmann::json("inf")},
            {"diverged", any_diverged},
        };
    }
    {
        std::ofstream js(out_dir / "comparison.json");
        js << comparison.dump(2) << '\n';
    }
    return results;
}

void sweep_experiment(const ExperimentConfig& cfg, const std::vector<double>& td_grid,
                      const std::vector<double>& ts_grid, int workers) {
    cfg.validate();
    struct Cell {
        double t_d;
        double t_s;
        SchemeRunResult result;
    };
    std::vector<Cell> cells;
    for (double td : td_grid) {
        for (double ts : ts_grid) {
            if (ts > td + 1e-12) {
                throw ConfigError("sweep grid requires t_s <= t_d");
            }
            const double steps = cfg.horizon / td;
            if (std::abs(steps - std::round(steps)) > 1e-9 * steps) {
                throw ConfigError("sweep grid requires horizon/t_d integer");
            }
            cells.push_back({td, ts, {}});
        }
    }
    run_parallel(cells.size(), workers, [&](std::size_t i) {
        SchemeSpec spec{"custom", cells[i].t_s, cells[i].t_d};
        cells[i].result = run_job(cfg, spec, Job{0, cfg.seeds.front()});
    });

    const std::filesystem::path out_dir(cfg.output_dir);
    std::filesystem::create_directories(out_dir);
    std::ofstream csv(out_dir / "sweep.csv");
    csv << "t_s,t_d,N,converged,limsup,p95_solve_ms,realtime_feasible\n";
    csv << std::setprecision(17);
    for (const Cell& cell : cells) {
        const bool bounded = cell.result.trace.status == TraceStatus::Completed &&
                             cell.result.tail_limsup < 1e3;
        csv << cell.t_s << ',' << cell.t_d << ','
            << static_cast<int>(std::round(cfg.horizon / cell.t_d)) << ','
            << (bounded ? 1 : 0) << ',' << cell.result.tail_limsup << ','
            << cell.result.solve_ms_p95 << ',' << (cell.result.realtime_feasible ? 1 : 0)
            << '\n';
    }
}

}  // namespace hmpc
