#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hmpc/models.hpp"
#include "hmpc/ocp.hpp"
#include "hmpc/simulator.hpp"

#include "json.hpp"

namespace hmpc {

struct SchemeSpec {
    std::string name;
    double t_s = 0.0;
    double t_d = 0.0;
};

/// Experiment description loaded from JSON. `validate()` enforces the
/// timing invariants (T/t_d ∈ ℕ⁺, t_s ≤ t_d) and the scheme labels.
struct ExperimentConfig {
    enum class Kind { DoubleIntegrator, LaneChange, CustomLti };

    Kind kind = Kind::DoubleIntegrator;
    std::string custom_model_path;  ///< CustomLti only
    std::vector<SchemeSpec> schemes;
    double horizon = 2.0;
    double t_sim = 20.0;
    std::optional<Eigen::VectorXd> x0;  ///< defaults to the model's benchmark state
    DisturbanceSignal disturbance;
    std::vector<std::uint64_t> seeds = {0};
    std::string output_dir = "out";
    QpSettings qp_settings;
    SqpSettings sqp_settings;
    bool use_terminal_set = false;  ///< append Ω at the final stage
    bool state_constraint_at_final = true;
    int prediction_substeps = 1;  ///< RK4 substeps of the nonlinear prediction model
    LaneChangeParams lane_params;
    std::optional<Polyhedron> lane_x_set;  ///< overrides the default bounds
    std::optional<Polyhedron> lane_u_set;

    static ExperimentConfig from_json(const nlohmann::json& j);
    static ExperimentConfig from_file(const std::string& path);
    nlohmann::json to_json() const;  ///< resolved config (all defaults filled)
    void validate() const;
};

/// Plant + OCP assembly for one scheme of an experiment.
struct ExperimentProblem {
    ContinuousModel plant;
    DiscreteOcp ocp;
    Eigen::VectorXd x0;
    Polyhedron x_set;
    Polyhedron u_set;
};

ExperimentProblem build_problem(const ExperimentConfig& cfg, double t_d);

/// Result of one scheme × seed closed-loop job.
struct SchemeRunResult {
    std::string scheme;
    std::uint64_t seed = 0;
    ClosedLoopTrace trace;
    bool converged = false;
    double tail_limsup = 0.0;
    double constraint_violation_max = 0.0;
    double solve_ms_p50 = 0.0;
    double solve_ms_p95 = 0.0;
    double solve_ms_max = 0.0;
    bool realtime_feasible = false;  ///< p95 solve time ≤ t_s
};

/// Run every scheme × seed job (at most `workers` concurrently), write
/// <scheme>.trace.csv (first seed), <scheme>.summary.json, and
/// comparison.json (which embeds the resolved config) into output_dir.
/// Returns one result per job.
std::vector<SchemeRunResult> run_experiment(const ExperimentConfig& cfg, int workers = 1);

/// Grid study over discretization and sampling times; writes sweep.csv
/// with rows t_s,t_d,N,converged,limsup,p95_solve_ms,realtime_feasible.
void sweep_experiment(const ExperimentConfig& cfg, const std::vector<double>& td_grid,
                      const std::vector<double>& ts_grid, int workers = 1);

}  // namespace hmpc
