#pragma once

#include <cstdint>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hmpc/dynamics.hpp"
#include "hmpc/ocp.hpp"

#include "json.hpp"

namespace hmpc {

/// Input-additive disturbance signal d(t). The realized signal depends
/// only on (kind, parameters, seed, t), never on the simulation grid, so
/// every scheme sees the same disturbance.
struct DisturbanceSignal {
    enum class Kind { Zero, Constant, PiecewiseConstantRandom, Sinusoid };

    Kind kind = Kind::Zero;
    double amplitude = 0.0;
    double hold_time = 0.5;       ///< piecewise-constant segment length, s
    std::uint64_t seed = 0;       ///< piecewise-constant draw seed
    double frequency = 1.0;       ///< Hz, sinusoid
    Eigen::VectorXd constant;     ///< Constant kind value

    static DisturbanceSignal zero();
    static DisturbanceSignal make_constant(const Eigen::VectorXd& value);
    static DisturbanceSignal piecewise_random(double amplitude, double hold_time,
                                              std::uint64_t seed);
    static DisturbanceSignal sinusoid(double amplitude, double frequency);

    /// Per-component value at time t for an m-dimensional input channel.
    Eigen::VectorXd value_at(double t, int m) const;
};

enum class Scheme { MPC1, HMPC, MPC2, Custom };

std::string scheme_name(Scheme s);

/// Sampled-data loop timing: the controller runs every t_s on the
/// zero-order-held state; the prediction model inside the OCP uses t_d;
/// the plant integrates at the fine step t_p (default t_s/20).
struct SimConfig {
    double t_s = 0.0;
    double t_d = 0.0;
    double t_sim = 0.0;
    double t_p = 0.0;  ///< 0 → t_s/20
    DisturbanceSignal disturbance;
    Scheme scheme = Scheme::Custom;

    double plant_step() const { return t_p > 0.0 ? t_p : t_s / 20.0; }

    /// Throws ConfigError on inconsistent timing (including the scheme
    /// labels: MPC1/MPC2 require t_s = t_d, HMPC requires t_s < t_d).
    void validate() const;
};

enum class TraceStatus { Completed, Diverged };

struct FeasibilityEvent {
    double time = 0.0;
    std::string what;
};

/// Closed-loop record on the plant grid: states at every t_p tick,
/// the input and disturbance applied over [t_i, t_{i+1}), per-sample
/// solver wall times, and feasibility events.
struct ClosedLoopTrace {
    Eigen::VectorXd times;
    Eigen::MatrixXd states;        ///< (ticks+1) × n
    Eigen::MatrixXd inputs;        ///< ticks × m
    Eigen::MatrixXd disturbances;  ///< ticks × m
    std::vector<int> sample_ticks;
    std::vector<double> solve_wall_times;  ///< seconds, one per sample
    std::vector<FeasibilityEvent> events;
    TraceStatus status = TraceStatus::Completed;

    int ticks() const { return static_cast<int>(inputs.rows()); }
    double max_state_violation(const Polyhedron& x_set) const;
    double tail_limsup(double fraction = 0.25) const;  ///< max ‖x‖ over the final fraction

    /// CSV export: t,x1..xn,u1..um,d1..dm,solve_ms,event — one row per
    /// plant tick; solve_ms populated only on sample ticks.
    void write_csv(std::ostream& os) const;

    /// Summary: tail limsup, timing percentiles, event count.
    nlohmann::json summary_json(double t_s) const;
};

/// Run the sampled-data closed loop from x0: at every sample instant the
/// OCP is solved at the held state (warm-started; the warm start is
/// shifted once per elapsed t_d), the first input is applied and held,
/// and the plant integrates at t_p with the additive input disturbance.
/// The trace truncates with Diverged when ‖x‖ exceeds 1e6.
ClosedLoopTrace run_closed_loop(const ContinuousModel& plant, const DiscreteOcp& ocp,
                                const SimConfig& cfg, const Eigen::VectorXd& x0);

/// Empirical discretization-error gain: for each t_d in the grid,
/// max over states of ‖μ*₀(x; t_d) − μ*₀(x; t_d_ref)‖ / ‖x‖.
/// States with ‖x‖ < 1e-9 are skipped.
std::vector<std::pair<double, double>> estimate_discretization_gain(
    const std::function<DiscreteOcp(double)>& ocp_for_step, const std::vector<Eigen::VectorXd>& states,
    const std::vector<double>& td_grid, double td_ref, const QpSettings& qp_settings = {});

/// Empirical asymptotic-gain data: disturbance bound ↦ worst tail limsup.
struct IssReport {
    std::vector<std::pair<double, double>> pairs;  ///< (Δ, limsup)
    double decay_rate = 0.0;       ///< λ of the zero-disturbance fit c·e^{−λt}
    double decay_prefactor = 0.0;  ///< c
    bool nominally_stable = false;

    nlohmann::json to_json() const;
};

/// For each bound Δ, run piecewise-constant random disturbances of
/// amplitude Δ across the seeds and record the worst tail limsup (final
/// 25% of t_sim); divergence records +∞. The zero-disturbance run must
/// converge and supplies the exponential decay fit.
IssReport measure_iss(const ContinuousModel& plant, const DiscreteOcp& ocp,
                      const SimConfig& cfg_base, const Eigen::VectorXd& x0,
                      const std::vector<double>& bounds, const std::vector<std::uint64_t>& seeds);

/// Least-squares fit of ‖x(t)‖ ≈ c·e^{−λt} over the decaying range of a
/// trace; returns (λ, c).
std::pair<double, double> fit_exponential_decay(const ClosedLoopTrace& trace);

/// Interpolated quantile, q in [0, 1].
double quantile(std::vector<double> values, double q);

}  // namespace hmpc
