#pragma once

#include <optional>

#include <Eigen/Dense>

#include "hmpc/dynamics.hpp"
#include "hmpc/polyhedron.hpp"
#include "hmpc/qp.hpp"
#include "hmpc/stage_cost.hpp"

namespace hmpc {

/// Finite-horizon discretized optimal control problem over N steps of
/// size t_d (so N·t_d is the prediction horizon): stage cost t_d·l,
/// terminal cost ξ_NᵀPξ_N, input set per stage, state set at the
/// prediction nodes, and an optional terminal set.
struct DiscreteOcp {
    DiscreteModel model_d;
    StageCost cost;
    Eigen::MatrixXd P;
    int N = 0;
    Polyhedron x_set;
    Polyhedron u_set;
    std::optional<Polyhedron> terminal_set;
    /// true: state constraints at stages 1..N; false: 1..N−1 (with the
    /// terminal stage governed by terminal_set alone).
    bool state_constraint_at_final = true;
    /// Terminal gain used to fill shifted warm starts (optional).
    std::optional<Eigen::MatrixXd> terminal_gain;

    double horizon() const { return N * model_d.t_d; }
};

enum class OcpStatus { Optimal, MaxIter, Infeasible };

struct OcpSolution {
    Eigen::MatrixXd mu;  ///< N×m optimal input sequence
    Eigen::MatrixXd xi;  ///< (N+1)×n predicted states (row 0 = x)
    double value = 0.0;
    OcpStatus status = OcpStatus::MaxIter;
    int iterations = 0;
    double kkt_residual = 0.0;
    double wall_time = 0.0;           ///< seconds, full build + solve
    Eigen::VectorXd ineq_duals;       ///< condensed-QP duals (linear path)
};

struct OcpWarmStart {
    Eigen::MatrixXd mu;
    std::optional<Eigen::VectorXd> lam;  ///< inequality duals of the condensed QP
};

/// Condense the linear OCP at initial state x into a dense QP over the
/// stacked input sequence z = (μ_0, ..., μ_{N−1}). Requires
/// model_d.linear_part; throws NotLinear otherwise.
QuadProg condense(const DiscreteOcp& ocp, const Eigen::VectorXd& x);

/// Objective of the OCP for a given input sequence, evaluated by rolling
/// out the dynamics.
double rollout_objective(const DiscreteOcp& ocp, const Eigen::VectorXd& x,
                         const Eigen::MatrixXd& mu);

/// condense → solve_qp → expand. Wall time covers the full build+solve.
OcpSolution solve_linear_ocp(const DiscreteOcp& ocp, const Eigen::VectorXd& x,
                             const std::optional<OcpWarmStart>& warm = std::nullopt,
                             const QpSettings& qp_settings = {});

struct SqpSettings {
    int max_iter = 50;
    double step_tol = 1e-6;
    double kkt_tol = 1e-5;
    double trust_radius = 0.5;
    QpSettings qp;
};

/// Sequential quadratic programming on the rolled-out input sequence:
/// linearize the step map along the trajectory, solve a trust-region QP
/// with elastic state constraints, accept by an ℓ₁ merit function.
OcpSolution solve_nonlinear_ocp(const DiscreteOcp& ocp, const Eigen::VectorXd& x,
                                const std::optional<OcpWarmStart>& warm = std::nullopt,
                                const SqpSettings& settings = {});

/// Inputs shifted one stage; the final stage is duplicated, or filled
/// with −K ξ_N when a terminal gain is supplied.
OcpWarmStart shift_warm_start(const OcpSolution& prev,
                              const std::optional<Eigen::MatrixXd>& terminal_gain = std::nullopt);

}  // namespace hmpc
