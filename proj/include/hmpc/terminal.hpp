#pragma once

#include <cstdint>

#include <Eigen/Dense>

#include "hmpc/dynamics.hpp"
#include "hmpc/polyhedron.hpp"
#include "hmpc/stage_cost.hpp"

namespace hmpc {

/// Terminal cost xᵀPx, terminal controller κ(x) = −Kx, and terminal set Ω.
struct TerminalIngredients {
    Eigen::MatrixXd P;
    Eigen::MatrixXd K;
    Polyhedron omega;
};

/// States whose terminal control −Kx is admissible: {x : Hx x ≤ hx and
/// H_u(−Kx) ≤ h_u}.
Polyhedron gain_admissible_states(const Polyhedron& x_set, const Polyhedron& u_set,
                                  const Eigen::MatrixXd& K);

/// Build P (Riccati), K (LQR), and Ω (maximal admissible set of the
/// zero-order-hold closed loop A_d − B_d K at step t_d_set).
TerminalIngredients make_terminal_ingredients(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                                              const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R,
                                              const Polyhedron& x_set, const Polyhedron& u_set,
                                              double t_d_set, int max_iter = 500);

/// Sampled verification of the terminal-ingredient conditions over Ω:
/// (a) input admissibility of κ, (b) one-step Euler containment in Ω,
/// (c) decrease ∇J(x)ᵀf(x, κ(x)) + l(x, κ(x)) ≤ 0.
/// Worst violations are reported; `passed(tol)` thresholds all three.
struct TerminalCheckReport {
    int samples = 0;
    double worst_input_violation = 0.0;
    double worst_containment_violation = 0.0;
    double worst_decrease_violation = 0.0;

    bool passed(double tol) const {
        return worst_input_violation <= tol && worst_containment_violation <= tol &&
               worst_decrease_violation <= tol;
    }
};

TerminalCheckReport verify_terminal_conditions(const ContinuousModel& model,
                                               const TerminalIngredients& ti,
                                               const StageCost& cost, const Polyhedron& u_set,
                                               int n_samples, std::uint64_t seed = 0,
                                               double euler_step = 1e-4);

}  // namespace hmpc
