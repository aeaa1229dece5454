#pragma once

#include <Eigen/Dense>

#include "hmpc/polyhedron.hpp"

namespace hmpc {

enum class LpStatus { Optimal, Unbounded, Infeasible };

struct LpResult {
    LpStatus status = LpStatus::Infeasible;
    Eigen::VectorXd z;
    double value = 0.0;
};

/// Maximize cᵀz over {z : Hz ≤ h}. Dense two-phase simplex with Bland's
/// rule; deterministic.
LpResult solve_lp(const Eigen::VectorXd& c, const Polyhedron& poly);

/// Feasibility of {z : A z ≤ b, G z = d} via the Phase-1 problem.
/// Either of A or G may have zero rows.
bool linear_constraints_feasible(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                                 const Eigen::MatrixXd& G, const Eigen::VectorXd& d);

}  // namespace hmpc
