#pragma once

#include <optional>

#include <Eigen/Dense>

namespace hmpc {

/// Convex quadratic program
///   min ½ zᵀH z + gᵀz   s.t.  A_in z ≤ b_in,  A_eq z = b_eq.
/// H must be symmetric positive semidefinite; the solver contract is
/// stated for strictly convex H. Empty (0-row) constraint blocks are
/// allowed.
struct QuadProg {
    Eigen::MatrixXd H;
    Eigen::VectorXd g;
    Eigen::MatrixXd A_in;
    Eigen::VectorXd b_in;
    Eigen::MatrixXd A_eq;
    Eigen::VectorXd b_eq;

    int vars() const { return static_cast<int>(H.rows()); }
    int num_ineq() const { return static_cast<int>(A_in.rows()); }
    int num_eq() const { return static_cast<int>(A_eq.rows()); }
};

enum class QpStatus { Optimal, MaxIter, Infeasible };

struct QpSolution {
    Eigen::VectorXd z;    ///< primal
    Eigen::VectorXd lam;  ///< inequality duals, ≥ 0
    Eigen::VectorXd nu;   ///< equality duals
    QpStatus status = QpStatus::MaxIter;
    int iterations = 0;
    double kkt_residual = 0.0;
    double wall_time = 0.0;  ///< seconds
};

struct QpSettings {
    double tol = 1e-6;
    int max_iter = 4000;
};

struct QpWarmStart {
    Eigen::VectorXd z;
    Eigen::VectorXd lam;
};

/// Semismooth Newton method on the Fischer–Burmeister reformulation of
/// the KKT conditions, with Armijo damping. On Optimal return the
/// stationarity, feasibility, and complementarity residuals are each
/// ≤ tol. Infeasibility is certified with a Phase-1 check when the
/// iteration stalls. Deterministic: identical inputs give bit-identical
/// outputs (wall_time excluded).
QpSolution solve_qp(const QuadProg& qp, const QpSettings& settings = {},
                    const std::optional<QpWarmStart>& warm = std::nullopt);

/// max of stationarity, primal feasibility, complementarity, and dual
/// negativity residuals at (z, lam, nu).
double kkt_residual(const QuadProg& qp, const Eigen::VectorXd& z, const Eigen::VectorXd& lam,
                    const Eigen::VectorXd& nu);

}  // namespace hmpc
