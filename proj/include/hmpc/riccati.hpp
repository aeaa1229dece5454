#pragma once

#include <Eigen/Dense>

namespace hmpc {

/// Solve AᵀX + XA = C for symmetric X (A must have no eigenvalue pair
/// summing to zero; Hurwitz A qualifies). Kronecker-vectorized dense solve.
Eigen::MatrixXd solve_lyapunov_continuous(const Eigen::MatrixXd& A, const Eigen::MatrixXd& C);

/// Stabilizing solution P of AᵀP + PA − PBR⁻¹BᵀP + Q = 0 by
/// Newton–Kleinman iteration. The initial stabilizing gain is found by
/// a Lyapunov-based construction with eigenvalue shifting; throws
/// NotStabilizable if the bounded search fails.
Eigen::MatrixXd solve_care(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                           const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R);

/// K = R⁻¹BᵀP. Throws SingularR when R is not invertible.
Eigen::MatrixXd lqr_gain(const Eigen::MatrixXd& P, const Eigen::MatrixXd& B,
                         const Eigen::MatrixXd& R);

/// Frobenius norm of the Riccati residual AᵀP + PA − PBR⁻¹BᵀP + Q.
double care_residual(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                     const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R,
                     const Eigen::MatrixXd& P);

}  // namespace hmpc
