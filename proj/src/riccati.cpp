#include "hmpc/riccati.hpp"

#include <cmath>

#include "hmpc/errors.hpp"

namespace hmpc {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

double max_real_eigenvalue(const MatrixXd& A) {
    const Eigen::EigenSolver<MatrixXd> eig(A);
    return eig.eigenvalues().real().maxCoeff();
}

bool is_hurwitz(const MatrixXd& A) { return max_real_eigenvalue(A) < -1e-12; }

// Solve M X + X Mᵀ = C by Kronecker vectorization (small systems).
MatrixXd solve_sylvester_symmetric(const MatrixXd& M, const MatrixXd& C) {
    const Eigen::Index n = M.rows();
    MatrixXd kron = MatrixXd::Zero(n * n, n * n);
    const MatrixXd eye = MatrixXd::Identity(n, n);
    // vec(M X) = (I ⊗ M) vec X, vec(X Mᵀ) = (M ⊗ I) vec X.
    for (Eigen::Index j = 0; j < n; ++j) {
        kron.block(j * n, j * n, n, n) += M;
    }
    for (Eigen::Index bi = 0; bi < n; ++bi) {
        for (Eigen::Index bj = 0; bj < n; ++bj) {
            kron.block(bi * n, bj * n, n, n) += M(bi, bj) * eye;
        }
    }
    VectorXd vecC(n * n);
    for (Eigen::Index j = 0; j < n; ++j) {
        vecC.segment(j * n, n) = C.col(j);
    }
    const VectorXd vecX = kron.partialPivLu().solve(vecC);
    MatrixXd X(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        X.col(j) = vecX.segment(j * n, n);
    }
    return 0.5 * (X + X.transpose());
}

// Stabilizing gain search: K = BᵀX⁻¹ with (A + βI)X + X(A + βI)ᵀ = 2BBᵀ
// makes A − BK Hurwitz for β beyond the spectral abscissa (Bass'
// construction); β is grown over a bounded set of attempts.
MatrixXd find_stabilizing_gain(const MatrixXd& A, const MatrixXd& B) {
    const Eigen::Index n = A.rows();
    const Eigen::Index m = B.cols();
    if (is_hurwitz(A)) {
        return MatrixXd::Zero(m, n);
    }
    double beta = std::max(1.0, 1.1 * A.norm());
    for (int attempt = 0; attempt < 12; ++attempt) {
        const MatrixXd shifted = A + beta * MatrixXd::Identity(n, n);
        const MatrixXd X = solve_sylvester_symmetric(shifted, 2.0 * B * B.transpose());
        const Eigen::FullPivLU<MatrixXd> lu(X);
        if (lu.isInvertible()) {
            const MatrixXd K = B.transpose() * lu.inverse();
            if (is_hurwitz(A - B * K)) {
                return K;
            }
        }
        beta *= 2.0;
    }
    throw NotStabilizable("no stabilizing gain found; is (A, B) stabilizable?");
}

}  // namespace

MatrixXd solve_lyapunov_continuous(const MatrixXd& A, const MatrixXd& C) {
    // AᵀX + XA = C  ⇔  M X + X Mᵀ = C with M = Aᵀ.
    return solve_sylvester_symmetric(A.transpose(), C);
}

MatrixXd solve_care(const MatrixXd& A, const MatrixXd& B, const MatrixXd& Q, const MatrixXd& R) {
    const Eigen::LLT<MatrixXd> rchol(R);
    if (rchol.info() != Eigen::Success) {
        throw SingularR("R must be positive definite");
    }

    MatrixXd K = find_stabilizing_gain(A, B);
    MatrixXd P = MatrixXd::Zero(A.rows(), A.cols());
    const int max_iter = 60;
    for (int it = 0; it < max_iter; ++it) {
        const MatrixXd Acl = A - B * K;
        const MatrixXd rhs = -(Q + K.transpose() * R * K);
        const MatrixXd P_next = solve_lyapunov_continuous(Acl, rhs);
        const MatrixXd K_next = rchol.solve(B.transpose() * P_next);
        const double delta = (P_next - P).norm();
        P = P_next;
        K = K_next;
        if (delta <= 1e-13 * std::max(1.0, P.norm())) {
            break;
        }
    }
    return 0.5 * (P + P.transpose());
}

MatrixXd lqr_gain(const MatrixXd& P, const MatrixXd& B, const MatrixXd& R) {
    const Eigen::FullPivLU<MatrixXd> lu(R);
    if (!lu.isInvertible()) {
        throw SingularR("R is not invertible");
    }
    return lu.solve(B.transpose() * P);
}

double care_residual(const MatrixXd& A, const MatrixXd& B, const MatrixXd& Q, const MatrixXd& R,
                     const MatrixXd& P) {
    const MatrixXd res =
        A.transpose() * P + P * A - P * B * R.llt().solve(B.transpose() * P) + Q;
    return res.norm();
}

}  // namespace hmpc
