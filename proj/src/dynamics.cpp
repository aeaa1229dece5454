#include "hmpc/dynamics.hpp"

#include <cmath>

#include <unsupported/Eigen/MatrixFunctions>

#include "hmpc/errors.hpp"

namespace hmpc {

using Eigen::MatrixXd;
using Eigen::VectorXd;

VectorXd rk4_step(const ContinuousModel& model, const VectorXd& x, const VectorXd& u, double h) {
    const VectorXd k1 = model.f(x, u);
    const VectorXd k2 = model.f(x + 0.5 * h * k1, u);
    const VectorXd k3 = model.f(x + 0.5 * h * k2, u);
    const VectorXd k4 = model.f(x + h * k3, u);
    VectorXd next = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!next.allFinite()) {
        throw IntegrationDiverged("rk4_step produced a non-finite state");
    }
    return next;
}

std::pair<MatrixXd, MatrixXd> discretize_exact_lti(const MatrixXd& A, const MatrixXd& B,
                                                   double t_d) {
    const Eigen::Index n = A.rows();
    const Eigen::Index m = B.cols();
    MatrixXd aug = MatrixXd::Zero(n + m, n + m);
    aug.topLeftCorner(n, n) = A * t_d;
    aug.topRightCorner(n, m) = B * t_d;
    const MatrixXd expm = aug.exp();
    return {expm.topLeftCorner(n, n), expm.topRightCorner(n, m)};
}

DiscreteModel discretize_rk4(const ContinuousModel& model, double t_d, int substeps) {
    DiscreteModel out;
    out.n = model.n;
    out.m = model.m;
    out.t_d = t_d;
    const double h = t_d / substeps;
    out.step = [model, h, substeps](const VectorXd& x, const VectorXd& u) {
        VectorXd state = x;
        for (int i = 0; i < substeps; ++i) {
            state = rk4_step(model, state, u, h);
        }
        return state;
    };
    return out;
}

DiscreteModel make_discrete_lti(const MatrixXd& A, const MatrixXd& B, double t_d) {
    auto [Ad, Bd] = discretize_exact_lti(A, B, t_d);
    DiscreteModel out;
    out.n = static_cast<int>(A.rows());
    out.m = static_cast<int>(B.cols());
    out.t_d = t_d;
    out.step = [Ad, Bd](const VectorXd& x, const VectorXd& u) -> VectorXd {
        return Ad * x + Bd * u;
    };
    out.linear_part = std::make_pair(Ad, Bd);
    return out;
}

namespace {

// Central differences with per-component relative step.
template <typename Fn>
std::pair<MatrixXd, MatrixXd> finite_difference_jacobians(const Fn& fn, const VectorXd& x,
                                                          const VectorXd& u, int n) {
    MatrixXd A(n, x.size());
    MatrixXd B(n, u.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double eps = 1e-6 * (1.0 + std::abs(x[i]));
        VectorXd xp = x, xm = x;
        xp[i] += eps;
        xm[i] -= eps;
        A.col(i) = (fn(xp, u) - fn(xm, u)) / (2.0 * eps);
    }
    for (Eigen::Index i = 0; i < u.size(); ++i) {
        const double eps = 1e-6 * (1.0 + std::abs(u[i]));
        VectorXd up = u, um = u;
        up[i] += eps;
        um[i] -= eps;
        B.col(i) = (fn(x, up) - fn(x, um)) / (2.0 * eps);
    }
    return {A, B};
}

}  // namespace

std::pair<MatrixXd, MatrixXd> linearize(const ContinuousModel& model, const VectorXd& x,
                                        const VectorXd& u) {
    if (model.jacobians) {
        return model.jacobians(x, u);
    }
    return finite_difference_jacobians(model.f, x, u, model.n);
}

std::pair<MatrixXd, MatrixXd> linearize_step(const DiscreteModel& model, const VectorXd& x,
                                             const VectorXd& u) {
    if (model.linear_part) {
        return *model.linear_part;
    }
    return finite_difference_jacobians(model.step, x, u, model.n);
}

}  // namespace hmpc
