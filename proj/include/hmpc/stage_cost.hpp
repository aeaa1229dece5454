#pragma once

#include <Eigen/Dense>

namespace hmpc {

/// Quadratic stage cost l(x, u) = xᵀQx + uᵀRu with Q ⪰ 0, R ≻ 0.
/// The discretized cost is l_d = t_d · l (t_d supplied by the OCP).
struct StageCost {
    Eigen::MatrixXd Q;
    Eigen::MatrixXd R;

    double l(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const {
        return x.dot(Q * x) + u.dot(R * u);
    }
};

}  // namespace hmpc
