#pragma once

#include <functional>
#include <optional>
#include <utility>

#include <Eigen/Dense>

namespace hmpc {

/// Continuous-time system ẋ = f(x, u) with the origin as equilibrium,
/// optionally carrying analytic Jacobians of f.
struct ContinuousModel {
    int n = 0;  ///< state dimension
    int m = 0;  ///< input dimension
    std::function<Eigen::VectorXd(const Eigen::VectorXd&, const Eigen::VectorXd&)> f;
    /// Optional analytic Jacobians (df/dx, df/du); may be left empty.
    std::function<std::pair<Eigen::MatrixXd, Eigen::MatrixXd>(const Eigen::VectorXd&,
                                                              const Eigen::VectorXd&)>
        jacobians;
};

/// Discrete-time prediction model x⁺ = step(x, u) obtained from a
/// continuous model at step t_d. For LTI systems the pair (A_d, B_d)
/// is stored so the model can be condensed.
struct DiscreteModel {
    int n = 0;
    int m = 0;
    double t_d = 0.0;
    std::function<Eigen::VectorXd(const Eigen::VectorXd&, const Eigen::VectorXd&)> step;
    std::optional<std::pair<Eigen::MatrixXd, Eigen::MatrixXd>> linear_part;
};

/// Classical 4th-order Runge–Kutta step with the input held constant
/// over [0, h]. Throws IntegrationDiverged if the result is non-finite.
Eigen::VectorXd rk4_step(const ContinuousModel& model, const Eigen::VectorXd& x,
                         const Eigen::VectorXd& u, double h);

/// Exact zero-order-hold discretization of ẋ = Ax + Bu:
/// A_d = e^{A t_d}, B_d = (∫₀^{t_d} e^{Aτ} dτ) B, via the augmented
/// matrix exponential.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> discretize_exact_lti(const Eigen::MatrixXd& A,
                                                                 const Eigen::MatrixXd& B,
                                                                 double t_d);

/// Discrete model whose step applies `substeps` RK4 sub-steps of size
/// t_d / substeps with the input held constant.
DiscreteModel discretize_rk4(const ContinuousModel& model, double t_d, int substeps = 1);

/// Discrete LTI model from exact zero-order-hold matrices.
DiscreteModel make_discrete_lti(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, double t_d);

/// Jacobians (A, B) of f at (x, u): analytic when the model provides
/// them, otherwise central finite differences with a relative step.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> linearize(const ContinuousModel& model,
                                                      const Eigen::VectorXd& x,
                                                      const Eigen::VectorXd& u);

/// Jacobians of an arbitrary discrete step map by central finite
/// differences (used to linearize prediction models along trajectories).
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> linearize_step(const DiscreteModel& model,
                                                           const Eigen::VectorXd& x,
                                                           const Eigen::VectorXd& u);

}  // namespace hmpc
