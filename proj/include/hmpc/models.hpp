#pragma once

#include <Eigen/Dense>

#include "hmpc/dynamics.hpp"
#include "hmpc/polyhedron.hpp"

namespace hmpc {

/// Planar double integrator: ẋ₁ = x₂, ẋ₂ = u (+ input-additive
/// disturbance through the same channel), with the benchmark constraint
/// sets and weights.
struct DoubleIntegratorSpec {
    Eigen::MatrixXd A;
    Eigen::MatrixXd B;
    Polyhedron x_set;  ///< |x₁| ≤ 2, |x₂| ≤ 0.4
    Polyhedron u_set;  ///< −4 ≤ u ≤ 10
    Eigen::MatrixXd Q;  ///< diag(1, 0)
    Eigen::MatrixXd R;  ///< 0.04
    double horizon = 2.0;
    Eigen::VectorXd x0;  ///< [2, 0]

    static DoubleIntegratorSpec standard();
};

ContinuousModel double_integrator();

/// Physical parameters of the lateral lane-change model. Defaults are
/// nominal sedan values; all configurable.
struct LaneChangeParams {
    double mass = 1500.0;            ///< kg
    double yaw_inertia = 2500.0;     ///< kg·m²
    double dist_front = 1.1;         ///< m, CoG to front axle
    double dist_rear = 1.6;          ///< m, CoG to rear axle
    double speed = 20.0;             ///< m/s, constant longitudinal speed
    double stiffness_front = 6.0e4;  ///< N/rad
    double stiffness_rear = 6.0e4;   ///< N/rad
    double wind_force = 0.0;         ///< N, lateral exogenous force
};

/// State x = [y, ψ, v, ω, δ_f, δ_r]: lateral position, yaw angle,
/// lateral velocity, yaw rate, front/rear steering angles (radians).
/// Input u = [δ̇_f, δ̇_r]. Linear tire forces F(α) = C·α with slip
/// angles α_f = δ_f − (v + l_f ω)/s, α_r = δ_r − (v − l_r ω)/s.
struct LaneChangeSpec {
    LaneChangeParams params;
    Polyhedron x_set;  ///< y ∈ [−0.4, 10], |ψ| ≤ 7°, |δ_f| ≤ 35°, |δ_r| ≤ 4°
    Polyhedron u_set;  ///< |u₁| ≤ 1.2, |u₂| ≤ 0.6
    Eigen::MatrixXd Q;  ///< I₆
    Eigen::MatrixXd R;  ///< I₂
    double horizon = 2.0;
    Eigen::VectorXd x0;  ///< [5, 0, 0, 0, 0, 0]

    static LaneChangeSpec standard(const LaneChangeParams& params = {});
};

ContinuousModel lane_change(const LaneChangeParams& params = {});

}  // namespace hmpc
