#include "hmpc/models.hpp"

#include <cmath>

namespace hmpc {

using Eigen::MatrixXd;
using Eigen::Vector2d;
using Eigen::VectorXd;

DoubleIntegratorSpec DoubleIntegratorSpec::standard() {
    DoubleIntegratorSpec spec;
    spec.A = MatrixXd{{0.0, 1.0}, {0.0, 0.0}};
    spec.B = MatrixXd{{0.0}, {1.0}};
    spec.x_set = Polyhedron::box(Vector2d(-2.0, -0.4), Vector2d(2.0, 0.4));
    spec.u_set = Polyhedron::box(VectorXd::Constant(1, -4.0), VectorXd::Constant(1, 10.0));
    spec.Q = MatrixXd{{1.0, 0.0}, {0.0, 0.0}};
    spec.R = MatrixXd{{0.04}};
    spec.horizon = 2.0;
    spec.x0 = Vector2d(2.0, 0.0);
    return spec;
}

ContinuousModel double_integrator() {
    const DoubleIntegratorSpec spec = DoubleIntegratorSpec::standard();
    ContinuousModel model;
    model.n = 2;
    model.m = 1;
    const MatrixXd A = spec.A;
    const MatrixXd B = spec.B;
    model.f = [A, B](const VectorXd& x, const VectorXd& u) -> VectorXd { return A * x + B * u; };
    model.jacobians = [A, B](const VectorXd&, const VectorXd&) { return std::make_pair(A, B); };
    return model;
}

namespace {

constexpr double kDeg = M_PI / 180.0;

}  // namespace

LaneChangeSpec LaneChangeSpec::standard(const LaneChangeParams& params) {
    LaneChangeSpec spec;
    spec.params = params;
    // Bounds on y, ψ, δ_f, δ_r; lateral velocity and yaw rate are free.
    spec.x_set.H = MatrixXd::Zero(8, 6);
    spec.x_set.h = VectorXd(8);
    spec.x_set.H(0, 0) = 1.0;
    spec.x_set.h[0] = 10.0;
    spec.x_set.H(1, 0) = -1.0;
    spec.x_set.h[1] = 0.4;
    spec.x_set.H(2, 1) = 1.0;
    spec.x_set.h[2] = 7.0 * kDeg;
    spec.x_set.H(3, 1) = -1.0;
    spec.x_set.h[3] = 7.0 * kDeg;
    spec.x_set.H(4, 4) = 1.0;
    spec.x_set.h[4] = 35.0 * kDeg;
    spec.x_set.H(5, 4) = -1.0;
    spec.x_set.h[5] = 35.0 * kDeg;
    spec.x_set.H(6, 5) = 1.0;
    spec.x_set.h[6] = 4.0 * kDeg;
    spec.x_set.H(7, 5) = -1.0;
    spec.x_set.h[7] = 4.0 * kDeg;
    spec.u_set = Polyhedron::box(Vector2d(-1.2, -0.6), Vector2d(1.2, 0.6));
    spec.Q = MatrixXd::Identity(6, 6);
    spec.R = MatrixXd::Identity(2, 2);
    spec.horizon = 2.0;
    spec.x0 = VectorXd::Zero(6);
    spec.x0[0] = 5.0;
    return spec;
}

ContinuousModel lane_change(const LaneChangeParams& p) {
    ContinuousModel model;
    model.n = 6;
    model.m = 2;
    model.f = [p](const VectorXd& x, const VectorXd& u) -> VectorXd {
        const double psi = x[1];
        const double v = x[2];
        const double omega = x[3];
        const double delta_f = x[4];
        const double delta_r = x[5];
        const double alpha_f = delta_f - (v + p.dist_front * omega) / p.speed;
        const double alpha_r = delta_r - (v - p.dist_rear * omega) / p.speed;
        const double force_f = p.stiffness_front * alpha_f * std::cos(delta_f);
        const double force_r = p.stiffness_rear * alpha_r * std::cos(delta_r);
        VectorXd dx(6);
        dx[0] = p.speed * std::sin(psi) + v * std::cos(psi);
        dx[1] = omega;
        dx[2] = -p.speed * omega + (force_f + force_r + p.wind_force) / p.mass;
        dx[3] = (force_f * p.dist_front - force_r * p.dist_rear) / p.yaw_inertia;
        dx[4] = u[0];
        dx[5] = u[1];
        return dx;
    };
    model.jacobians = [p](const VectorXd& x, const VectorXd&) {
        const double psi = x[1];
        const double v = x[2];
        const double omega = x[3];
        const double delta_f = x[4];
        const double delta_r = x[5];
        const double alpha_f = delta_f - (v + p.dist_front * omega) / p.speed;
        const double alpha_r = delta_r - (v - p.dist_rear * omega) / p.speed;
        const double cf = std::cos(delta_f);
        const double cr = std::cos(delta_r);
        const double sf = std::sin(delta_f);
        const double sr = std::sin(delta_r);

        MatrixXd A = MatrixXd::Zero(6, 6);
        A(0, 1) = p.speed * std::cos(psi) - v * std::sin(psi);
        A(0, 2) = std::cos(psi);
        A(1, 3) = 1.0;
        // v̇ rows: force terms F(α)cos(δ) differentiated through α and δ.
        const double dff_dv = -p.stiffness_front * cf / p.speed;
        const double dfr_dv = -p.stiffness_rear * cr / p.speed;
        const double dff_dw = -p.stiffness_front * p.dist_front * cf / p.speed;
        const double dfr_dw = p.stiffness_rear * p.dist_rear * cr / p.speed;
        const double dff_ddf = p.stiffness_front * (cf - alpha_f * sf);
        const double dfr_ddr = p.stiffness_rear * (cr - alpha_r * sr);
        A(2, 2) = (dff_dv + dfr_dv) / p.mass;
        A(2, 3) = -p.speed + (dff_dw + dfr_dw) / p.mass;
        A(2, 4) = dff_ddf / p.mass;
        A(2, 5) = dfr_ddr / p.mass;
        A(3, 2) = (dff_dv * p.dist_front - dfr_dv * p.dist_rear) / p.yaw_inertia;
        A(3, 3) = (dff_dw * p.dist_front - dfr_dw * p.dist_rear) / p.yaw_inertia;
        A(3, 4) = dff_ddf * p.dist_front / p.yaw_inertia;
        A(3, 5) = -dfr_ddr * p.dist_rear / p.yaw_inertia;

        MatrixXd B = MatrixXd::Zero(6, 2);
        B(4, 0) = 1.0;
        B(5, 1) = 1.0;
        return std::make_pair(A, B);
    };
    return model;
}

}  // namespace hmpc
