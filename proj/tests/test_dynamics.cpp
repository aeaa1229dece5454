#include <cmath>

#include "doctest.h"

#include "hmpc/dynamics.hpp"
#include "hmpc/errors.hpp"
#include "hmpc/models.hpp"

using Eigen::MatrixXd;
using Eigen::Vector2d;
using Eigen::VectorXd;
using namespace hmpc;

namespace {

ContinuousModel scalar_model(const std::function<double(double, double)>& f) {
    ContinuousModel m;
    m.n = 1;
    m.m = 1;
    m.f = [f](const VectorXd& x, const VectorXd& u) {
        return VectorXd::Constant(1, f(x[0], u[0]));
    };
    return m;
}

VectorXd scalar(double v) { return VectorXd::Constant(1, v); }

}  // namespace

TEST_CASE("rk4 step: zero dynamics is the identity") {
    const auto m = scalar_model([](double, double) { return 0.0; });
    CHECK(rk4_step(m, scalar(1.0), scalar(0.0), 0.1)[0] == 1.0);
}

TEST_CASE("rk4 step matches its 4th-order polynomial on exponential decay") {
    const auto m = scalar_model([](double x, double) { return -x; });
    const double h = 0.1;
    const double result = rk4_step(m, scalar(1.0), scalar(0.0), h)[0];
    const double poly = 1.0 - h + h * h / 2.0 - h * h * h / 6.0 + h * h * h * h / 24.0;
    CHECK(result == doctest::Approx(poly).epsilon(1e-15));
    CHECK(result == doctest::Approx(0.9048375).epsilon(1e-9));
    CHECK(std::abs(result - std::exp(-h)) <= 2e-7);
}

TEST_CASE("rk4 step is exact for the double integrator with constant input") {
    const auto m = double_integrator();
    const VectorXd next = rk4_step(m, Vector2d(0.0, 1.0), scalar(0.0), 0.5);
    CHECK(next[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(next[1] == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("rk4 step reports divergence on non-finite states") {
    const auto m = scalar_model([](double x, double) { return x * x; });
    CHECK_THROWS_AS(rk4_step(m, scalar(1e200), scalar(0.0), 1.0), IntegrationDiverged);
}

TEST_CASE("exact discretization of the nilpotent double integrator") {
    const MatrixXd A{{0.0, 1.0}, {0.0, 0.0}};
    const MatrixXd B{{0.0}, {1.0}};
    const auto [Ad, Bd] = discretize_exact_lti(A, B, 0.4);
    CHECK(Ad(0, 0) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(Ad(0, 1) == doctest::Approx(0.4).epsilon(1e-14));
    CHECK(Ad(1, 0) == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(Ad(1, 1) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(Bd(0, 0) == doctest::Approx(0.08).epsilon(1e-13));
    CHECK(Bd(1, 0) == doctest::Approx(0.4).epsilon(1e-14));
}

TEST_CASE("exact discretization: pure integrator and scalar decay") {
    {
        const auto [Ad, Bd] = discretize_exact_lti(MatrixXd::Zero(1, 1), MatrixXd::Ones(1, 1), 0.02);
        CHECK(Ad(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
        CHECK(Bd(0, 0) == doctest::Approx(0.02).epsilon(1e-14));
    }
    {
        const auto [Ad, Bd] =
            discretize_exact_lti(-MatrixXd::Ones(1, 1), MatrixXd::Ones(1, 1), 0.5);
        CHECK(Ad(0, 0) == doctest::Approx(std::exp(-0.5)).epsilon(1e-13));
        CHECK(Bd(0, 0) == doctest::Approx(1.0 - std::exp(-0.5)).epsilon(1e-13));
    }
}

TEST_CASE("discretize_rk4 with one substep is a single rk4 step") {
    const auto m = lane_change();
    const auto d = discretize_rk4(m, 0.2, 1);
    VectorXd x(6);
    x << 5.0, 0.01, 0.1, 0.02, 0.01, 0.0;
    const VectorXd u = Vector2d(0.1, -0.05);
    CHECK((d.step(x, u) - rk4_step(m, x, u, 0.2)).norm() == 0.0);
}

TEST_CASE("rk4 discretization of the double integrator equals exact ZOH") {
    const auto spec = DoubleIntegratorSpec::standard();
    const auto d_rk4 = discretize_rk4(double_integrator(), 0.4, 1);
    const auto d_exact = make_discrete_lti(spec.A, spec.B, 0.4);
    const Vector2d x(1.3, -0.2);
    const VectorXd u = scalar(2.0);
    CHECK((d_rk4.step(x, u) - d_exact.step(x, u)).norm() <= 1e-14);
}

TEST_CASE("lane-change discretization self-consistency across substeps") {
    const auto m = lane_change();
    VectorXd x0(6);
    x0 << 5.0, 0.0, 0.0, 0.0, 0.0, 0.0;
    const VectorXd u = Vector2d(0.5, -0.2);
    const VectorXd ref = discretize_rk4(m, 0.2, 64).step(x0, u);
    const double err1 = (discretize_rk4(m, 0.2, 1).step(x0, u) - ref).norm() / ref.norm();
    const double err4 = (discretize_rk4(m, 0.2, 4).step(x0, u) - ref).norm() / ref.norm();
    CHECK(err4 <= 1e-4);
    CHECK(err1 <= 1e-2);
    // 4th-order signature: quartering the substep shrinks the error by
    // roughly 4⁴.
    CHECK(err4 <= err1 / 100.0);
}

TEST_CASE("linearize returns analytic Jacobians when present") {
    const auto m = double_integrator();
    const auto [A, B] = linearize(m, Vector2d(0.7, -0.1), scalar(3.0));
    CHECK(A(0, 1) == 1.0);
    CHECK(A(1, 0) == 0.0);
    CHECK(B(1, 0) == 1.0);
}

TEST_CASE("linearize falls back to central differences") {
    const auto m = scalar_model([](double x, double) { return -x * x * x; });
    const auto [A, B] = linearize(m, scalar(1.0), scalar(0.0));
    CHECK(A(0, 0) == doctest::Approx(-3.0).epsilon(1e-8));
    CHECK(B(0, 0) == doctest::Approx(0.0).epsilon(1e-8));
}

TEST_CASE("consistency: (step(x,u) - x)/t_d approaches f(x,u)") {
    const std::vector<double> grid{0.4, 0.2, 0.1, 0.05, 0.025};

    const auto check_model = [&](const ContinuousModel& model, const VectorXd& x,
                                 const VectorXd& u, bool exact_zoh) {
        std::vector<double> err;
        for (double td : grid) {
            DiscreteModel d;
            if (exact_zoh) {
                const auto [A, B] = linearize(model, VectorXd::Zero(model.n),
                                              VectorXd::Zero(model.m));
                d = make_discrete_lti(A, B, td);
            } else {
                d = discretize_rk4(model, td, 1);
            }
            err.push_back(((d.step(x, u) - x) / td - model.f(x, u)).norm());
        }
        for (std::size_t i = 1; i < err.size(); ++i) {
            CHECK(err[i] < err[i - 1]);
        }
        CHECK(err.back() <= err.front() / 10.0);
    };

    check_model(double_integrator(), Vector2d(1.0, 0.2), scalar(2.0), true);
    VectorXd x(6);
    x << 2.0, 0.05, 0.3, 0.05, 0.1, 0.02;
    check_model(lane_change(), x, Vector2d(0.4, -0.1), false);
}

TEST_CASE("equilibrium preservation for the shipped models") {
    {
        const auto spec = DoubleIntegratorSpec::standard();
        const auto d = make_discrete_lti(spec.A, spec.B, 0.4);
        CHECK(d.step(Vector2d::Zero(), scalar(0.0)).norm() <= 1e-12);
    }
    {
        const auto d = discretize_rk4(lane_change(), 0.2, 4);
        CHECK(d.step(VectorXd::Zero(6), Vector2d::Zero()).norm() <= 1e-12);
        CHECK(lane_change().f(VectorXd::Zero(6), Vector2d::Zero()).norm() <= 1e-12);
    }
    CHECK(double_integrator().f(Vector2d::Zero(), scalar(0.0)).norm() <= 1e-12);
}
