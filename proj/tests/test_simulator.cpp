#include <cmath>
#include <cstring>
#include <sstream>

#include "doctest.h"

#include "hmpc/dynamics.hpp"
#include "hmpc/errors.hpp"
#include "hmpc/models.hpp"
#include "hmpc/riccati.hpp"
#include "hmpc/simulator.hpp"

using Eigen::MatrixXd;
using Eigen::Vector2d;
using Eigen::VectorXd;
using namespace hmpc;

namespace {

Polyhedron unconstrained(int dim) { return Polyhedron{MatrixXd(0, dim), VectorXd(0)}; }

// Scalar plant with a cost that makes u* ≡ 0, so the loop is autonomous.
struct ScalarSetup {
    ContinuousModel plant;
    DiscreteOcp ocp;
};

ScalarSetup autonomous_scalar(const std::function<double(double)>& f, double t_d, int N) {
    ScalarSetup s;
    s.plant.n = 1;
    s.plant.m = 1;
    s.plant.f = [f](const VectorXd& x, const VectorXd& u) {
        return VectorXd::Constant(1, f(x[0]) + 0.0 * u[0]);
    };
    s.ocp.model_d = discretize_rk4(s.plant, t_d, 1);
    s.ocp.cost = StageCost{MatrixXd::Zero(1, 1), MatrixXd::Ones(1, 1)};
    s.ocp.P = MatrixXd::Zero(1, 1);
    s.ocp.N = N;
    s.ocp.x_set = unconstrained(1);
    s.ocp.u_set = unconstrained(1);
    return s;
}

DiscreteOcp di_ocp(double t_d) {
    const auto spec = DoubleIntegratorSpec::standard();
    DiscreteOcp ocp;
    ocp.model_d = make_discrete_lti(spec.A, spec.B, t_d);
    ocp.cost = StageCost{spec.Q, spec.R};
    ocp.P = solve_care(spec.A, spec.B, spec.Q, spec.R);
    ocp.N = static_cast<int>(std::round(2.0 / t_d));
    ocp.x_set = spec.x_set;
    ocp.u_set = spec.u_set;
    ocp.terminal_gain = lqr_gain(ocp.P, spec.B, spec.R);
    return ocp;
}

SimConfig di_config(Scheme scheme, double t_s, double t_d, double t_sim) {
    SimConfig cfg;
    cfg.t_s = t_s;
    cfg.t_d = t_d;
    cfg.t_sim = t_sim;
    cfg.scheme = scheme;
    return cfg;
}

}  // namespace

TEST_CASE("sim config validation enforces the timing and label rules") {
    CHECK_THROWS_AS(di_config(Scheme::HMPC, 0.4, 0.4, 10.0).validate(), ConfigError);
    CHECK_THROWS_AS(di_config(Scheme::MPC1, 0.02, 0.4, 10.0).validate(), ConfigError);
    CHECK_THROWS_AS(di_config(Scheme::Custom, 0.5, 0.4, 10.0).validate(), ConfigError);
    CHECK_NOTHROW(di_config(Scheme::HMPC, 0.02, 0.4, 10.0).validate());
    SimConfig bad_tp = di_config(Scheme::Custom, 0.4, 0.4, 10.0);
    bad_tp.t_p = 0.15;  // not an integer divisor of t_s
    CHECK_THROWS_AS(bad_tp.validate(), ConfigError);
}

TEST_CASE("autonomous decay matches the exponential to integrator accuracy") {
    const auto s = autonomous_scalar([](double x) { return -x; }, 0.1, 5);
    const SimConfig cfg = di_config(Scheme::Custom, 0.1, 0.1, 1.0);
    const ClosedLoopTrace trace = run_closed_loop(s.plant, s.ocp, cfg, VectorXd::Ones(1));
    REQUIRE(trace.status == TraceStatus::Completed);
    CHECK(trace.inputs.cwiseAbs().maxCoeff() <= 1e-12);
    for (Eigen::Index i = 0; i < trace.states.rows(); ++i) {
        CHECK(trace.states(i, 0) ==
              doctest::Approx(std::exp(-trace.times[i])).epsilon(1e-9));
    }
}

TEST_CASE("traces replay exactly from their stored inputs") {
    const ContinuousModel plant = double_integrator();
    const DiscreteOcp ocp = di_ocp(0.4);
    SimConfig cfg = di_config(Scheme::HMPC, 0.02, 0.4, 4.0);
    cfg.disturbance = DisturbanceSignal::piecewise_random(0.5, 0.5, 1);
    const ClosedLoopTrace trace = run_closed_loop(plant, ocp, cfg, Vector2d(2.0, 0.0));
    REQUIRE(trace.status == TraceStatus::Completed);
    const double t_p = cfg.plant_step();
    for (int i = 0; i < trace.ticks(); ++i) {
        const VectorXd replayed =
            rk4_step(plant, trace.states.row(i).transpose(),
                     trace.inputs.row(i).transpose() + trace.disturbances.row(i).transpose(),
                     t_p);
        CHECK((replayed - trace.states.row(i + 1).transpose()).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("identical configs reproduce bit-identical traces") {
    const ContinuousModel plant = double_integrator();
    const DiscreteOcp ocp = di_ocp(0.4);
    SimConfig cfg = di_config(Scheme::HMPC, 0.02, 0.4, 4.0);
    cfg.disturbance = DisturbanceSignal::piecewise_random(0.5, 0.5, 3);
    const ClosedLoopTrace a = run_closed_loop(plant, ocp, cfg, Vector2d(2.0, 0.0));
    const ClosedLoopTrace b = run_closed_loop(plant, ocp, cfg, Vector2d(2.0, 0.0));
    REQUIRE(a.states.rows() == b.states.rows());
    CHECK(std::memcmp(a.states.data(), b.states.data(),
                      sizeof(double) * a.states.size()) == 0);
    CHECK(std::memcmp(a.inputs.data(), b.inputs.data(), sizeof(double) * a.inputs.size()) == 0);
}

TEST_CASE("inputs hold constant between samples") {
    const ContinuousModel plant = double_integrator();
    const DiscreteOcp ocp = di_ocp(0.4);
    SimConfig cfg = di_config(Scheme::HMPC, 0.02, 0.4, 2.0);
    cfg.disturbance = DisturbanceSignal::piecewise_random(0.5, 0.5, 1);
    const ClosedLoopTrace trace = run_closed_loop(plant, ocp, cfg, Vector2d(2.0, 0.0));
    const int steps_per_sample = static_cast<int>(std::round(cfg.t_s / cfg.plant_step()));
    for (int i = 0; i < trace.ticks(); ++i) {
        const int holder = (i / steps_per_sample) * steps_per_sample;
        CHECK(trace.inputs(i, 0) == trace.inputs(holder, 0));
    }
}

TEST_CASE("refining the plant step converges at fourth order") {
    // Undamped oscillator: integrator error accumulates along the whole
    // horizon, so halving t_p divides the deviation by ≈ 2⁴.
    ContinuousModel plant;
    plant.n = 2;
    plant.m = 1;
    plant.f = [](const VectorXd& x, const VectorXd& u) {
        return (VectorXd(2) << x[1], -x[0] + 0.0 * u[0]).finished();
    };
    DiscreteOcp ocp;
    ocp.model_d = discretize_rk4(plant, 0.2, 1);
    ocp.cost = StageCost{MatrixXd::Zero(2, 2), MatrixXd::Ones(1, 1)};
    ocp.P = MatrixXd::Zero(2, 2);
    ocp.N = 5;
    ocp.x_set = unconstrained(2);
    ocp.u_set = unconstrained(1);

    const auto final_state = [&](double t_p) {
        SimConfig cfg = di_config(Scheme::Custom, 0.2, 0.2, 2.0);
        cfg.t_p = t_p;
        const ClosedLoopTrace trace = run_closed_loop(plant, ocp, cfg, Vector2d(1.0, 0.0));
        return trace.states(trace.states.rows() - 1, 0);
    };
    const double ref = final_state(0.2 / 512.0);
    const double dev_h = std::abs(final_state(0.2 / 2.0) - ref);
    const double dev_h2 = std::abs(final_state(0.2 / 4.0) - ref);
    const double ratio = dev_h / dev_h2;
    CHECK(ratio >= 12.0);
    CHECK(ratio <= 20.0);
}

TEST_CASE("the sampled-data loop with t_s = t_d degenerates to the classical loop") {
    const ContinuousModel plant = double_integrator();
    const DiscreteOcp ocp = di_ocp(0.4);
    SimConfig labeled = di_config(Scheme::MPC2, 0.4, 0.4, 4.0);
    labeled.disturbance = DisturbanceSignal::piecewise_random(0.5, 0.5, 9);
    SimConfig custom = labeled;
    custom.scheme = Scheme::Custom;
    const ClosedLoopTrace a = run_closed_loop(plant, ocp, labeled, Vector2d(2.0, 0.0));
    const ClosedLoopTrace b = run_closed_loop(plant, ocp, custom, Vector2d(2.0, 0.0));
    CHECK(std::memcmp(a.states.data(), b.states.data(),
                      sizeof(double) * a.states.size()) == 0);
}

TEST_CASE("discretization gain: identical problems give zero") {
    const auto family = [&](double td) { return di_ocp(td); };
    const std::vector<VectorXd> states{Vector2d(0.5, 0.1), Vector2d(-0.3, 0.05)};
    const auto curve = estimate_discretization_gain(family, states, {0.1}, 0.1);
    REQUIRE(curve.size() == 1);
    CHECK(curve[0].second == 0.0);
}

TEST_CASE("discretization gain: near-zero states are skipped") {
    const auto family = [&](double td) { return di_ocp(td); };
    const std::vector<VectorXd> states{Vector2d(1e-12, 0.0), Vector2d(0.4, 0.0)};
    const auto curve = estimate_discretization_gain(family, states, {0.2}, 0.1);
    REQUIRE(curve.size() == 1);
    CHECK(curve[0].second > 0.0);
    CHECK(std::isfinite(curve[0].second));
}

TEST_CASE("discretization gain is scale-free in the unconstrained regime") {
    const auto family = [&](double td) { return di_ocp(td); };
    std::vector<VectorXd> states{Vector2d(0.4, 0.05), Vector2d(-0.2, -0.1),
                                 Vector2d(0.1, 0.15)};
    std::vector<VectorXd> halved;
    for (const auto& x : states) {
        halved.push_back(0.5 * x);
    }
    const double L_full =
        estimate_discretization_gain(family, states, {0.4}, 0.05)[0].second;
    const double L_half =
        estimate_discretization_gain(family, halved, {0.4}, 0.05)[0].second;
    CHECK(std::abs(L_full - L_half) <= 0.1 * L_full);
}

TEST_CASE("disturbance signals respect their declared amplitude and grid independence") {
    const auto d = DisturbanceSignal::piecewise_random(0.5, 0.5, 42);
    for (int i = 0; i < 2000; ++i) {
        const double t = 0.013 * i;
        const VectorXd v = d.value_at(t, 2);
        CHECK(v.cwiseAbs().maxCoeff() <= 0.5);
        // piecewise constant within its hold segment regardless of grid
        CHECK((d.value_at(std::floor(t / 0.5) * 0.5 + 1e-6, 2) - v).norm() == 0.0);
    }
    const auto s = DisturbanceSignal::sinusoid(0.3, 2.0);
    for (int i = 0; i < 100; ++i) {
        CHECK(s.value_at(0.07 * i, 1).cwiseAbs().maxCoeff() <= 0.3);
    }
}

TEST_CASE("iss measurement rejects tail windows shorter than ten model steps") {
    const ContinuousModel plant = double_integrator();
    const DiscreteOcp ocp = di_ocp(0.4);
    const SimConfig cfg = di_config(Scheme::HMPC, 0.02, 0.4, 8.0);  // 0.25·8 < 10·0.4
    CHECK_THROWS_AS(measure_iss(plant, ocp, cfg, Vector2d(2.0, 0.0), {0.0}, {1}),
                    ConfigError);
}

TEST_CASE("iss report: monotone bounds and nominal convergence") {
    const ContinuousModel plant = double_integrator();
    const DiscreteOcp ocp = di_ocp(0.4);
    const SimConfig cfg = di_config(Scheme::HMPC, 0.02, 0.4, 20.0);
    const IssReport report =
        measure_iss(plant, ocp, cfg, Vector2d(2.0, 0.0), {0.0, 0.05, 0.1}, {1, 2});
    REQUIRE(report.pairs.size() == 3);
    CHECK(report.nominally_stable);
    CHECK(report.pairs[0].second <= 1e-3);
    for (std::size_t i = 1; i < report.pairs.size(); ++i) {
        CHECK(report.pairs[i].second + 1e-3 >= report.pairs[i - 1].second);
    }
    CHECK(report.decay_rate > 0.0);
}

TEST_CASE("small-gain coherence on the double-integrator grid") {
    const ContinuousModel plant = double_integrator();
    const auto family = [&](double td) { return di_ocp(td); };
    const auto samples = hit_and_run_samples(
        Polyhedron::box(Vector2d(-1.0, -0.2), Vector2d(1.0, 0.2)), 30, 31);
    const auto curve = estimate_discretization_gain(family, samples, {0.4, 0.2}, 0.05);

    const DiscreteOcp coarse = di_ocp(0.4);
    const SimConfig cfg = di_config(Scheme::HMPC, 0.02, 0.4, 20.0);
    const IssReport report =
        measure_iss(plant, coarse, cfg, Vector2d(2.0, 0.0), {0.05, 0.1}, {1});
    double slope = 0.0;
    for (const auto& [bound, limsup] : report.pairs) {
        slope = std::max(slope, limsup / bound);
    }
    for (const auto& [td, gain] : curve) {
        if (gain * slope < 1.0) {
            SimConfig zero_cfg = di_config(Scheme::Custom, 0.02, td, 20.0);
            const ClosedLoopTrace trace =
                run_closed_loop(plant, family(td), zero_cfg, Vector2d(2.0, 0.0));
            CHECK(trace.status == TraceStatus::Completed);
            CHECK(trace.tail_limsup() <= 1e-2);
        }
    }
}

TEST_CASE("csv export shape: solve times only on sample ticks") {
    const ContinuousModel plant = double_integrator();
    const DiscreteOcp ocp = di_ocp(0.4);
    const SimConfig cfg = di_config(Scheme::Custom, 0.4, 0.4, 2.0);
    const ClosedLoopTrace trace = run_closed_loop(plant, ocp, cfg, Vector2d(1.0, 0.0));
    std::ostringstream os;
    trace.write_csv(os);
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    CHECK(line == "t,x1,x2,u1,d1,solve_ms,event");
    int rows = 0;
    int with_solve = 0;
    while (std::getline(is, line)) {
        const auto last_comma = line.rfind(',');
        const auto prev_comma = line.rfind(',', last_comma - 1);
        if (last_comma - prev_comma > 1) {
            ++with_solve;
        }
        ++rows;
    }
    CHECK(rows == trace.states.rows());
    CHECK(with_solve == static_cast<int>(trace.sample_ticks.size()));
}

TEST_CASE("infeasible solves hold the previous input and are logged") {
    // x₁ starts outside its bound and the first predicted node cannot be
    // brought back, so every solve is infeasible; with no prior solution
    // the loop holds u = 0 and the state never moves.
    const ContinuousModel plant = double_integrator();
    const DiscreteOcp ocp = di_ocp(0.4);
    const SimConfig cfg = di_config(Scheme::Custom, 0.4, 0.4, 2.0);
    const ClosedLoopTrace trace = run_closed_loop(plant, ocp, cfg, Vector2d(2.2, 0.0));
    CHECK(trace.status == TraceStatus::Completed);
    CHECK(!trace.events.empty());
    CHECK(trace.inputs.cwiseAbs().maxCoeff() == 0.0);
    CHECK(trace.states(trace.states.rows() - 1, 0) == 2.2);
}

TEST_CASE("divergence truncates the trace") {
    ContinuousModel plant;
    plant.n = 1;
    plant.m = 1;
    plant.f = [](const VectorXd& x, const VectorXd&) {
        return VectorXd::Constant(1, x[0] * x[0] * x[0]);
    };
    DiscreteOcp ocp;
    ocp.model_d = discretize_rk4(plant, 0.1, 1);
    ocp.cost = StageCost{MatrixXd::Zero(1, 1), MatrixXd::Ones(1, 1)};
    ocp.P = MatrixXd::Zero(1, 1);
    ocp.N = 2;
    ocp.x_set = unconstrained(1);
    ocp.u_set = unconstrained(1);
    const SimConfig cfg = di_config(Scheme::Custom, 0.1, 0.1, 10.0);
    const ClosedLoopTrace trace = run_closed_loop(plant, ocp, cfg, VectorXd::Constant(1, 3.0));
    CHECK(trace.status == TraceStatus::Diverged);
    CHECK(trace.states.rows() < 2001);
    CHECK(trace.states.rows() == trace.inputs.rows() + 1);
    CHECK(trace.tail_limsup() == std::numeric_limits<double>::infinity());
}
