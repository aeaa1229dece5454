#include "hmpc/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <random>
#include <sstream>

#include "hmpc/errors.hpp"

namespace hmpc {

using Eigen::MatrixXd;
using Eigen::VectorXd;

DisturbanceSignal DisturbanceSignal::zero() { return {}; }

DisturbanceSignal DisturbanceSignal::make_constant(const VectorXd& value) {
    DisturbanceSignal d;
    d.kind = Kind::Constant;
    d.constant = value;
    d.amplitude = value.size() > 0 ? value.cwiseAbs().maxCoeff() : 0.0;
    return d;
}

DisturbanceSignal DisturbanceSignal::piecewise_random(double amplitude, double hold_time,
                                                      std::uint64_t seed) {
    DisturbanceSignal d;
    d.kind = Kind::PiecewiseConstantRandom;
    d.amplitude = amplitude;
    d.hold_time = hold_time;
    d.seed = seed;
    return d;
}

DisturbanceSignal DisturbanceSignal::sinusoid(double amplitude, double frequency) {
    DisturbanceSignal d;
    d.kind = Kind::Sinusoid;
    d.amplitude = amplitude;
    d.frequency = frequency;
    return d;
}

VectorXd DisturbanceSignal::value_at(double t, int m) const {
    switch (kind) {
        case Kind::Zero:
            return VectorXd::Zero(m);
        case Kind::Constant: {
            VectorXd v = VectorXd::Zero(m);
            v.head(std::min<Eigen::Index>(m, constant.size())) =
                constant.head(std::min<Eigen::Index>(m, constant.size()));
            return v;
        }
        case Kind::Sinusoid:
            return VectorXd::Constant(m, amplitude * std::sin(2.0 * M_PI * frequency * t));
        case Kind::PiecewiseConstantRandom: {
            // Per-segment generator keyed on (seed, segment) so the signal
            // is a pure function of time, independent of any grid.
            const auto segment = static_cast<std::uint64_t>(
                std::max(0.0, std::floor((t + 1e-12) / hold_time)));
            std::mt19937_64 rng(seed + 0x9e3779b97f4a7c15ULL * (segment + 1));
            std::uniform_real_distribution<double> unif(-amplitude, amplitude);
            VectorXd v(m);
            for (int i = 0; i < m; ++i) {
                v[i] = unif(rng);
            }
            return v;
        }
    }
    return VectorXd::Zero(m);
}

std::string scheme_name(Scheme s) {
    switch (s) {
        case Scheme::MPC1:
            return "MPC1";
        case Scheme::HMPC:
            return "HMPC";
        case Scheme::MPC2:
            return "MPC2";
        case Scheme::Custom:
            return "custom";
    }
    return "custom";
}

void SimConfig::validate() const {
    if (t_s <= 0.0 || t_d <= 0.0 || t_sim <= 0.0) {
        throw ConfigError("t_s, t_d, t_sim must be positive");
    }
    const double tp = plant_step();
    if (tp <= 0.0 || tp > t_s + 1e-12) {
        throw ConfigError("plant step must satisfy 0 < t_p <= t_s");
    }
    const double ratio = t_s / tp;
    if (std::abs(ratio - std::round(ratio)) > 1e-9 * ratio) {
        throw ConfigError("t_s must be an integer multiple of t_p");
    }
    if (t_s > t_sim + 1e-12) {
        throw ConfigError("t_sim must cover at least one sample");
    }
    if (t_s > t_d + 1e-12) {
        throw ConfigError("sampling faster than the discretization requires t_s <= t_d");
    }
    const bool equal = std::abs(t_s - t_d) <= 1e-12 * std::max(t_s, t_d);
    if ((scheme == Scheme::MPC1 || scheme == Scheme::MPC2) && !equal) {
        throw ConfigError("MPC1/MPC2 labels require t_s = t_d");
    }
    if (scheme == Scheme::HMPC && !(t_s < t_d && !equal)) {
        throw ConfigError("the HMPC label requires t_s < t_d");
    }
}

double ClosedLoopTrace::max_state_violation(const Polyhedron& x_set) const {
    double worst = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < states.rows(); ++i) {
        worst = std::max(worst, x_set.max_violation(states.row(i).transpose()));
    }
    return worst;
}

double ClosedLoopTrace::tail_limsup(double fraction) const {
    if (status == TraceStatus::Diverged) {
        return std::numeric_limits<double>::infinity();
    }
    const Eigen::Index rows = states.rows();
    const auto start = static_cast<Eigen::Index>(std::floor((1.0 - fraction) * (rows - 1)));
    double worst = 0.0;
    for (Eigen::Index i = start; i < rows; ++i) {
        worst = std::max(worst, states.row(i).norm());
    }
    return worst;
}

void ClosedLoopTrace::write_csv(std::ostream& os) const {
    const int n = static_cast<int>(states.cols());
    const int m = static_cast<int>(inputs.cols());
    os << "t";
    for (int i = 1; i <= n; ++i) {
        os << ",x" << i;
    }
    for (int i = 1; i <= m; ++i) {
        os << ",u" << i;
    }
    for (int i = 1; i <= m; ++i) {
        os << ",d" << i;
    }
    os << ",solve_ms,event\n";
    os << std::setprecision(17);

    std::size_t sample_at = 0;
    std::size_t event_at = 0;
    for (Eigen::Index row = 0; row < states.rows(); ++row) {
        os << times[row];
        for (int i = 0; i < n; ++i) {
            os << ',' << states(row, i);
        }
        const Eigen::Index irow = std::min<Eigen::Index>(row, inputs.rows() - 1);
        for (int i = 0; i < m; ++i) {
            os << ',' << inputs(irow, i);
        }
        for (int i = 0; i < m; ++i) {
            os << ',' << disturbances(irow, i);
        }
        os << ',';
        if (sample_at < sample_ticks.size() && sample_ticks[sample_at] == row) {
            os << 1e3 * solve_wall_times[sample_at];
            ++sample_at;
        }
        os << ',';
        if (event_at < events.size() && events[event_at].time <= times[row] + 1e-12) {
            os << events[event_at].what;
            ++event_at;
        }
        os << '\n';
    }
}

double quantile(std::vector<double> values, double q) {
    if (values.empty()) {
        return 0.0;
    }
    std::sort(values.begin(), values.end());
    const double pos = q * (values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = static_cast<std::size_t>(std::ceil(pos));
    const double w = pos - lo;
    return (1.0 - w) * values[lo] + w * values[hi];
}

std::pair<double, double> fit_exponential_decay(const ClosedLoopTrace& trace) {
    double sum_t = 0.0, sum_y = 0.0, sum_tt = 0.0, sum_ty = 0.0;
    int count = 0;
    for (Eigen::Index i = 0; i < trace.states.rows(); ++i) {
        const double norm = trace.states.row(i).norm();
        if (norm < 1e-12) {
            break;
        }
        const double t = trace.times[i];
        const double y = std::log(norm);
        sum_t += t;
        sum_y += y;
        sum_tt += t * t;
        sum_ty += t * y;
        ++count;
    }
    if (count < 2) {
        return {0.0, 0.0};
    }
    const double denom = count * sum_tt - sum_t * sum_t;
    const double slope = (count * sum_ty - sum_t * sum_y) / denom;
    return {-slope, std::exp((sum_y - slope * sum_t) / count)};
}

nlohmann::json ClosedLoopTrace::summary_json(double t_s) const {
    std::vector<double> ms;
    ms.reserve(solve_wall_times.size());
    for (double s : solve_wall_times) {
        ms.push_back(1e3 * s);
    }
    const double p95 = quantile(ms, 0.95);
    nlohmann::json j;
    j["status"] = (status == TraceStatus::Completed) ? "completed" : "diverged";
    j["tail_limsup"] =
        (status == TraceStatus::Completed) ? nlohmann::json(tail_limsup()) : nlohmann::json("inf");
    j["solve_time_ms"] = {{"p50", quantile(ms, 0.5)}, {"p95", p95}, {"max", quantile(ms, 1.0)}};
    j["realtime_feasible"] = p95 <= 1e3 * t_s;
    j["feasibility_events"] = events.size();
    return j;
}

ClosedLoopTrace run_closed_loop(const ContinuousModel& plant, const DiscreteOcp& ocp,
                                const SimConfig& cfg, const VectorXd& x0) {
    cfg.validate();
    const int n = plant.n;
    const int m = plant.m;
    const double t_p = cfg.plant_step();
    const int steps_per_sample = static_cast<int>(std::round(cfg.t_s / t_p));
    const int total_ticks = static_cast<int>(std::round(cfg.t_sim / t_p));
    const bool linear = ocp.model_d.linear_part.has_value();

    ClosedLoopTrace trace;
    trace.times = VectorXd(total_ticks + 1);
    trace.states = MatrixXd::Zero(total_ticks + 1, n);
    trace.inputs = MatrixXd::Zero(total_ticks, m);
    trace.disturbances = MatrixXd::Zero(total_ticks, m);

    VectorXd x = x0;
    VectorXd u_applied = VectorXd::Zero(m);
    trace.states.row(0) = x.transpose();
    trace.times[0] = 0.0;

    bool have_solution = false;
    OcpSolution prev;
    double last_shift_time = 0.0;

    int tick = 0;
    for (; tick < total_ticks; ++tick) {
        const double t = tick * t_p;
        if (tick % steps_per_sample == 0) {
            std::optional<OcpWarmStart> warm;
            if (have_solution) {
                if (t - last_shift_time >= cfg.t_d - 1e-12) {
                    warm = shift_warm_start(prev, ocp.terminal_gain);
                    last_shift_time += cfg.t_d;
                } else {
                    OcpWarmStart w;
                    w.mu = prev.mu;
                    if (linear && prev.ineq_duals.size() > 0) {
                        w.lam = prev.ineq_duals;
                    }
                    warm = std::move(w);
                }
            }
            try {
                OcpSolution sol = linear ? solve_linear_ocp(ocp, x, warm)
                                         : solve_nonlinear_ocp(ocp, x, warm);
                trace.sample_ticks.push_back(tick);
                trace.solve_wall_times.push_back(sol.wall_time);
                if (sol.status == OcpStatus::Infeasible) {
                    trace.events.push_back({t, "infeasible"});
                    // hold the previous input for this sample
                } else {
                    if (sol.status == OcpStatus::MaxIter) {
                        trace.events.push_back({t, "max-iter"});
                    }
                    u_applied = sol.mu.row(0).transpose();
                    prev = std::move(sol);
                    have_solution = true;
                }
            } catch (const IntegrationDiverged&) {
                trace.sample_ticks.push_back(tick);
                trace.solve_wall_times.push_back(0.0);
                trace.events.push_back({t, "solver-diverged"});
            }
        }
        const VectorXd d = cfg.disturbance.value_at(t, m);
        trace.inputs.row(tick) = u_applied.transpose();
        trace.disturbances.row(tick) = d.transpose();
        try {
            x = rk4_step(plant, x, u_applied + d, t_p);
        } catch (const IntegrationDiverged&) {
            trace.status = TraceStatus::Diverged;
            break;
        }
        trace.states.row(tick + 1) = x.transpose();
        trace.times[tick + 1] = (tick + 1) * t_p;
        if (x.norm() > 1e6) {
            trace.status = TraceStatus::Diverged;
            ++tick;
            break;
        }
    }
    if (trace.status == TraceStatus::Diverged) {
        trace.times.conservativeResize(tick + 1);
        trace.states.conservativeResize(tick + 1, n);
        trace.inputs.conservativeResize(tick, m);
        trace.disturbances.conservativeResize(tick, m);
    }
    return trace;
}

std::vector<std::pair<double, double>> estimate_discretization_gain(
    const std::function<DiscreteOcp(double)>& ocp_for_step, const std::vector<VectorXd>& states,
    const std::vector<double>& td_grid, double td_ref, const QpSettings& qp_settings) {
    for (double td : td_grid) {
        if (td_ref > td) {
            throw ConfigError("the reference step must not exceed any grid step");
        }
    }
    const DiscreteOcp ocp_ref = ocp_for_step(td_ref);
    const bool linear = ocp_ref.model_d.linear_part.has_value();
    const auto first_input = [&](const DiscreteOcp& ocp, const VectorXd& x) -> VectorXd {
        const OcpSolution sol = linear ? solve_linear_ocp(ocp, x, std::nullopt, qp_settings)
                                       : solve_nonlinear_ocp(ocp, x);
        if (sol.status != OcpStatus::Optimal) {
            throw Error("discretization-gain estimate: solve did not reach optimality");
        }
        return sol.mu.row(0).transpose();
    };

    std::vector<VectorXd> ref_inputs;
    std::vector<VectorXd> used_states;
    for (const VectorXd& x : states) {
        if (x.norm() < 1e-9) {
            continue;
        }
        ref_inputs.push_back(first_input(ocp_ref, x));
        used_states.push_back(x);
    }

    std::vector<std::pair<double, double>> curve;
    for (double td : td_grid) {
        const DiscreteOcp ocp_td = ocp_for_step(td);
        double gain = 0.0;
        for (std::size_t i = 0; i < used_states.size(); ++i) {
            const VectorXd mu0 = first_input(ocp_td, used_states[i]);
            gain = std::max(gain, (mu0 - ref_inputs[i]).norm() / used_states[i].norm());
        }
        curve.emplace_back(td, gain);
    }
    return curve;
}

nlohmann::json IssReport::to_json() const {
    nlohmann::json pairs_json = nlohmann::json::array();
    for (const auto& [bound, limsup] : pairs) {
        pairs_json.push_back(
            {{"bound", bound},
             {"limsup", std::isfinite(limsup) ? nlohmann::json(limsup) : nlohmann::json("inf")}});
    }
    return {{"pairs", pairs_json},
            {"decay_fit", {{"rate", decay_rate}, {"prefactor", decay_prefactor}}},
            {"nominally_stable", nominally_stable}};
}

IssReport measure_iss(const ContinuousModel& plant, const DiscreteOcp& ocp,
                      const SimConfig& cfg_base, const VectorXd& x0,
                      const std::vector<double>& bounds, const std::vector<std::uint64_t>& seeds) {
    if (0.25 * cfg_base.t_sim < 10.0 * cfg_base.t_d) {
        throw ConfigError("tail window shorter than 10 t_d; increase t_sim");
    }
    IssReport report;

    SimConfig cfg_zero = cfg_base;
    cfg_zero.disturbance = DisturbanceSignal::zero();
    const ClosedLoopTrace nominal = run_closed_loop(plant, ocp, cfg_zero, x0);
    const double nominal_limsup = nominal.tail_limsup();
    report.nominally_stable =
        nominal.status == TraceStatus::Completed && nominal_limsup <= 1e-3;

    std::tie(report.decay_rate, report.decay_prefactor) = fit_exponential_decay(nominal);

    const double hold = cfg_base.disturbance.hold_time > 0.0 ? cfg_base.disturbance.hold_time : 0.5;
    for (double bound : bounds) {
        double worst = 0.0;
        if (bound == 0.0) {
            worst = nominal_limsup;
        } else {
            for (std::uint64_t seed : seeds) {
                SimConfig cfg = cfg_base;
                cfg.disturbance = DisturbanceSignal::piecewise_random(bound, hold, seed);
                const ClosedLoopTrace trace = run_closed_loop(plant, ocp, cfg, x0);
                worst = std::max(worst, trace.tail_limsup());
            }
        }
        report.pairs.emplace_back(bound, worst);
    }
    return report;
}

}  // namespace hmpc
