#include "hmpc/ocp.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <vector>

#include "hmpc/errors.hpp"

namespace hmpc {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// Row-block i of the prediction matrices covers ξ_{i+1}, i = 0..N−1.
struct Prediction {
    MatrixXd Phi;    // (N n) × n, stacked stage products
    MatrixXd Gamma;  // (N n) × (N m), lower block-triangular convolution
};

// Stage-varying linear prediction ξ_{i+1} = A_i ξ_i + B_i μ_i (constant
// A, B in the LTI case).
Prediction build_prediction(const std::vector<MatrixXd>& A, const std::vector<MatrixXd>& B,
                            int n, int m) {
    const int N = static_cast<int>(A.size());
    Prediction p;
    p.Phi = MatrixXd::Zero(N * n, n);
    p.Gamma = MatrixXd::Zero(N * n, N * m);
    p.Phi.topRows(n) = A[0];
    p.Gamma.topLeftCorner(n, m) = B[0];
    for (int i = 1; i < N; ++i) {
        p.Phi.middleRows(i * n, n).noalias() = A[i] * p.Phi.middleRows((i - 1) * n, n);
        p.Gamma.block(i * n, 0, n, i * m).noalias() =
            A[i] * p.Gamma.block((i - 1) * n, 0, n, i * m);
        p.Gamma.block(i * n, i * m, n, m) = B[i];
    }
    return p;
}

// blkdiag(Q_d, ..., Q_d, P) applied to a stacked state quantity.
MatrixXd apply_state_weights(const DiscreteOcp& ocp, const MatrixXd& stacked) {
    const int n = ocp.model_d.n;
    const double t_d = ocp.model_d.t_d;
    MatrixXd out(stacked.rows(), stacked.cols());
    for (int i = 0; i < ocp.N; ++i) {
        if (i == ocp.N - 1) {
            out.middleRows(i * n, n).noalias() = ocp.P * stacked.middleRows(i * n, n);
        } else {
            out.middleRows(i * n, n).noalias() =
                t_d * (ocp.cost.Q * stacked.middleRows(i * n, n));
        }
    }
    return out;
}

struct CondensedRows {
    MatrixXd A_in;
    VectorXd b_in;
};

// Inequality rows over the stacked inputs: inputs at every stage, state
// rows at the prediction nodes (1..N or 1..N−1), terminal-set rows at
// stage N when present. `xi_nominal` is the stacked nominal state
// trajectory the rows are taken relative to (Φx for condensing, the
// current rollout for the SQP subproblem).
CondensedRows build_inequality_rows(const DiscreteOcp& ocp, const MatrixXd& Gamma,
                                    const VectorXd& xi_nominal) {
    const int n = ocp.model_d.n;
    const int m = ocp.model_d.m;
    const int N = ocp.N;
    const int ku = ocp.u_set.rows();
    const int kx = ocp.x_set.rows();
    const int last_x_stage = ocp.state_constraint_at_final ? N : N - 1;
    const int kt = ocp.terminal_set ? ocp.terminal_set->rows() : 0;

    const int total = N * ku + last_x_stage * kx + kt;
    CondensedRows rows;
    rows.A_in = MatrixXd::Zero(total, N * m);
    rows.b_in = VectorXd::Zero(total);

    int at = 0;
    for (int j = 0; j < N; ++j) {
        rows.A_in.block(at, j * m, ku, m) = ocp.u_set.H;
        rows.b_in.segment(at, ku) = ocp.u_set.h;
        at += ku;
    }
    for (int stage = 1; stage <= last_x_stage; ++stage) {
        const int rb = (stage - 1) * n;
        rows.A_in.middleRows(at, kx).noalias() = ocp.x_set.H * Gamma.middleRows(rb, n);
        rows.b_in.segment(at, kx) = ocp.x_set.h - ocp.x_set.H * xi_nominal.segment(rb, n);
        at += kx;
    }
    if (kt > 0) {
        const int rb = (N - 1) * n;
        rows.A_in.middleRows(at, kt).noalias() = ocp.terminal_set->H * Gamma.middleRows(rb, n);
        rows.b_in.segment(at, kt) =
            ocp.terminal_set->h - ocp.terminal_set->H * xi_nominal.segment(rb, n);
    }
    return rows;
}

MatrixXd reshape_inputs(const VectorXd& z, int N, int m) {
    MatrixXd mu(N, m);
    for (int j = 0; j < N; ++j) {
        mu.row(j) = z.segment(j * m, m).transpose();
    }
    return mu;
}

VectorXd stack_inputs(const MatrixXd& mu) {
    const int N = static_cast<int>(mu.rows());
    const int m = static_cast<int>(mu.cols());
    VectorXd z(N * m);
    for (int j = 0; j < N; ++j) {
        z.segment(j * m, m) = mu.row(j).transpose();
    }
    return z;
}

MatrixXd rollout(const DiscreteOcp& ocp, const VectorXd& x, const MatrixXd& mu) {
    MatrixXd xi(ocp.N + 1, ocp.model_d.n);
    xi.row(0) = x.transpose();
    for (int j = 0; j < ocp.N; ++j) {
        xi.row(j + 1) =
            ocp.model_d.step(xi.row(j).transpose(), mu.row(j).transpose()).transpose();
    }
    if (!xi.allFinite()) {
        throw IntegrationDiverged("prediction rollout produced a non-finite state");
    }
    return xi;
}

double objective_given(const DiscreteOcp& ocp, const MatrixXd& xi, const MatrixXd& mu) {
    const double t_d = ocp.model_d.t_d;
    double value = 0.0;
    for (int j = 0; j < ocp.N; ++j) {
        value += t_d * ocp.cost.l(xi.row(j).transpose(), mu.row(j).transpose());
    }
    const VectorXd terminal = xi.row(ocp.N).transpose();
    value += terminal.dot(ocp.P * terminal);
    return value;
}

// ℓ₁ state-constraint violation over the constrained stages.
double state_violation(const DiscreteOcp& ocp, const MatrixXd& xi) {
    const int last_x_stage = ocp.state_constraint_at_final ? ocp.N : ocp.N - 1;
    double total = 0.0;
    for (int stage = 1; stage <= last_x_stage; ++stage) {
        total += (ocp.x_set.H * xi.row(stage).transpose() - ocp.x_set.h).cwiseMax(0.0).sum();
    }
    if (ocp.terminal_set) {
        total += (ocp.terminal_set->H * xi.row(ocp.N).transpose() - ocp.terminal_set->h)
                     .cwiseMax(0.0)
                     .sum();
    }
    return total;
}

}  // namespace

QuadProg condense(const DiscreteOcp& ocp, const VectorXd& x) {
    if (!ocp.model_d.linear_part) {
        throw NotLinear("condense requires a linear prediction model");
    }
    const auto& [Ad, Bd] = *ocp.model_d.linear_part;
    const int n = ocp.model_d.n;
    const int m = ocp.model_d.m;
    const int N = ocp.N;
    const double t_d = ocp.model_d.t_d;

    const Prediction pred =
        build_prediction(std::vector<MatrixXd>(N, Ad), std::vector<MatrixXd>(N, Bd), n, m);

    const MatrixXd weighted_gamma = apply_state_weights(ocp, pred.Gamma);
    QuadProg qp;
    qp.H = 2.0 * (pred.Gamma.transpose() * weighted_gamma);
    for (int j = 0; j < N; ++j) {
        qp.H.block(j * m, j * m, m, m) += 2.0 * t_d * ocp.cost.R;
    }
    qp.H = 0.5 * (qp.H + qp.H.transpose());
    const VectorXd xi_nominal = pred.Phi * x;
    qp.g = 2.0 * (weighted_gamma.transpose() * xi_nominal);

    CondensedRows rows = build_inequality_rows(ocp, pred.Gamma, xi_nominal);
    qp.A_in = std::move(rows.A_in);
    qp.b_in = std::move(rows.b_in);
    qp.A_eq = MatrixXd(0, N * m);
    qp.b_eq = VectorXd(0);
    return qp;
}

double rollout_objective(const DiscreteOcp& ocp, const VectorXd& x, const MatrixXd& mu) {
    return objective_given(ocp, rollout(ocp, x, mu), mu);
}

OcpSolution solve_linear_ocp(const DiscreteOcp& ocp, const VectorXd& x,
                             const std::optional<OcpWarmStart>& warm,
                             const QpSettings& qp_settings) {
    const auto t0 = std::chrono::steady_clock::now();
    const QuadProg qp = condense(ocp, x);

    std::optional<QpWarmStart> qp_warm;
    if (warm && warm->mu.rows() == ocp.N && warm->mu.cols() == ocp.model_d.m) {
        QpWarmStart w;
        w.z = stack_inputs(warm->mu);
        if (warm->lam && warm->lam->size() == qp.b_in.size()) {
            w.lam = *warm->lam;
        }
        qp_warm = std::move(w);
    }

    const QpSolution qps = solve_qp(qp, qp_settings, qp_warm);

    OcpSolution sol;
    sol.mu = reshape_inputs(qps.z, ocp.N, ocp.model_d.m);
    sol.xi = rollout(ocp, x, sol.mu);
    sol.value = objective_given(ocp, sol.xi, sol.mu);
    sol.iterations = qps.iterations;
    sol.kkt_residual = qps.kkt_residual;
    sol.ineq_duals = qps.lam;
    switch (qps.status) {
        case QpStatus::Optimal:
            sol.status = OcpStatus::Optimal;
            break;
        case QpStatus::Infeasible:
            sol.status = OcpStatus::Infeasible;
            break;
        case QpStatus::MaxIter:
            sol.status = OcpStatus::MaxIter;
            break;
    }
    sol.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return sol;
}

OcpSolution solve_nonlinear_ocp(const DiscreteOcp& ocp, const VectorXd& x,
                                const std::optional<OcpWarmStart>& warm,
                                const SqpSettings& settings) {
    const auto t0 = std::chrono::steady_clock::now();
    const int n = ocp.model_d.n;
    const int m = ocp.model_d.m;
    const int N = ocp.N;
    const double t_d = ocp.model_d.t_d;
    const int ku = ocp.u_set.rows();
    const double feas_tol = 1e-6;

    MatrixXd mu = MatrixXd::Zero(N, m);
    if (warm && warm->mu.rows() == N && warm->mu.cols() == m) {
        mu = warm->mu;
    }
    MatrixXd xi = rollout(ocp, x, mu);  // IntegrationDiverged propagates

    double beta = 10.0;
    double trust = settings.trust_radius;
    double merit = objective_given(ocp, xi, mu) + beta * state_violation(ocp, xi);
    double last_kkt = std::numeric_limits<double>::infinity();

    OcpSolution best;
    best.mu = mu;
    best.xi = xi;
    double best_merit = merit;

    const auto finish = [&](OcpStatus status, int iterations) {
        OcpSolution sol;
        sol.mu = (status == OcpStatus::Optimal) ? mu : best.mu;
        sol.xi = (status == OcpStatus::Optimal) ? xi : best.xi;
        sol.value = objective_given(ocp, sol.xi, sol.mu);
        sol.status = status;
        sol.iterations = iterations;
        sol.kkt_residual = last_kkt;
        sol.wall_time =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return sol;
    };

    for (int it = 1; it <= settings.max_iter; ++it) {
        std::vector<MatrixXd> A(N), B(N);
        for (int j = 0; j < N; ++j) {
            std::tie(A[j], B[j]) =
                linearize_step(ocp.model_d, xi.row(j).transpose(), mu.row(j).transpose());
        }
        const Prediction pred = build_prediction(A, B, n, m);

        VectorXd xi_stacked(N * n);
        for (int i = 0; i < N; ++i) {
            xi_stacked.segment(i * n, n) = xi.row(i + 1).transpose();
        }

        // Gauss-Newton model of the objective in the input step δz (the
        // stage costs are quadratic, so the expansion is exact along the
        // linearized dynamics).
        const MatrixXd weighted_gamma = apply_state_weights(ocp, pred.Gamma);
        MatrixXd h_gn = 2.0 * (pred.Gamma.transpose() * weighted_gamma);
        for (int j = 0; j < N; ++j) {
            h_gn.block(j * m, j * m, m, m) += 2.0 * t_d * ocp.cost.R;
        }
        h_gn = 0.5 * (h_gn + h_gn.transpose());
        VectorXd g_gn = 2.0 * (weighted_gamma.transpose() * xi_stacked);
        for (int j = 0; j < N; ++j) {
            g_gn.segment(j * m, m) += 2.0 * t_d * (ocp.cost.R * mu.row(j).transpose());
        }

        // Hard rows: inputs (absolute), the trust region, and the state
        // and terminal rows. If the hard subproblem is infeasible it is
        // re-posed with one ℓ₁-penalized slack per state/terminal row
        // (the exact-penalty twin of the merit function below).
        CondensedRows all_rows = build_inequality_rows(ocp, pred.Gamma, xi_stacked);
        const int dz = N * m;
        const int ns = static_cast<int>(all_rows.b_in.size()) - N * ku;
        const MatrixXd soft_A = all_rows.A_in.bottomRows(ns);
        const VectorXd soft_b = all_rows.b_in.tail(ns);

        MatrixXd input_rows = MatrixXd::Zero(N * ku, dz);
        VectorXd input_rhs = VectorXd::Zero(N * ku);
        for (int j = 0; j < N; ++j) {  // H_u (μ_j + δμ_j) ≤ h_u
            input_rows.block(j * ku, j * m, ku, m) = ocp.u_set.H;
            input_rhs.segment(j * ku, ku) =
                ocp.u_set.h - ocp.u_set.H * mu.row(j).transpose();
        }

        QuadProg hard;
        hard.H = h_gn;
        hard.g = g_gn;
        hard.A_in = MatrixXd::Zero(N * ku + 2 * dz + ns, dz);
        hard.b_in = VectorXd::Zero(N * ku + 2 * dz + ns);
        hard.A_in.topRows(N * ku) = input_rows;
        hard.b_in.head(N * ku) = input_rhs;
        hard.A_in.block(N * ku, 0, dz, dz) = MatrixXd::Identity(dz, dz);
        hard.b_in.segment(N * ku, dz).setConstant(trust);
        hard.A_in.block(N * ku + dz, 0, dz, dz) = -MatrixXd::Identity(dz, dz);
        hard.b_in.segment(N * ku + dz, dz).setConstant(trust);
        hard.A_in.bottomRows(ns) = soft_A;
        hard.b_in.tail(ns) = soft_b;
        hard.A_eq = MatrixXd(0, dz);
        hard.b_eq = VectorXd(0);

        QpSolution qps = solve_qp(hard, settings.qp);
        bool elastic = false;
        double slack_max = 0.0;
        if (qps.status == QpStatus::Infeasible) {
            elastic = true;
            const int nw = dz + ns;
            QuadProg qp;
            qp.H = MatrixXd::Zero(nw, nw);
            qp.H.topLeftCorner(dz, dz) = h_gn;
            qp.H.bottomRightCorner(ns, ns) = 2e-8 * beta * MatrixXd::Identity(ns, ns);
            qp.g = VectorXd::Zero(nw);
            qp.g.head(dz) = g_gn;
            qp.g.tail(ns).setConstant(beta);
            qp.A_in = MatrixXd::Zero(N * ku + 2 * dz + 2 * ns, nw);
            qp.b_in = VectorXd::Zero(N * ku + 2 * dz + 2 * ns);
            qp.A_in.topLeftCorner(N * ku, dz) = input_rows;
            qp.b_in.head(N * ku) = input_rhs;
            qp.A_in.block(N * ku, 0, dz, dz) = MatrixXd::Identity(dz, dz);
            qp.b_in.segment(N * ku, dz).setConstant(trust);
            qp.A_in.block(N * ku + dz, 0, dz, dz) = -MatrixXd::Identity(dz, dz);
            qp.b_in.segment(N * ku + dz, dz).setConstant(trust);
            qp.A_in.block(N * ku + 2 * dz, 0, ns, dz) = soft_A;  // A δz − s ≤ b
            qp.A_in.block(N * ku + 2 * dz, dz, ns, ns) = -MatrixXd::Identity(ns, ns);
            qp.b_in.segment(N * ku + 2 * dz, ns) = soft_b;
            qp.A_in.block(N * ku + 2 * dz + ns, dz, ns, ns) =
                -MatrixXd::Identity(ns, ns);  // s ≥ 0
            qp.A_eq = MatrixXd(0, nw);
            qp.b_eq = VectorXd(0);
            qps = solve_qp(qp, settings.qp);
            if (ns > 0 && qps.z.size() == nw) {
                slack_max = qps.z.tail(ns).maxCoeff();
            }
        }
        const VectorXd step = qps.z.head(dz);
        const double step_norm = (dz > 0) ? step.cwiseAbs().maxCoeff() : 0.0;

        // Stationarity of the underlying problem at the current iterate,
        // using the subproblem duals; trust-region and slack bookkeeping
        // rows are excluded from the dual map.
        VectorXd stationarity = g_gn;
        for (int r = 0; r < N * ku; ++r) {
            stationarity.noalias() += qps.lam[r] * input_rows.row(r).transpose();
        }
        for (int r = 0; r < ns; ++r) {
            stationarity.noalias() += qps.lam[N * ku + 2 * dz + r] * soft_A.row(r).transpose();
        }
        const double trust_dual = qps.lam.segment(N * ku, 2 * dz).cwiseAbs().maxCoeff();
        last_kkt = stationarity.cwiseAbs().maxCoeff();

        const double viol_now = state_violation(ocp, xi);
        const bool step_converged = step_norm <= settings.step_tol;
        const bool kkt_converged =
            last_kkt <= settings.kkt_tol && trust_dual <= 1e-9 && viol_now <= feas_tol;
        if (step_converged || kkt_converged) {
            if (viol_now <= feas_tol) {
                return finish(OcpStatus::Optimal, it);
            }
            if (beta < 1e8) {  // stationary but infeasible: raise the penalty
                beta = std::min(beta * 10.0, 1e8);
                merit = objective_given(ocp, xi, mu) + beta * viol_now;
                continue;
            }
            return finish(OcpStatus::MaxIter, it);
        }

        // ℓ₁ merit test against the subproblem's predicted reduction.
        double model_at_step = 0.5 * step.dot(h_gn * step) + g_gn.dot(step);
        if (elastic && ns > 0) {
            const VectorXd s = qps.z.tail(ns);
            model_at_step += beta * s.sum() + 1e-8 * beta * s.squaredNorm();
        }
        const double predicted = std::max(beta * viol_now - model_at_step, 0.0);

        bool accepted = false;
        const MatrixXd mu_try = mu + reshape_inputs(step, N, m);
        try {
            const MatrixXd xi_try = rollout(ocp, x, mu_try);
            const double merit_try =
                objective_given(ocp, xi_try, mu_try) + beta * state_violation(ocp, xi_try);
            const double ared = merit - merit_try;
            if (ared >= 0.01 * predicted - 1e-12 * (1.0 + std::abs(merit))) {
                const bool strong = ared >= 0.7 * predicted && step_norm >= 0.9 * trust;
                mu = mu_try;
                xi = xi_try;
                merit = merit_try;
                accepted = true;
                if (merit < best_merit) {
                    best_merit = merit;
                    best.mu = mu;
                    best.xi = xi;
                }
                if (strong) {
                    trust = std::min(trust * 1.5, 1e3);
                }
            }
        } catch (const IntegrationDiverged&) {
            // candidate rollout exploded: reject and shrink
        }

        if (!accepted) {
            trust *= 0.5;
            if (trust < 1e-10) {
                return finish(OcpStatus::MaxIter, it);
            }
        } else {
            const double viol_after = state_violation(ocp, xi);
            if (viol_after > feas_tol && elastic && slack_max > 1e-8) {
                beta = std::min(beta * 10.0, 1e8);
                merit = objective_given(ocp, xi, mu) + beta * viol_after;
            }
        }
    }
    return finish(OcpStatus::MaxIter, settings.max_iter);
}

OcpWarmStart shift_warm_start(const OcpSolution& prev,
                              const std::optional<MatrixXd>& terminal_gain) {
    const int N = static_cast<int>(prev.mu.rows());
    OcpWarmStart warm;
    warm.mu = MatrixXd(N, prev.mu.cols());
    if (N > 1) {
        warm.mu.topRows(N - 1) = prev.mu.bottomRows(N - 1);
    }
    if (terminal_gain && prev.xi.rows() == N + 1) {
        warm.mu.row(N - 1) = (-(*terminal_gain) * prev.xi.row(N).transpose()).transpose();
    } else {
        warm.mu.row(N - 1) = prev.mu.row(N - 1);
    }
    return warm;
}

}  // namespace hmpc
