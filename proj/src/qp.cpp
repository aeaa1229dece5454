#include "hmpc/qp.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "hmpc/errors.hpp"
#include "hmpc/lp.hpp"

namespace hmpc {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

double fischer_burmeister(double a, double b) { return a + b - std::hypot(a, b); }

struct FbDerivatives {
    VectorXd da;  // ∂φ/∂λ
    VectorXd db;  // ∂φ/∂s
};

FbDerivatives fb_derivatives(const VectorXd& lam, const VectorXd& s) {
    const Eigen::Index k = lam.size();
    FbDerivatives out{VectorXd(k), VectorXd(k)};
    constexpr double kKink = 1.0 - 0.7071067811865476;  // subgradient at (0,0)
    for (Eigen::Index i = 0; i < k; ++i) {
        const double r = std::hypot(lam[i], s[i]);
        if (r < 1e-14) {
            out.da[i] = kKink;
            out.db[i] = kKink;
        } else {
            out.da[i] = 1.0 - lam[i] / r;
            out.db[i] = 1.0 - s[i] / r;
        }
    }
    return out;
}

struct Residual {
    VectorXd r_stat;  // H z + g + A_inᵀλ + A_eqᵀν
    VectorXd r_eq;    // A_eq z − b_eq
    VectorXd r_fb;    // φ(λ_i, s_i) per inequality row
    double merit = 0.0;
};

Residual evaluate(const QuadProg& qp, const VectorXd& z, const VectorXd& lam,
                  const VectorXd& nu) {
    Residual r;
    r.r_stat = qp.H * z + qp.g;
    if (qp.num_ineq() > 0) {
        r.r_stat.noalias() += qp.A_in.transpose() * lam;
        const VectorXd s = qp.b_in - qp.A_in * z;
        r.r_fb = VectorXd(qp.num_ineq());
        for (int i = 0; i < qp.num_ineq(); ++i) {
            r.r_fb[i] = fischer_burmeister(lam[i], s[i]);
        }
    } else {
        r.r_fb = VectorXd(0);
    }
    if (qp.num_eq() > 0) {
        r.r_stat.noalias() += qp.A_eq.transpose() * nu;
        r.r_eq = qp.A_eq * z - qp.b_eq;
    } else {
        r.r_eq = VectorXd(0);
    }
    r.merit = 0.5 * (r.r_stat.squaredNorm() + r.r_eq.squaredNorm() + r.r_fb.squaredNorm());
    return r;
}

// Newton step with Δλ eliminated row-wise:
//   Δλ_i = (−φ_i + db_i·(A Δz)_i) / da_i,
// so the z-block sees H + Aᵀdiag(db/da)A. Rows with db = 0 (cleanly
// inactive) drop out, which keeps the cost proportional to the number of
// active-ish rows. Strongly active rows have da → 0; the floor turns
// them into stiff penalties, and a softer floor serves as the fallback
// direction when the stiff system misbehaves.
bool newton_step(const QuadProg& qp, const Residual& res, const FbDerivatives& fb,
                 double da_floor, VectorXd* dz, VectorXd* dnu, VectorXd* dlam) {
    const int d = qp.vars();
    const int e = qp.num_eq();
    const int k = qp.num_ineq();

    MatrixXd M = qp.H;
    VectorXd rhs_z = -res.r_stat;
    VectorXd inv_da = VectorXd::Zero(k);
    for (int i = 0; i < k; ++i) {
        inv_da[i] = 1.0 / std::max(fb.da[i], da_floor);
        const double c = fb.db[i] * inv_da[i];
        if (c > 1e-14) {
            M.noalias() += c * qp.A_in.row(i).transpose() * qp.A_in.row(i);
        }
        if (res.r_fb[i] != 0.0) {
            rhs_z.noalias() += inv_da[i] * res.r_fb[i] * qp.A_in.row(i).transpose();
        }
    }

    if (e == 0) {
        const Eigen::LDLT<MatrixXd> ldlt(M);
        if (ldlt.info() != Eigen::Success) {
            return false;
        }
        *dz = ldlt.solve(rhs_z);
        *dnu = VectorXd(0);
    } else {
        MatrixXd kkt = MatrixXd::Zero(d + e, d + e);
        kkt.topLeftCorner(d, d) = M;
        kkt.topRightCorner(d, e) = qp.A_eq.transpose();
        kkt.bottomLeftCorner(e, d) = qp.A_eq;
        VectorXd rhs(d + e);
        rhs << rhs_z, -res.r_eq;
        const VectorXd step = kkt.partialPivLu().solve(rhs);
        if (!step.allFinite()) {
            return false;
        }
        *dz = step.head(d);
        *dnu = step.tail(e);
    }
    if (!dz->allFinite()) {
        return false;
    }
    *dlam = VectorXd(k);
    if (k > 0) {
        const VectorXd a_dz = qp.A_in * *dz;
        for (int i = 0; i < k; ++i) {
            (*dlam)[i] = inv_da[i] * (-res.r_fb[i] + fb.db[i] * a_dz[i]);
        }
        if (!dlam->allFinite()) {
            return false;
        }
    }
    return true;
}

}  // namespace

double kkt_residual(const QuadProg& qp, const VectorXd& z, const VectorXd& lam,
                    const VectorXd& nu) {
    VectorXd stat = qp.H * z + qp.g;
    double res = 0.0;
    if (qp.num_ineq() > 0) {
        stat.noalias() += qp.A_in.transpose() * lam;
        const VectorXd viol = qp.A_in * z - qp.b_in;
        res = std::max(res, viol.maxCoeff());                                // primal
        res = std::max(res, lam.cwiseProduct(viol).cwiseAbs().maxCoeff());   // complementarity
        res = std::max(res, -lam.minCoeff());                                // dual sign
    }
    if (qp.num_eq() > 0) {
        stat.noalias() += qp.A_eq.transpose() * nu;
        res = std::max(res, (qp.A_eq * z - qp.b_eq).cwiseAbs().maxCoeff());
    }
    return std::max(res, stat.cwiseAbs().maxCoeff());
}

QpSolution solve_qp(const QuadProg& qp, const QpSettings& settings,
                    const std::optional<QpWarmStart>& warm) {
    const auto t0 = std::chrono::steady_clock::now();
    const int d = qp.vars();
    const int e = qp.num_eq();
    const int k = qp.num_ineq();
    if (qp.g.size() != d || (k > 0 && (qp.A_in.cols() != d || qp.b_in.size() != k)) ||
        (e > 0 && (qp.A_eq.cols() != d || qp.b_eq.size() != e))) {
        throw Error("solve_qp: inconsistent problem dimensions");
    }

    QpSolution sol;
    sol.nu = VectorXd::Zero(e);
    if (warm && warm->z.size() == d) {
        sol.z = warm->z;
        sol.lam = (warm->lam.size() == k) ? VectorXd(warm->lam.cwiseMax(0.0))
                                          : VectorXd(VectorXd::Zero(k));
    } else {
        const Eigen::LDLT<MatrixXd> hfac(qp.H + 1e-12 * MatrixXd::Identity(d, d));
        sol.z = (hfac.info() == Eigen::Success) ? VectorXd(hfac.solve(-qp.g))
                                                : VectorXd::Zero(d);
        if (!sol.z.allFinite()) {
            sol.z.setZero();
        }
        sol.lam = VectorXd::Zero(k);
    }

    const auto finish = [&](QpStatus status) {
        sol.status = status;
        sol.lam = sol.lam.cwiseMax(0.0);
        sol.kkt_residual = kkt_residual(qp, sol.z, sol.lam, sol.nu);
        sol.wall_time =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return sol;
    };

    // Armijo backtracking on the squared residual merit.
    const auto try_step = [&](const Residual& res, const VectorXd& dz, const VectorXd& dnu,
                              const VectorXd& dlam) {
        double alpha = 1.0;
        for (int ls = 0; ls < 45; ++ls) {
            const VectorXd z_try = sol.z + alpha * dz;
            const VectorXd lam_try = (k > 0) ? VectorXd(sol.lam + alpha * dlam) : sol.lam;
            const VectorXd nu_try = (e > 0) ? VectorXd(sol.nu + alpha * dnu) : sol.nu;
            const Residual res_try = evaluate(qp, z_try, lam_try, nu_try);
            if (res_try.merit <= (1.0 - 1e-4 * alpha) * res.merit) {
                sol.z = z_try;
                sol.lam = lam_try;
                sol.nu = nu_try;
                return true;
            }
            alpha *= 0.5;
        }
        return false;
    };

    int stall_count = 0;
    double prev_merit = std::numeric_limits<double>::infinity();
    for (sol.iterations = 0; sol.iterations <= settings.max_iter; ++sol.iterations) {
        if (kkt_residual(qp, sol.z, sol.lam.cwiseMax(0.0), sol.nu) <= settings.tol) {
            return finish(QpStatus::Optimal);
        }
        if (sol.iterations == settings.max_iter) {
            break;
        }
        const Residual res = evaluate(qp, sol.z, sol.lam, sol.nu);
        if (res.merit >= prev_merit * (1.0 - 1e-12)) {
            if (++stall_count >= 3) {
                break;
            }
        } else {
            stall_count = 0;
        }
        prev_merit = res.merit;

        const FbDerivatives fb =
            (k > 0) ? fb_derivatives(sol.lam, qp.b_in - qp.A_in * sol.z) : FbDerivatives{};
        VectorXd dz, dnu, dlam;
        bool accepted = newton_step(qp, res, fb, 1e-10, &dz, &dnu, &dlam) &&
                        try_step(res, dz, dnu, dlam);
        if (!accepted) {
            accepted = newton_step(qp, res, fb, 1e-4, &dz, &dnu, &dlam) &&
                       try_step(res, dz, dnu, dlam);
        }
        if (!accepted) {
            break;  // stalled
        }
    }

    // Stalled or out of iterations: certify infeasibility when that is
    // the cause, otherwise report the iteration outcome.
    if (k + e > 0 &&
        !linear_constraints_feasible(k > 0 ? qp.A_in : MatrixXd(0, d),
                                     k > 0 ? qp.b_in : VectorXd(0),
                                     e > 0 ? qp.A_eq : MatrixXd(0, d),
                                     e > 0 ? qp.b_eq : VectorXd(0))) {
        return finish(QpStatus::Infeasible);
    }
    return finish(QpStatus::MaxIter);
}

}  // namespace hmpc
