#include "hmpc/lp.hpp"

#include <cmath>
#include <limits>
#include <vector>

#include "hmpc/errors.hpp"

namespace hmpc {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr double kPivotTol = 1e-9;

enum class SimplexStatus { Optimal, Unbounded };

// Bland-rule tableau simplex for min costᵀv s.t. Tv = rhs, v ≥ 0, given a
// starting basis of identity columns. The tableau T is modified in place;
// `allowed` masks columns permitted to enter the basis.
SimplexStatus run_simplex(MatrixXd& T, VectorXd& rhs, const VectorXd& cost,
                          std::vector<int>& basis, const std::vector<bool>& allowed) {
    const Eigen::Index rows = T.rows();
    const Eigen::Index cols = T.cols();
    // Reduced costs are recomputed from the basis multipliers each pivot.
    VectorXd lambda(rows);
    const long max_pivots = 20000 + 50L * static_cast<long>(cols);
    for (long pivot = 0; pivot < max_pivots; ++pivot) {
        for (Eigen::Index i = 0; i < rows; ++i) {
            lambda[i] = cost[basis[i]];
        }
        int entering = -1;
        for (Eigen::Index j = 0; j < cols; ++j) {
            if (!allowed[j]) {
                continue;
            }
            const double rc = cost[j] - lambda.dot(T.col(j));
            if (rc < -kPivotTol) {
                entering = static_cast<int>(j);
                break;  // Bland: least index
            }
        }
        if (entering < 0) {
            return SimplexStatus::Optimal;
        }
        int leaving = -1;
        double best_ratio = std::numeric_limits<double>::infinity();
        for (Eigen::Index i = 0; i < rows; ++i) {
            const double a = T(i, entering);
            if (a > kPivotTol) {
                const double ratio = rhs[i] / a;
                if (ratio < best_ratio - 1e-12 ||
                    (ratio < best_ratio + 1e-12 &&
                     (leaving < 0 || basis[i] < basis[leaving]))) {
                    best_ratio = ratio;
                    leaving = static_cast<int>(i);
                }
            }
        }
        if (leaving < 0) {
            return SimplexStatus::Unbounded;
        }
        const double piv = T(leaving, entering);
        T.row(leaving) /= piv;
        rhs[leaving] /= piv;
        for (Eigen::Index i = 0; i < rows; ++i) {
            if (i == leaving) {
                continue;
            }
            const double factor = T(i, entering);
            if (factor != 0.0) {
                T.row(i) -= factor * T.row(leaving);
                rhs[i] -= factor * rhs[leaving];
            }
        }
        basis[leaving] = entering;
    }
    throw Error("simplex exceeded its pivot cap");
}

struct StandardForm {
    MatrixXd T;            // rows × cols
    VectorXd rhs;          // ≥ 0
    std::vector<int> basis;
    int n_free = 0;        // original free variables (split into ±)
    int first_artificial = 0;
    int n_artificial = 0;
};

// Split free variables, add slacks for ≤ rows and artificials wherever
// the slack cannot serve as the initial basis (negated rows, equalities).
StandardForm build_standard_form(const MatrixXd& A, const VectorXd& b, const MatrixXd& G,
                                 const VectorXd& d) {
    const int k = static_cast<int>(A.rows());
    const int e = static_cast<int>(G.rows());
    const int n = static_cast<int>(A.cols() > 0 ? A.cols() : G.cols());
    const int rows = k + e;

    std::vector<bool> negate(rows, false);
    for (int i = 0; i < k; ++i) {
        negate[i] = b[i] < 0.0;
    }
    for (int i = 0; i < e; ++i) {
        negate[k + i] = d[i] < 0.0;
    }

    int n_art = e;  // every equality row needs an artificial
    for (int i = 0; i < k; ++i) {
        if (negate[i]) {
            ++n_art;
        }
    }

    StandardForm sf;
    sf.n_free = n;
    sf.first_artificial = 2 * n + k;
    sf.n_artificial = n_art;
    const int cols = 2 * n + k + n_art;
    sf.T = MatrixXd::Zero(rows, cols);
    sf.rhs = VectorXd::Zero(rows);
    sf.basis.assign(rows, -1);

    int art = 0;
    for (int i = 0; i < rows; ++i) {
        const double sign = negate[i] ? -1.0 : 1.0;
        const auto row = (i < k) ? A.row(i) : G.row(i - k);
        const double rv = (i < k) ? b[i] : d[i - k];
        sf.T.block(i, 0, 1, n) = sign * row;
        sf.T.block(i, n, 1, n) = -sign * row;
        if (i < k) {
            sf.T(i, 2 * n + i) = sign;  // slack
        }
        sf.rhs[i] = sign * rv;
        const bool needs_artificial = (i >= k) || negate[i];
        if (needs_artificial) {
            sf.T(i, sf.first_artificial + art) = 1.0;
            sf.basis[i] = sf.first_artificial + art;
            ++art;
        } else {
            sf.basis[i] = 2 * n + i;
        }
    }
    return sf;
}

// Returns false when the constraints are infeasible; on success the
// tableau holds a feasible basis with artificials eliminated or their
// rows inert.
bool phase_one(StandardForm& sf) {
    const Eigen::Index cols = sf.T.cols();
    if (sf.n_artificial == 0) {
        return true;
    }
    VectorXd cost = VectorXd::Zero(cols);
    for (int j = 0; j < sf.n_artificial; ++j) {
        cost[sf.first_artificial + j] = 1.0;
    }
    std::vector<bool> allowed(cols, true);
    run_simplex(sf.T, sf.rhs, cost, sf.basis, allowed);

    double infeasibility = 0.0;
    for (std::size_t i = 0; i < sf.basis.size(); ++i) {
        if (sf.basis[i] >= sf.first_artificial) {
            infeasibility += sf.rhs[i];
        }
    }
    if (infeasibility > 1e-8) {
        return false;
    }
    // Pivot any zero-valued basic artificial onto a structural column.
    for (std::size_t i = 0; i < sf.basis.size(); ++i) {
        if (sf.basis[i] < sf.first_artificial) {
            continue;
        }
        for (Eigen::Index j = 0; j < sf.first_artificial; ++j) {
            if (std::abs(sf.T(i, j)) > kPivotTol) {
                const double piv = sf.T(i, j);
                sf.T.row(i) /= piv;
                sf.rhs[i] /= piv;
                for (Eigen::Index r = 0; r < sf.T.rows(); ++r) {
                    if (static_cast<std::size_t>(r) == i) {
                        continue;
                    }
                    const double factor = sf.T(r, j);
                    if (factor != 0.0) {
                        sf.T.row(r) -= factor * sf.T.row(i);
                        sf.rhs[r] -= factor * sf.rhs[i];
                    }
                }
                sf.basis[i] = static_cast<int>(j);
                break;
            }
        }
        // A row whose artificial cannot be pivoted out is redundant; it
        // stays basic at zero and the artificial is barred from re-entry.
    }
    return true;
}

}  // namespace

LpResult solve_lp(const VectorXd& c, const Polyhedron& poly) {
    const int n = poly.dim();
    StandardForm sf = build_standard_form(poly.H, poly.h, MatrixXd(0, n), VectorXd(0));
    LpResult out;
    if (!phase_one(sf)) {
        out.status = LpStatus::Infeasible;
        return out;
    }
    const Eigen::Index cols = sf.T.cols();
    VectorXd cost = VectorXd::Zero(cols);
    cost.segment(0, n) = -c;  // maximize cᵀx = minimize −cᵀx⁺ + cᵀx⁻
    cost.segment(n, n) = c;
    std::vector<bool> allowed(cols, true);
    for (int j = 0; j < sf.n_artificial; ++j) {
        allowed[sf.first_artificial + j] = false;
    }
    const SimplexStatus st = run_simplex(sf.T, sf.rhs, cost, sf.basis, allowed);
    if (st == SimplexStatus::Unbounded) {
        out.status = LpStatus::Unbounded;
        return out;
    }
    VectorXd v = VectorXd::Zero(cols);
    for (std::size_t i = 0; i < sf.basis.size(); ++i) {
        v[sf.basis[i]] = sf.rhs[i];
    }
    out.status = LpStatus::Optimal;
    out.z = v.segment(0, n) - v.segment(n, n);
    out.value = c.dot(out.z);
    return out;
}

bool linear_constraints_feasible(const MatrixXd& A, const VectorXd& b, const MatrixXd& G,
                                 const VectorXd& d) {
    StandardForm sf = build_standard_form(A, b, G, d);
    return phase_one(sf);
}

}  // namespace hmpc
