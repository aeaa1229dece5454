#include "hmpc/invariant_set.hpp"

#include <vector>

#include "hmpc/errors.hpp"
#include "hmpc/lp.hpp"

namespace hmpc {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// A candidate row aᵀx ≤ rhs is redundant for `current` iff its maximum
// over the set does not exceed rhs. Unbounded maxima are not redundant.
bool row_redundant(const Polyhedron& current, const VectorXd& a, double rhs) {
    const LpResult lp = solve_lp(a, current);
    if (lp.status == LpStatus::Unbounded) {
        return false;
    }
    if (lp.status == LpStatus::Infeasible) {
        throw Error("admissible-set iteration produced an empty set");
    }
    return lp.value <= rhs + 1e-9;
}

}  // namespace

MoasResult max_output_admissible_set(const MatrixXd& A_cl, const Polyhedron& cons, int max_iter) {
    const Eigen::EigenSolver<MatrixXd> eig(A_cl);
    if (eig.eigenvalues().cwiseAbs().maxCoeff() >= 1.0) {
        throw UnstableClosedLoop("closed-loop matrix must be Schur stable");
    }
    if (cons.max_violation(VectorXd::Zero(cons.dim())) >= 0.0) {
        throw Error("constraint set must contain the origin strictly");
    }

    MoasResult out;
    out.set = cons;
    MatrixXd powered = A_cl;  // A_cl^{t+1} while probing step t
    for (int t = 0; t <= max_iter; ++t) {
        const MatrixXd candidate_rows = cons.H * powered;
        bool all_redundant = true;
        std::vector<int> fresh;
        for (int i = 0; i < cons.rows(); ++i) {
            if (!row_redundant(out.set, candidate_rows.row(i).transpose(), cons.h[i])) {
                all_redundant = false;
                fresh.push_back(i);
            }
        }
        if (all_redundant) {
            out.determinedness_index = t;
            return out;
        }
        Polyhedron grown;
        grown.H = MatrixXd(out.set.rows() + static_cast<int>(fresh.size()), cons.dim());
        grown.h = VectorXd(out.set.rows() + static_cast<int>(fresh.size()));
        grown.H.topRows(out.set.rows()) = out.set.H;
        grown.h.head(out.set.rows()) = out.set.h;
        for (std::size_t j = 0; j < fresh.size(); ++j) {
            grown.H.row(out.set.rows() + static_cast<int>(j)) = candidate_rows.row(fresh[j]);
            grown.h[out.set.rows() + static_cast<int>(j)] = cons.h[fresh[j]];
        }
        out.set = std::move(grown);
        powered = powered * A_cl;
    }
    throw NotDetermined("admissible set not finitely determined within the iteration cap");
}

}  // namespace hmpc
