#include "hmpc/terminal.hpp"

#include <algorithm>

#include "hmpc/dynamics.hpp"
#include "hmpc/invariant_set.hpp"
#include "hmpc/riccati.hpp"

namespace hmpc {

using Eigen::MatrixXd;
using Eigen::VectorXd;

Polyhedron gain_admissible_states(const Polyhedron& x_set, const Polyhedron& u_set,
                                  const MatrixXd& K) {
    Polyhedron input_rows;
    input_rows.H = -u_set.H * K;  // H_u(−Kx) ≤ h_u
    input_rows.h = u_set.h;
    return intersect(x_set, input_rows);
}

TerminalIngredients make_terminal_ingredients(const MatrixXd& A, const MatrixXd& B,
                                              const MatrixXd& Q, const MatrixXd& R,
                                              const Polyhedron& x_set, const Polyhedron& u_set,
                                              double t_d_set, int max_iter) {
    TerminalIngredients ti;
    ti.P = solve_care(A, B, Q, R);
    ti.K = lqr_gain(ti.P, B, R);
    const auto [Ad, Bd] = discretize_exact_lti(A, B, t_d_set);
    const Polyhedron cons = gain_admissible_states(x_set, u_set, ti.K);
    ti.omega = max_output_admissible_set(Ad - Bd * ti.K, cons, max_iter).set;
    return ti;
}

TerminalCheckReport verify_terminal_conditions(const ContinuousModel& model,
                                               const TerminalIngredients& ti,
                                               const StageCost& cost, const Polyhedron& u_set,
                                               int n_samples, std::uint64_t seed,
                                               double euler_step) {
    TerminalCheckReport report;
    const auto samples = hit_and_run_samples(ti.omega, n_samples, seed);
    for (const VectorXd& x : samples) {
        const VectorXd u = -ti.K * x;
        const VectorXd flow = model.f(x, u);
        const double input_violation = u_set.max_violation(u);
        const double containment_violation = ti.omega.max_violation(x + euler_step * flow);
        // ∇J(x)ᵀ f(x, κ(x)) + l(x, κ(x)) with J(x) = xᵀPx.
        const double decrease = 2.0 * x.dot(ti.P * flow) + cost.l(x, u);
        report.worst_input_violation = std::max(report.worst_input_violation, input_violation);
        report.worst_containment_violation =
            std::max(report.worst_containment_violation, containment_violation);
        report.worst_decrease_violation = std::max(report.worst_decrease_violation, decrease);
        ++report.samples;
    }
    return report;
}

}  // namespace hmpc
