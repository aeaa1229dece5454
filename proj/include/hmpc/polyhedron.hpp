#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

namespace hmpc {

/// Polyhedral set {x : Hx ≤ h}.
struct Polyhedron {
    Eigen::MatrixXd H;
    Eigen::VectorXd h;

    int dim() const { return static_cast<int>(H.cols()); }
    int rows() const { return static_cast<int>(H.rows()); }

    /// max_i (H x − h)_i; ≤ 0 means contained.
    double max_violation(const Eigen::VectorXd& x) const;

    bool contains(const Eigen::VectorXd& x, double tol = 1e-9) const {
        return max_violation(x) <= tol;
    }

    /// Axis-aligned box {x : lo ≤ x ≤ hi}.
    static Polyhedron box(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi);

    /// Serialization as {"H": [[...]], "h": [...]}.
    static Polyhedron from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

/// Stack the rows of two polyhedra over the same space.
Polyhedron intersect(const Polyhedron& a, const Polyhedron& b);

/// Hit-and-run samples started at the origin (which must be contained).
/// Chords in unbounded directions are clipped at ±box_bound. Samples are
/// drawn at `chord_fraction` of each chord so they stay strictly interior.
std::vector<Eigen::VectorXd> hit_and_run_samples(const Polyhedron& poly, int count,
                                                 std::uint64_t seed, double box_bound = 1e3,
                                                 double chord_fraction = 0.99);

}  // namespace hmpc
