#include "hmpc/polyhedron.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "hmpc/errors.hpp"

namespace hmpc {

using Eigen::MatrixXd;
using Eigen::VectorXd;

double Polyhedron::max_violation(const VectorXd& x) const {
    if (H.rows() == 0) {
        return -std::numeric_limits<double>::infinity();
    }
    return (H * x - h).maxCoeff();
}

Polyhedron Polyhedron::box(const VectorXd& lo, const VectorXd& hi) {
    const Eigen::Index n = lo.size();
    Polyhedron p;
    p.H = MatrixXd::Zero(2 * n, n);
    p.h = VectorXd::Zero(2 * n);
    for (Eigen::Index i = 0; i < n; ++i) {
        p.H(2 * i, i) = 1.0;
        p.h[2 * i] = hi[i];
        p.H(2 * i + 1, i) = -1.0;
        p.h[2 * i + 1] = -lo[i];
    }
    return p;
}

Polyhedron Polyhedron::from_json(const nlohmann::json& j) {
    const auto& rows = j.at("H");
    const auto& rhs = j.at("h");
    Polyhedron p;
    const auto k = rows.size();
    if (k == 0) {
        throw ConfigError("polyhedron needs at least one row");
    }
    const auto n = rows[0].size();
    p.H = MatrixXd(k, n);
    p.h = VectorXd(k);
    for (std::size_t i = 0; i < k; ++i) {
        if (rows[i].size() != n) {
            throw ConfigError("ragged polyhedron H matrix");
        }
        for (std::size_t c = 0; c < n; ++c) {
            p.H(i, c) = rows[i][c].get<double>();
        }
        p.h[i] = rhs.at(i).get<double>();
        if (!std::isfinite(p.h[i]) || p.H.row(i).norm() == 0.0) {
            throw ConfigError("polyhedron rows must be nonzero with finite bounds");
        }
    }
    return p;
}

nlohmann::json Polyhedron::to_json() const {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < H.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index c = 0; c < H.cols(); ++c) {
            row.push_back(H(i, c));
        }
        rows.push_back(row);
    }
    nlohmann::json rhs = nlohmann::json::array();
    for (Eigen::Index i = 0; i < h.size(); ++i) {
        rhs.push_back(h[i]);
    }
    return {{"H", rows}, {"h", rhs}};
}

Polyhedron intersect(const Polyhedron& a, const Polyhedron& b) {
    Polyhedron out;
    out.H = MatrixXd(a.rows() + b.rows(), a.dim());
    out.H << a.H, b.H;
    out.h = VectorXd(a.rows() + b.rows());
    out.h << a.h, b.h;
    return out;
}

std::vector<VectorXd> hit_and_run_samples(const Polyhedron& poly, int count, std::uint64_t seed,
                                          double box_bound, double chord_fraction) {
    const int n = poly.dim();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    std::vector<VectorXd> samples;
    samples.reserve(count);
    VectorXd x = VectorXd::Zero(n);
    while (static_cast<int>(samples.size()) < count) {
        VectorXd dir(n);
        for (int i = 0; i < n; ++i) {
            dir[i] = gauss(rng);
        }
        const double norm = dir.norm();
        if (norm < 1e-12) {
            continue;
        }
        dir /= norm;
        // Chord {x + t dir} ∩ poly, clipped to ±box_bound.
        double t_lo = -box_bound;
        double t_hi = box_bound;
        const VectorXd Hd = poly.H * dir;
        const VectorXd slack = poly.h - poly.H * x;
        for (int i = 0; i < poly.rows(); ++i) {
            if (Hd[i] > 1e-14) {
                t_hi = std::min(t_hi, slack[i] / Hd[i]);
            } else if (Hd[i] < -1e-14) {
                t_lo = std::max(t_lo, slack[i] / Hd[i]);
            }
        }
        if (t_hi < t_lo) {
            continue;  // numerical corner, draw a fresh direction
        }
        const double t = chord_fraction * (t_lo + unif(rng) * (t_hi - t_lo));
        x += t * dir;
        samples.push_back(x);
    }
    return samples;
}

}  // namespace hmpc
