#pragma once

#include <Eigen/Dense>

#include "hmpc/polyhedron.hpp"

namespace hmpc {

struct MoasResult {
    Polyhedron set;
    int determinedness_index = 0;  ///< first t at which new rows add nothing
};

/// Maximal output admissible set of x⁺ = A_cl x under the constraints
/// `cons` (which must contain the origin strictly): the set
/// {x : cons.H A_cl^t x ≤ cons.h, t = 0..t*} with redundant rows dropped.
/// Redundancy is decided by per-row LPs. Throws UnstableClosedLoop when
/// the spectral radius of A_cl is ≥ 1 and NotDetermined when t* exceeds
/// max_iter.
MoasResult max_output_admissible_set(const Eigen::MatrixXd& A_cl, const Polyhedron& cons,
                                     int max_iter = 500);

}  // namespace hmpc
