#pragma once

#include <iosfwd>
#include <string>

#include "cdanse/fem.hpp"
#include "cdanse/mesh.hpp"

namespace cdanse {

enum class NudgingMode { off, penalty, direct };

const char* to_string(NudgingMode mode);
NudgingMode nudging_mode_from_string(const std::string& s);

struct NudgingConfig {
    NudgingMode mode = NudgingMode::off;
    double mu = 0.0;            // penalty weight, penalty mode only
    bool allow_small_mu = false;

    /// Penalty threshold nu / (4 H^2), interpolation constant taken as 1.
    static double mu_min(double nu, double H) { return nu / (4.0 * H * H); }

    /// Throws on invalid configuration; returns true when mu is below the
    /// theoretical minimum and only the override flag allowed it through.
    bool validate(double nu, double H) const;
};

/// Sampled reference values at the observation nodes.
struct ObservationData {
    ObservationNodeSet nodes;
    std::vector<Vec2> values;  // one sample per node, finite
    double H = 0.0;
};

/// Samples a velocity coefficient vector at the observation nodes
/// (vertex coefficients of the quadratic space are point values).
ObservationData sample_observations(const MixedSpace& space, const ObservationNodeSet& nodes,
                                    const Vector& velocity);

/// One row per (node, component) extracting the vertex velocity dof.
SparseMatrix build_sampling_operator(const MixedSpace& space, const ObservationNodeSet& nodes);

/// Blockwise piecewise-linear mass matrix on the coarse mesh, interleaved
/// (node0 x, node0 y, node1 x, ...) to match the sampling operator rows,
/// so that (I_H a, I_H b) = (S a)^T M_H (S b).
SparseMatrix build_coarse_mass(const ObservationNodeSet& nodes);

struct NudgingContribution {
    SparseMatrix matrix;  // mu S^T M_H S, velocity-sized, symmetric PSD
    Vector rhs;           // mu S^T M_H g
};

NudgingContribution nudging_contribution(const SparseMatrix& S, const SparseMatrix& M_H,
                                         double mu, const ObservationData& data);

/// Adds observation-node velocity constraints to bc (mu = infinity path).
/// Nodes already pinned by boundary conditions are skipped; their measured
/// values must agree with the boundary data within 1e-10 or this throws.
VelocityConstraints apply_direct_enforcement(const VelocityConstraints& bc,
                                             const MixedSpace& space,
                                             const ObservationData& data);

/// Nodal values of the coarse piecewise-linear interpolant at every fine
/// velocity dof location, returned as a fine velocity coefficient vector.
/// Linear functions on the coarse mesh are exactly representable in the
/// fine quadratic space, so norms of v - I_H v are computable exactly.
Vector interpolant_on_fine(const MixedSpace& space, const ObservationData& data);

/// Plain-text serialization: "H <value>" header then "node_index ux uy"
/// lines, 17 significant digits (decimal round-trip is bit-exact).
void write_observation_data(const ObservationData& data, std::ostream& out);
ObservationData read_observation_data(const Mesh& fine, std::istream& in);

}  // namespace cdanse
