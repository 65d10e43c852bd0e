#pragma once

#include <Eigen/Sparse>
#include <Eigen/Dense>

#include <array>
#include <functional>
#include <vector>

#include "cdanse/mesh.hpp"

namespace cdanse {

using SparseMatrix = Eigen::SparseMatrix<double>;
using Vector = Eigen::VectorXd;

/// Taylor-Hood (P2,P1) mixed space over a triangulation.
///
/// Scalar velocity dofs are vertices followed by edge midpoints; the two
/// velocity components of scalar dof s interleave as 2s (x) and 2s+1 (y).
/// Pressure dofs are the vertices. In assembled saddle systems velocity
/// rows come first, pressure rows after.
struct MixedSpace {
    Mesh mesh;
    int velocity_scalar_count = 0;  // V + E
    int velocity_dof_count = 0;     // 2 * (V + E)
    int pressure_dof_count = 0;     // V
    std::vector<std::array<int, 6>> element_scalar_dofs;  // P2 local->global per triangle
    std::vector<int> boundary_scalar_dofs;                // scalar dofs on the boundary
    std::vector<BoundaryTag> boundary_scalar_tag;         // parallel to boundary_scalar_dofs

    int total_dofs() const { return velocity_dof_count + pressure_dof_count; }
};

MixedSpace build_mixed_space(Mesh mesh);

/// One (velocity, pressure) coefficient pair. Construction rejects
/// non-finite entries; solvers check finiteness before constructing.
struct State {
    Vector velocity;
    Vector pressure;

    State() = default;
    State(Vector v, Vector p);
};

State zero_state(const MixedSpace& space);

/// Velocity Dirichlet data as parallel dof/value arrays, sorted by dof.
struct VelocityConstraints {
    std::vector<int> dofs;
    std::vector<double> values;

    bool is_constrained(int dof) const;
};

/// Lid/wall data: (lid_speed, 0) on lid dofs, zero on wall dofs.
VelocityConstraints boundary_constraints(const MixedSpace& space, double lid_speed);

struct LinearBlocks {
    SparseMatrix A;   // nu * velocity stiffness
    SparseMatrix B;   // divergence rows: B(p, 2j+c) = (d phi_j / d x_c, psi_p)
    SparseMatrix Mv;  // velocity mass
    SparseMatrix Mp;  // pressure mass
    SparseMatrix K1;  // unscaled velocity stiffness (H1 seminorm, dual norms)
};

/// Assembles all velocity/pressure blocks with the 7-point degree-5 rule,
/// which integrates every bilinear and trilinear product of this element
/// pair exactly.
LinearBlocks assemble_linear_blocks(const MixedSpace& space, double nu);

enum class ConvectionMode {
    picard,       // N(w)[i][j]  = b(w, phi_j, phi_i)
    newton_extra  // N'(w)[i][j] = b(phi_j, w, phi_i)
};

/// Skew-symmetric convection matrix for the frozen field w
/// (velocity coefficient vector on the same space).
SparseMatrix assemble_convection(const MixedSpace& space, const Vector& w, ConvectionMode mode);

/// Velocity load vector for an analytic forcing, integrated with a
/// high-order (degree >= 11) rule since f need not be polynomial.
Vector assemble_forcing(const MixedSpace& space,
                        const std::function<Vec2(double, double)>& f);

/// Constrained saddle system after symmetric elimination of Dirichlet
/// velocity dofs and the pinned pressure dof 0. Constrained unknowns keep
/// identity rows so the solve writes their values verbatim.
struct SaddleSystem {
    SparseMatrix K;
    Vector rhs;
    std::vector<char> constrained;  // per global dof
    Vector constrained_value;
    int n_velocity = 0;
    int n_pressure = 0;
};

/// velocity_block is the full velocity-velocity operator (stiffness plus
/// convection plus any nudging addend); rhs_velocity covers the momentum rows.
SaddleSystem assemble_saddle_system(const MixedSpace& space,
                                    const SparseMatrix& velocity_block,
                                    const SparseMatrix& B,
                                    const Vector& rhs_velocity,
                                    const VelocityConstraints& bc);

/// Euclidean norm of the free-dof algebraic residual of the nonlinear
/// weak form at s: momentum rows A u + N(u) u + B^T p - f over
/// unconstrained velocity dofs plus divergence rows B u.
double nonlinear_residual(const MixedSpace& space, const LinearBlocks& blocks,
                          const Vector& forcing, const State& s,
                          const VelocityConstraints& bc);

/// Convenience overload assembling blocks for (nu, lid_speed) with zero forcing.
double nonlinear_residual(const MixedSpace& space, const State& s, double nu,
                          double lid_speed);

/// Discrete dual norm sqrt(f^T K1_ff^{-1} f) over free velocity dofs.
/// Throws if the restricted stiffness is not SPD (misconstrained space).
double discrete_dual_norm(const Vector& f_velocity, const SparseMatrix& K1,
                          const VelocityConstraints& bc);

/// sqrt(v^T Q v), clamped at zero against roundoff.
double quadratic_norm(const Vector& v, const SparseMatrix& Q);

inline double h1_seminorm(const Vector& v, const LinearBlocks& blocks) {
    return quadratic_norm(v, blocks.K1);
}
inline double l2_norm(const Vector& v, const LinearBlocks& blocks) {
    return quadratic_norm(v, blocks.Mv);
}

/// Restriction of a symmetric operator to the velocity dofs not
/// constrained by bc (used by dual norms and the Anderson inner product).
SparseMatrix restrict_to_free(const SparseMatrix& K, const VelocityConstraints& bc);

/// Gather / scatter between full velocity vectors and free-dof vectors.
Vector gather_free(const Vector& full, const VelocityConstraints& bc);
Vector scatter_free(const Vector& free_part, const VelocityConstraints& bc, int full_size);

}  // namespace cdanse
