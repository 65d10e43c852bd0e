#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <random>

#include "cdanse/fem.hpp"
#include "cdanse/mesh.hpp"
#include "cdanse/solvers.hpp"

using namespace cdanse;

namespace {

// ---------------------------------------------------------------------------
// Test-side oracle: independent degree-15 integration (Gauss-Legendre through
// the Duffy map) of the same weak forms, assembled densely.
// ---------------------------------------------------------------------------

struct OracleBasis {
    std::array<double, 6> n;
    std::array<double, 6> gx, gy;  // reference gradients
};

OracleBasis oracle_p2(double xi, double eta) {
    const double l0 = 1.0 - xi - eta, l1 = xi, l2 = eta;
    OracleBasis b;
    b.n = {l0 * (2 * l0 - 1), l1 * (2 * l1 - 1), l2 * (2 * l2 - 1),
           4 * l0 * l1, 4 * l1 * l2, 4 * l2 * l0};
    b.gx = {1 - 4 * l0, 4 * l1 - 1, 0, 4 * (l0 - l1), 4 * l2, -4 * l2};
    b.gy = {1 - 4 * l0, 0, 4 * l2 - 1, -4 * l1, 4 * l1, 4 * (l0 - l2)};
    return b;
}

const std::array<double, 10> kGl10X = {
    -0.9739065285171717, -0.8650633666889845, -0.6794095682990244, -0.4333953941292472,
    -0.1488743389816312, 0.1488743389816312,  0.4333953941292472,  0.6794095682990244,
    0.8650633666889845,  0.9739065285171717};
const std::array<double, 10> kGl10W = {
    0.0666713443086881, 0.1494513491505806, 0.2190863625159820, 0.2692667193099963,
    0.2955242247147529, 0.2955242247147529, 0.2692667193099963, 0.2190863625159820,
    0.1494513491505806, 0.0666713443086881};

struct OracleMatrices {
    Eigen::MatrixXd K1, Mv, Mp, B, Npic, Nnew;
};

// w given as an analytic linear field evaluated at quadrature points
OracleMatrices oracle_assemble(const MixedSpace& space,
                               const std::function<Vec2(double, double)>& w,
                               const std::function<Eigen::Matrix2d(double, double)>& grad_w) {
    const Mesh& mesh = space.mesh;
    const int nv = space.velocity_dof_count;
    const int np = space.pressure_dof_count;
    OracleMatrices M;
    M.K1 = Eigen::MatrixXd::Zero(nv, nv);
    M.Mv = Eigen::MatrixXd::Zero(nv, nv);
    M.Mp = Eigen::MatrixXd::Zero(np, np);
    M.B = Eigen::MatrixXd::Zero(np, nv);
    M.Npic = Eigen::MatrixXd::Zero(nv, nv);
    M.Nnew = Eigen::MatrixXd::Zero(nv, nv);

    for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
        const auto& tri = mesh.triangles[t];
        const auto& sd = space.element_scalar_dofs[t];
        const Vec2 p0 = mesh.vertices[tri[0]];
        const Vec2 p1 = mesh.vertices[tri[1]];
        const Vec2 p2 = mesh.vertices[tri[2]];
        const double a = p1.x - p0.x, b = p2.x - p0.x;
        const double c = p1.y - p0.y, d = p2.y - p0.y;
        const double det = a * d - b * c;

        for (int qs = 0; qs < 10; ++qs) {
            const double s = 0.5 * (1 + kGl10X[qs]);
            for (int qt = 0; qt < 10; ++qt) {
                const double tt = 0.5 * (1 + kGl10X[qt]);
                const double xi = s, eta = tt * (1 - s);
                const double wq = 0.25 * kGl10W[qs] * kGl10W[qt] * (1 - s) * det;
                const double x = p0.x + a * xi + b * eta;
                const double y = p0.y + c * xi + d * eta;
                const OracleBasis e = oracle_p2(xi, eta);
                double px[6], py[6];
                for (int i = 0; i < 6; ++i) {
                    px[i] = (d * e.gx[i] - c * e.gy[i]) / det;
                    py[i] = (-b * e.gx[i] + a * e.gy[i]) / det;
                }
                const double l[3] = {1 - xi - eta, xi, eta};
                const Vec2 wv = w(x, y);
                const Eigen::Matrix2d wg = grad_w(x, y);

                for (int i = 0; i < 6; ++i) {
                    for (int j = 0; j < 6; ++j) {
                        const double k1 = wq * (px[i] * px[j] + py[i] * py[j]);
                        const double mv = wq * e.n[i] * e.n[j];
                        const double conv_i = wv.x * px[i] + wv.y * py[i];
                        const double conv_j = wv.x * px[j] + wv.y * py[j];
                        const double npic = 0.5 * wq * (conv_j * e.n[i] - conv_i * e.n[j]);
                        for (int comp = 0; comp < 2; ++comp) {
                            M.K1(2 * sd[i] + comp, 2 * sd[j] + comp) += k1;
                            M.Mv(2 * sd[i] + comp, 2 * sd[j] + comp) += mv;
                            M.Npic(2 * sd[i] + comp, 2 * sd[j] + comp) += npic;
                        }
                        // b(phi_j e_cc, w, phi_i e_c)
                        const double gi[2] = {px[i], py[i]};
                        const double wval[2] = {wv.x, wv.y};
                        for (int comp = 0; comp < 2; ++comp)
                            for (int cc = 0; cc < 2; ++cc)
                                M.Nnew(2 * sd[i] + comp, 2 * sd[j] + cc) +=
                                    0.5 * wq *
                                    (e.n[i] * e.n[j] * wg(comp, cc) -
                                     e.n[j] * gi[cc] * wval[comp]);
                    }
                }
                for (int p = 0; p < 3; ++p) {
                    for (int r = 0; r < 3; ++r) M.Mp(tri[p], tri[r]) += wq * l[p] * l[r];
                    for (int j = 0; j < 6; ++j) {
                        M.B(tri[p], 2 * sd[j]) += wq * l[p] * px[j];
                        M.B(tri[p], 2 * sd[j] + 1) += wq * l[p] * py[j];
                    }
                }
            }
        }
    }
    return M;
}

void check_close(const Eigen::MatrixXd& impl, const Eigen::MatrixXd& oracle, double tol) {
    REQUIRE(impl.rows() == oracle.rows());
    REQUIRE(impl.cols() == oracle.cols());
    const double err = (impl - oracle).cwiseAbs().maxCoeff();
    CHECK(err <= tol * (1.0 + oracle.cwiseAbs().maxCoeff()));
}

Vector interpolate_velocity(const MixedSpace& space,
                            const std::function<Vec2(double, double)>& u) {
    const Mesh& mesh = space.mesh;
    const int nvtx = static_cast<int>(mesh.vertices.size());
    Vector v(space.velocity_dof_count);
    for (int i = 0; i < nvtx; ++i) {
        const Vec2 val = u(mesh.vertices[i].x, mesh.vertices[i].y);
        v[2 * i] = val.x;
        v[2 * i + 1] = val.y;
    }
    for (int e = 0; e < static_cast<int>(mesh.edges.size()); ++e) {
        const Vec2 m = mesh.midpoint(e);
        const Vec2 val = u(m.x, m.y);
        v[2 * (nvtx + e)] = val.x;
        v[2 * (nvtx + e) + 1] = val.y;
    }
    return v;
}

// Forced Stokes problem with a stream-function solution that vanishes on
// the boundary together with its gradient.
double poly_g(double x) { return x * x * (1 - x) * (1 - x); }
double poly_g1(double x) { return 2 * x - 6 * x * x + 4 * x * x * x; }
double poly_g2(double x) { return 2 - 12 * x + 12 * x * x; }
double poly_g3(double x) { return -12 + 24 * x; }

Vec2 manufactured_u(double x, double y) {
    return {poly_g(x) * poly_g1(y), -poly_g1(x) * poly_g(y)};
}

Eigen::Matrix2d manufactured_grad_u(double x, double y) {
    Eigen::Matrix2d g;
    g(0, 0) = poly_g1(x) * poly_g1(y);
    g(0, 1) = poly_g(x) * poly_g2(y);
    g(1, 0) = -poly_g2(x) * poly_g(y);
    g(1, 1) = -poly_g1(x) * poly_g1(y);
    return g;
}

Vec2 manufactured_forcing_stokes(double x, double y) {  // nu = 1, p = x^3 + y^3 - 1/2
    const double lap_u1 = poly_g2(x) * poly_g1(y) + poly_g(x) * poly_g3(y);
    const double lap_u2 = -poly_g3(x) * poly_g(y) - poly_g1(x) * poly_g2(y);
    return {-lap_u1 + 3 * x * x, -lap_u2 + 3 * y * y};
}

double h1_error_vs_exact(const MixedSpace& space, const Vector& uh,
                         const std::function<Eigen::Matrix2d(double, double)>& grad_exact) {
    const Mesh& mesh = space.mesh;
    double err2 = 0.0;
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
        const auto& tri = mesh.triangles[t];
        const auto& sd = space.element_scalar_dofs[t];
        const Vec2 p0 = mesh.vertices[tri[0]];
        const Vec2 p1 = mesh.vertices[tri[1]];
        const Vec2 p2 = mesh.vertices[tri[2]];
        const double a = p1.x - p0.x, b = p2.x - p0.x;
        const double c = p1.y - p0.y, d = p2.y - p0.y;
        const double det = a * d - b * c;
        for (int qs = 0; qs < 10; ++qs) {
            const double s = 0.5 * (1 + kGl10X[qs]);
            for (int qt = 0; qt < 10; ++qt) {
                const double tt = 0.5 * (1 + kGl10X[qt]);
                const double xi = s, eta = tt * (1 - s);
                const double wq = 0.25 * kGl10W[qs] * kGl10W[qt] * (1 - s) * det;
                const double x = p0.x + a * xi + b * eta;
                const double y = p0.y + c * xi + d * eta;
                const OracleBasis e = oracle_p2(xi, eta);
                Eigen::Matrix2d gh = Eigen::Matrix2d::Zero();
                for (int i = 0; i < 6; ++i) {
                    const double px = (d * e.gx[i] - c * e.gy[i]) / det;
                    const double py = (-b * e.gx[i] + a * e.gy[i]) / det;
                    gh(0, 0) += uh[2 * sd[i]] * px;
                    gh(0, 1) += uh[2 * sd[i]] * py;
                    gh(1, 0) += uh[2 * sd[i] + 1] * px;
                    gh(1, 1) += uh[2 * sd[i] + 1] * py;
                }
                err2 += wq * (gh - grad_exact(x, y)).squaredNorm();
            }
        }
    }
    return std::sqrt(err2);
}

State solve_stokes(const Problem& p) {
    const SaddleSystem sys =
        assemble_saddle_system(p.space, p.blocks.A, p.blocks.B, p.forcing, p.bc);
    Vector x = linear_solve(sys.K, sys.rhs);
    for (int i = 0; i < sys.n_velocity + sys.n_pressure; ++i)
        if (sys.constrained[i]) x[i] = sys.constrained_value[i];
    return State(x.head(sys.n_velocity), x.tail(sys.n_pressure));
}

}  // namespace

TEST_CASE("dof counts follow the element pair") {
    const MixedSpace space = build_mixed_space(build_uniform_triangulation(4));
    const int V = 25, E = 2 * 4 * 5 + 16;
    CHECK(space.velocity_dof_count == 2 * (V + E));
    CHECK(space.pressure_dof_count == V);
}

TEST_CASE("stiffness annihilates constant fields on interior dofs") {
    const MixedSpace space = build_mixed_space(build_uniform_triangulation(5));
    const LinearBlocks blocks = assemble_linear_blocks(space, 0.7);
    const Vector c = interpolate_velocity(space, [](double, double) {
        return Vec2{2.5, -1.25};
    });
    const Vector r = blocks.A * c;
    const VelocityConstraints bc = boundary_constraints(space, 1.0);
    for (int i = 0; i < space.velocity_dof_count; ++i)
        if (!bc.is_constrained(i)) CHECK(std::abs(r[i]) <= 1e-12);
}

TEST_CASE("pressure mass integrates one") {
    const MixedSpace space = build_mixed_space(build_uniform_triangulation(6));
    const LinearBlocks blocks = assemble_linear_blocks(space, 1.0);
    const Vector ones = Vector::Ones(space.pressure_dof_count);
    CHECK(ones.dot(blocks.Mp * ones) == doctest::Approx(1.0).epsilon(1e-13));
}

TEST_CASE("pressure mass on the two-triangle mesh matches hand integration") {
    const MixedSpace space = build_mixed_space(build_uniform_triangulation(1));
    const LinearBlocks blocks = assemble_linear_blocks(space, 1.0);
    Eigen::MatrixXd expected(4, 4);
    // vertices: (0,0),(1,0),(0,1),(1,1); cells split along (0,0)-(1,1)
    expected << 4, 1, 1, 2,
                1, 2, 0, 1,
                1, 0, 2, 1,
                2, 1, 1, 4;
    expected /= 24.0;
    check_close(Eigen::MatrixXd(blocks.Mp), expected, 1e-14);
}

TEST_CASE("convection vanishes for a zero convecting field") {
    const MixedSpace space = build_mixed_space(build_uniform_triangulation(3));
    const SparseMatrix N = assemble_convection(space, Vector::Zero(space.velocity_dof_count),
                                               ConvectionMode::picard);
    CHECK(N.norm() == 0.0);
}

TEST_CASE("convection rejects mismatched field sizes") {
    const MixedSpace space = build_mixed_space(build_uniform_triangulation(3));
    CHECK_THROWS_AS(assemble_convection(space, Vector::Zero(7), ConvectionMode::picard),
                    std::invalid_argument);
}

TEST_CASE("skew symmetry on randomized fields") {
    const MixedSpace space = build_mixed_space(build_uniform_triangulation(4));
    const LinearBlocks blocks = assemble_linear_blocks(space, 1.0);
    std::mt19937 rng(20240405);
    std::normal_distribution<double> dist;
    for (int rep = 0; rep < 10; ++rep) {
        Vector w(space.velocity_dof_count), v(space.velocity_dof_count);
        for (int i = 0; i < space.velocity_dof_count; ++i) {
            w[i] = dist(rng);
            v[i] = dist(rng);
        }
        const SparseMatrix N = assemble_convection(space, w, ConvectionMode::picard);
        const double scale = v.squaredNorm() * (1.0 + quadratic_norm(w, blocks.K1));
        CHECK(std::abs(v.dot(N * v)) <= 1e-12 * scale);
    }
}

TEST_CASE("assembled operators match the independent high-order quadrature oracle") {
    const MixedSpace space = build_mixed_space(build_uniform_triangulation(1));
    const LinearBlocks blocks = assemble_linear_blocks(space, 1.0);

    auto wfun = [](double x, double y) {
        return Vec2{0.3 + 1.2 * x - 0.7 * y, -0.4 + 0.5 * x + 0.9 * y};
    };
    auto wgrad = [](double, double) {
        Eigen::Matrix2d g;
        g << 1.2, -0.7, 0.5, 0.9;
        return g;
    };
    const Vector wcoef = interpolate_velocity(space, wfun);
    const SparseMatrix Npic = assemble_convection(space, wcoef, ConvectionMode::picard);
    const SparseMatrix Nnew = assemble_convection(space, wcoef, ConvectionMode::newton_extra);

    const OracleMatrices oracle = oracle_assemble(space, wfun, wgrad);
    check_close(Eigen::MatrixXd(blocks.K1), oracle.K1, 1e-12);
    check_close(Eigen::MatrixXd(blocks.Mv), oracle.Mv, 1e-12);
    check_close(Eigen::MatrixXd(blocks.Mp), oracle.Mp, 1e-12);
    check_close(Eigen::MatrixXd(blocks.B), oracle.B, 1e-12);
    check_close(Eigen::MatrixXd(Npic), oracle.Npic, 1e-12);
    check_close(Eigen::MatrixXd(Nnew), oracle.Nnew, 1e-12);
}

TEST_CASE("operator symmetry") {
    const MixedSpace space = build_mixed_space(build_uniform_triangulation(4));
    const LinearBlocks blocks = assemble_linear_blocks(space, 0.01);
    for (const SparseMatrix* K : {&blocks.A, &blocks.K1, &blocks.Mv, &blocks.Mp}) {
        const SparseMatrix diff = *K - SparseMatrix(K->transpose());
        double kmax = 0.0;
        for (int c = 0; c < K->outerSize(); ++c)
            for (SparseMatrix::InnerIterator it(*K, c); it; ++it)
                kmax = std::max(kmax, std::abs(it.value()));
        const double dmax = diff.nonZeros() ? diff.coeffs().cwiseAbs().maxCoeff() : 0.0;
        CHECK(dmax <= 1e-12 * kmax);
    }
}

TEST_CASE("constrained Stokes block is symmetric on free dofs") {
    const MixedSpace space = build_mixed_space(build_uniform_triangulation(4));
    const LinearBlocks blocks = assemble_linear_blocks(space, 1.0);
    const VelocityConstraints bc = boundary_constraints(space, 1.0);
    const SaddleSystem sys = assemble_saddle_system(
        space, blocks.A, blocks.B, Vector::Zero(space.velocity_dof_count), bc);
    const SparseMatrix diff = sys.K - SparseMatrix(sys.K.transpose());
    const double dmax = diff.nonZeros() ? diff.coeffs().cwiseAbs().maxCoeff() : 0.0;
    CHECK(dmax <= 1e-12);
}

TEST_CASE("unforced homogeneous problem solves to zero") {
    Problem p = make_cavity_problem(4, 50.0, /*lid_speed=*/0.0);
    const State s = solve_stokes(p);
    CHECK(s.velocity.cwiseAbs().maxCoeff() <= 1e-13);
    CHECK(s.pressure.cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("lid dofs take the prescribed speed in solved states") {
    Problem p = make_cavity_problem(8, 100.0);
    SaddleSolver solver;
    StepContext ctx{p, p.bc, nullptr, solver};
    const State s = picard_step(ctx, zero_state(p.space));
    const Mesh& mesh = p.space.mesh;
    const int nvtx = static_cast<int>(mesh.vertices.size());
    for (int v = 0; v < nvtx; ++v) {
        if (mesh.vertex_tag[v] == BoundaryTag::lid) {
            CHECK(s.velocity[2 * v] == 1.0);
            CHECK(s.velocity[2 * v + 1] == 0.0);
        } else if (mesh.vertex_tag[v] == BoundaryTag::wall) {
            CHECK(s.velocity[2 * v] == 0.0);
        }
    }
    for (int e = 0; e < static_cast<int>(mesh.edges.size()); ++e)
        if (mesh.edges[e].tag == BoundaryTag::lid)
            CHECK(s.velocity[2 * (nvtx + e)] == 1.0);
}

TEST_CASE("nonlinear residual: zero state with driven lid is inconsistent") {
    const MixedSpace space = build_mixed_space(build_uniform_triangulation(4));
    const State zero = zero_state(space);
    CHECK(nonlinear_residual(space, zero, 0.01, 1.0) > 1e-3);
}

TEST_CASE("nonlinear residual vanishes at a converged solve") {
    Problem p = make_cavity_problem(8, 100.0);
    SolverConfig cfg;
    cfg.nu = p.nu;
    cfg.tol = 1e-12;
    cfg.max_iters = 60;
    const IterationTrace trace = solve_nonlinear(p, cfg);
    REQUIRE(trace.status == SolveStatus::converged);
    CHECK(nonlinear_residual(p.space, p.blocks, p.forcing, trace.final_state, p.bc) <= 1e-10);
}

TEST_CASE("discrete dual norm") {
    const MixedSpace space = build_mixed_space(build_uniform_triangulation(5));
    const LinearBlocks blocks = assemble_linear_blocks(space, 1.0);
    const VelocityConstraints bc = boundary_constraints(space, 0.0);

    CHECK(discrete_dual_norm(Vector::Zero(space.velocity_dof_count), blocks.K1, bc) == 0.0);

    std::mt19937 rng(7);
    std::normal_distribution<double> dist;
    Vector gf(space.velocity_dof_count - static_cast<int>(bc.dofs.size()));
    for (int i = 0; i < gf.size(); ++i) gf[i] = dist(rng);
    const Vector g = scatter_free(gf, bc, space.velocity_dof_count);
    const Vector f = blocks.K1 * g;
    // Riesz identity: |K1 g|_{-1,h} = |g|_{H1}
    CHECK(discrete_dual_norm(f, blocks.K1, bc) ==
          doctest::Approx(quadratic_norm(g, blocks.K1)).epsilon(1e-9));
}

TEST_CASE("manufactured Stokes convergence is second order in H1") {
    std::vector<double> errs;
    for (int n : {8, 16, 32}) {
        Problem p = make_forced_problem(build_mixed_space(build_uniform_triangulation(n)), 1.0,
                                        manufactured_forcing_stokes);
        const State s = solve_stokes(p);
        errs.push_back(h1_error_vs_exact(p.space, s.velocity, manufactured_grad_u));
    }
    for (std::size_t i = 0; i + 1 < errs.size(); ++i) {
        const double order = std::log2(errs[i] / errs[i + 1]);
        CHECK(order >= 1.8);
        CHECK(order <= 2.2);
    }
}

TEST_CASE("Picard iterates satisfy the energy bound on a forced problem") {
    Problem p = make_forced_problem(build_mixed_space(build_uniform_triangulation(8)), 0.1,
                                    manufactured_forcing_stokes);
    const double fnorm = discrete_dual_norm(p.forcing, p.blocks.K1, p.bc);
    const double bound = fnorm / p.nu + 1e-8;

    SaddleSolver solver;
    StepContext ctx{p, p.bc, nullptr, solver};
    State u = zero_state(p.space);
    for (int k = 0; k < 12; ++k) {
        u = picard_step(ctx, u);
        CHECK(quadratic_norm(u.velocity, p.blocks.K1) <= bound);
    }
}

TEST_CASE("Newton iterates stay within twice the energy bound when the smallness condition holds") {
    const MixedSpace space = build_mixed_space(build_uniform_triangulation(8));
    const LinearBlocks unit_blocks = assemble_linear_blocks(space, 1.0);
    const VelocityConstraints bc = boundary_constraints(space, 0.0);

    // measured lower-bound surrogate for the trilinear constant
    std::mt19937 rng(99);
    std::normal_distribution<double> dist;
    const int nfree = space.velocity_dof_count - static_cast<int>(bc.dofs.size());
    double m_hat = 0.0;
    for (int rep = 0; rep < 12; ++rep) {
        Vector uf(nfree), wf(nfree), vf(nfree);
        for (int i = 0; i < nfree; ++i) {
            uf[i] = dist(rng);
            wf[i] = dist(rng);
            vf[i] = dist(rng);
        }
        const Vector u = scatter_free(uf, bc, space.velocity_dof_count);
        const Vector w = scatter_free(wf, bc, space.velocity_dof_count);
        const Vector v = scatter_free(vf, bc, space.velocity_dof_count);
        const SparseMatrix N = assemble_convection(space, u, ConvectionMode::picard);
        const double quotient =
            std::abs(v.dot(N * w)) /
            (quadratic_norm(u, unit_blocks.K1) * quadratic_norm(w, unit_blocks.K1) *
             quadratic_norm(v, unit_blocks.K1));
        m_hat = std::max(m_hat, quotient);
    }

    const Vector f = assemble_forcing(space, manufactured_forcing_stokes);
    const double fnorm = discrete_dual_norm(f, unit_blocks.K1, bc);
    // pick nu so that the measured 8 alpha_h <= 1 hypothesis is verifiable
    const double nu = std::sqrt(16.0 * m_hat * fnorm);
    REQUIRE(8.0 * m_hat * fnorm / (nu * nu) <= 1.0);

    Problem p = make_forced_problem(space, nu, manufactured_forcing_stokes);
    SaddleSolver solver;
    StepContext ctx{p, p.bc, nullptr, solver};
    State u = zero_state(p.space);
    for (int k = 0; k < 10; ++k) {
        u = newton_step(ctx, u);
        CHECK(quadratic_norm(u.velocity, p.blocks.K1) <= 2.0 * fnorm / nu + 1e-8);
    }
}

TEST_CASE("State rejects non-finite coefficients") {
    Vector v = Vector::Zero(4), p = Vector::Zero(2);
    v[1] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(State(v, p), std::invalid_argument);
}
