#include "cdanse/fem.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cdanse {

namespace {

// 7-point degree-5 rule in barycentric coordinates; weights sum to 1.
struct QuadPoint {
    double l0, l1, l2;
    double w;
};

std::array<QuadPoint, 7> make_degree5_rule() {
    const double s15 = std::sqrt(15.0);
    const double a1 = (6.0 + s15) / 21.0;
    const double a2 = (6.0 - s15) / 21.0;
    const double w1 = (155.0 + s15) / 1200.0;
    const double w2 = (155.0 - s15) / 1200.0;
    return {{{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 9.0 / 40.0},
             {1.0 - 2.0 * a1, a1, a1, w1},
             {a1, 1.0 - 2.0 * a1, a1, w1},
             {a1, a1, 1.0 - 2.0 * a1, w1},
             {1.0 - 2.0 * a2, a2, a2, w2},
             {a2, 1.0 - 2.0 * a2, a2, w2},
             {a2, a2, 1.0 - 2.0 * a2, w2}}};
}

const std::array<QuadPoint, 7>& degree5_rule() {
    static const auto rule = make_degree5_rule();
    return rule;
}

// P2 shape values and reference gradients at one barycentric point.
struct P2Eval {
    std::array<double, 6> n;
    std::array<double, 6> gx;  // d/d xi
    std::array<double, 6> gy;  // d/d eta
};

P2Eval eval_p2(double l0, double l1, double l2) {
    P2Eval e;
    e.n = {l0 * (2.0 * l0 - 1.0), l1 * (2.0 * l1 - 1.0), l2 * (2.0 * l2 - 1.0),
           4.0 * l0 * l1, 4.0 * l1 * l2, 4.0 * l2 * l0};
    // grad lambda = (-1,-1), (1,0), (0,1) in reference coordinates
    const double d0 = 4.0 * l0 - 1.0;
    const double d1 = 4.0 * l1 - 1.0;
    const double d2 = 4.0 * l2 - 1.0;
    e.gx = {-d0, d1, 0.0, 4.0 * (l0 - l1), 4.0 * l2, -4.0 * l2};
    e.gy = {-d0, 0.0, d2, -4.0 * l1, 4.0 * l1, 4.0 * (l0 - l2)};
    return e;
}

struct ElementGeometry {
    double x0, y0;
    double a, b, c, d;  // Jacobian [a b; c d]
    double det;

    void physical_grad(double gx, double gy, double& px, double& py) const {
        px = (d * gx - c * gy) / det;
        py = (-b * gx + a * gy) / det;
    }
    double map_x(double xi, double eta) const { return x0 + a * xi + b * eta; }
    double map_y(double xi, double eta) const { return y0 + c * xi + d * eta; }
};

ElementGeometry element_geometry(const Mesh& mesh, int t) {
    const auto& tri = mesh.triangles[t];
    const Vec2& p0 = mesh.vertices[tri[0]];
    const Vec2& p1 = mesh.vertices[tri[1]];
    const Vec2& p2 = mesh.vertices[tri[2]];
    ElementGeometry g;
    g.x0 = p0.x;
    g.y0 = p0.y;
    g.a = p1.x - p0.x;
    g.b = p2.x - p0.x;
    g.c = p1.y - p0.y;
    g.d = p2.y - p0.y;
    g.det = g.a * g.d - g.b * g.c;
    return g;
}

using Triplet = Eigen::Triplet<double>;

// 8-point Gauss-Legendre on [0,1].
struct Gauss1D {
    std::array<double, 8> x;
    std::array<double, 8> w;
};

Gauss1D gauss8() {
    static const std::array<double, 4> xs = {0.1834346424956498, 0.5255324099163290,
                                             0.7966664774136267, 0.9602898564975363};
    static const std::array<double, 4> ws = {0.3626837833783620, 0.3137066458778873,
                                             0.2223810344533745, 0.1012285362903763};
    Gauss1D g;
    for (int i = 0; i < 4; ++i) {
        g.x[2 * i] = 0.5 * (1.0 - xs[i]);
        g.x[2 * i + 1] = 0.5 * (1.0 + xs[i]);
        g.w[2 * i] = 0.5 * ws[i];
        g.w[2 * i + 1] = 0.5 * ws[i];
    }
    return g;
}

}  // namespace

MixedSpace build_mixed_space(Mesh mesh) {
    MixedSpace space;
    const int nvtx = static_cast<int>(mesh.vertices.size());
    const int nedge = static_cast<int>(mesh.edges.size());
    space.velocity_scalar_count = nvtx + nedge;
    space.velocity_dof_count = 2 * space.velocity_scalar_count;
    space.pressure_dof_count = nvtx;

    space.element_scalar_dofs.resize(mesh.triangles.size());
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
        const auto& tri = mesh.triangles[t];
        const auto& te = mesh.tri_edges[t];
        space.element_scalar_dofs[t] = {tri[0], tri[1], tri[2],
                                        nvtx + te[0], nvtx + te[1], nvtx + te[2]};
    }

    for (int v = 0; v < nvtx; ++v) {
        if (mesh.vertex_tag[v] != BoundaryTag::interior) {
            space.boundary_scalar_dofs.push_back(v);
            space.boundary_scalar_tag.push_back(mesh.vertex_tag[v]);
        }
    }
    for (int e = 0; e < nedge; ++e) {
        if (mesh.edges[e].tag != BoundaryTag::interior) {
            space.boundary_scalar_dofs.push_back(nvtx + e);
            space.boundary_scalar_tag.push_back(mesh.edges[e].tag);
        }
    }

    space.mesh = std::move(mesh);
    return space;
}

State::State(Vector v, Vector p) : velocity(std::move(v)), pressure(std::move(p)) {
    if (!velocity.allFinite() || !pressure.allFinite())
        throw std::invalid_argument("State: non-finite coefficients");
}

State zero_state(const MixedSpace& space) {
    return State(Vector::Zero(space.velocity_dof_count), Vector::Zero(space.pressure_dof_count));
}

bool VelocityConstraints::is_constrained(int dof) const {
    return std::binary_search(dofs.begin(), dofs.end(), dof);
}

VelocityConstraints boundary_constraints(const MixedSpace& space, double lid_speed) {
    VelocityConstraints bc;
    bc.dofs.reserve(2 * space.boundary_scalar_dofs.size());
    for (std::size_t k = 0; k < space.boundary_scalar_dofs.size(); ++k) {
        const int s = space.boundary_scalar_dofs[k];
        const bool lid = space.boundary_scalar_tag[k] == BoundaryTag::lid;
        bc.dofs.push_back(2 * s);
        bc.values.push_back(lid ? lid_speed : 0.0);
        bc.dofs.push_back(2 * s + 1);
        bc.values.push_back(0.0);
    }
    // keep sorted by dof
    std::vector<std::size_t> order(bc.dofs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t l, std::size_t r) { return bc.dofs[l] < bc.dofs[r]; });
    VelocityConstraints sorted;
    sorted.dofs.reserve(bc.dofs.size());
    sorted.values.reserve(bc.values.size());
    for (std::size_t i : order) {
        sorted.dofs.push_back(bc.dofs[i]);
        sorted.values.push_back(bc.values[i]);
    }
    return sorted;
}

LinearBlocks assemble_linear_blocks(const MixedSpace& space, double nu) {
    if (nu <= 0.0) throw std::invalid_argument("assemble_linear_blocks: nu must be positive");
    const Mesh& mesh = space.mesh;
    const int nel = static_cast<int>(mesh.triangles.size());
    const int nv = space.velocity_dof_count;
    const int np = space.pressure_dof_count;

    std::vector<Triplet> tk1, tmv, tmp, tb;
    tk1.reserve(static_cast<std::size_t>(nel) * 72);
    tmv.reserve(static_cast<std::size_t>(nel) * 72);
    tmp.reserve(static_cast<std::size_t>(nel) * 9);
    tb.reserve(static_cast<std::size_t>(nel) * 36);

    const auto& rule = degree5_rule();
    std::array<P2Eval, 7> basis;
    for (int q = 0; q < 7; ++q) basis[q] = eval_p2(rule[q].l0, rule[q].l1, rule[q].l2);

    for (int t = 0; t < nel; ++t) {
        const ElementGeometry geo = element_geometry(mesh, t);
        const double area = 0.5 * geo.det;
        const auto& sd = space.element_scalar_dofs[t];
        const auto& tri = mesh.triangles[t];

        double k1[6][6] = {};
        double mv[6][6] = {};
        double mp[3][3] = {};
        double bx[3][6] = {};
        double by[3][6] = {};

        for (int q = 0; q < 7; ++q) {
            const double w = rule[q].w * area;
            const auto& e = basis[q];
            double px[6], py[6];
            for (int i = 0; i < 6; ++i) geo.physical_grad(e.gx[i], e.gy[i], px[i], py[i]);
            const double l[3] = {rule[q].l0, rule[q].l1, rule[q].l2};
            for (int i = 0; i < 6; ++i) {
                for (int j = 0; j < 6; ++j) {
                    k1[i][j] += w * (px[i] * px[j] + py[i] * py[j]);
                    mv[i][j] += w * e.n[i] * e.n[j];
                }
            }
            for (int p = 0; p < 3; ++p) {
                for (int r = 0; r < 3; ++r) mp[p][r] += w * l[p] * l[r];
                for (int j = 0; j < 6; ++j) {
                    bx[p][j] += w * l[p] * px[j];
                    by[p][j] += w * l[p] * py[j];
                }
            }
        }

        for (int i = 0; i < 6; ++i) {
            for (int j = 0; j < 6; ++j) {
                for (int c = 0; c < 2; ++c) {
                    tk1.emplace_back(2 * sd[i] + c, 2 * sd[j] + c, k1[i][j]);
                    tmv.emplace_back(2 * sd[i] + c, 2 * sd[j] + c, mv[i][j]);
                }
            }
        }
        for (int p = 0; p < 3; ++p) {
            for (int r = 0; r < 3; ++r) tmp.emplace_back(tri[p], tri[r], mp[p][r]);
            for (int j = 0; j < 6; ++j) {
                tb.emplace_back(tri[p], 2 * sd[j], bx[p][j]);
                tb.emplace_back(tri[p], 2 * sd[j] + 1, by[p][j]);
            }
        }
    }

    LinearBlocks blocks;
    blocks.K1.resize(nv, nv);
    blocks.K1.setFromTriplets(tk1.begin(), tk1.end());
    blocks.Mv.resize(nv, nv);
    blocks.Mv.setFromTriplets(tmv.begin(), tmv.end());
    blocks.Mp.resize(np, np);
    blocks.Mp.setFromTriplets(tmp.begin(), tmp.end());
    blocks.B.resize(np, nv);
    blocks.B.setFromTriplets(tb.begin(), tb.end());
    blocks.A = nu * blocks.K1;
    return blocks;
}

SparseMatrix assemble_convection(const MixedSpace& space, const Vector& w, ConvectionMode mode) {
    if (w.size() != space.velocity_dof_count)
        throw std::invalid_argument("assemble_convection: field size does not match space");
    const Mesh& mesh = space.mesh;
    const int nel = static_cast<int>(mesh.triangles.size());
    const int nv = space.velocity_dof_count;

    std::vector<Triplet> ts;
    ts.reserve(static_cast<std::size_t>(nel) * (mode == ConvectionMode::picard ? 72 : 144));

    const auto& rule = degree5_rule();
    std::array<P2Eval, 7> basis;
    for (int q = 0; q < 7; ++q) basis[q] = eval_p2(rule[q].l0, rule[q].l1, rule[q].l2);

    for (int t = 0; t < nel; ++t) {
        const ElementGeometry geo = element_geometry(mesh, t);
        const double area = 0.5 * geo.det;
        const auto& sd = space.element_scalar_dofs[t];

        double wloc[6][2];
        for (int i = 0; i < 6; ++i) {
            wloc[i][0] = w[2 * sd[i]];
            wloc[i][1] = w[2 * sd[i] + 1];
        }

        if (mode == ConvectionMode::picard) {
            // scalar block: 1/2 [ (w.grad phi_j) phi_i - (w.grad phi_i) phi_j ]
            double nloc[6][6] = {};
            for (int q = 0; q < 7; ++q) {
                const double wq = rule[q].w * area;
                const auto& e = basis[q];
                double px[6], py[6];
                for (int i = 0; i < 6; ++i) geo.physical_grad(e.gx[i], e.gy[i], px[i], py[i]);
                double wx = 0.0, wy = 0.0;
                for (int i = 0; i < 6; ++i) {
                    wx += e.n[i] * wloc[i][0];
                    wy += e.n[i] * wloc[i][1];
                }
                for (int i = 0; i < 6; ++i) {
                    const double conv_i = wx * px[i] + wy * py[i];
                    for (int j = 0; j < 6; ++j) {
                        const double conv_j = wx * px[j] + wy * py[j];
                        nloc[i][j] += 0.5 * wq * (conv_j * e.n[i] - conv_i * e.n[j]);
                    }
                }
            }
            for (int i = 0; i < 6; ++i)
                for (int j = 0; j < 6; ++j)
                    for (int c = 0; c < 2; ++c)
                        ts.emplace_back(2 * sd[i] + c, 2 * sd[j] + c, nloc[i][j]);
        } else {
            // b(phi_j e_cc, w, phi_i e_c):
            //   1/2 phi_i phi_j dw_c/dx_cc - 1/2 phi_j (d phi_i/dx_cc) w_c
            double nloc[12][12] = {};
            for (int q = 0; q < 7; ++q) {
                const double wq = rule[q].w * area;
                const auto& e = basis[q];
                double px[6], py[6];
                for (int i = 0; i < 6; ++i) geo.physical_grad(e.gx[i], e.gy[i], px[i], py[i]);
                double wval[2] = {0.0, 0.0};
                double wgrad[2][2] = {{0.0, 0.0}, {0.0, 0.0}};  // wgrad[c][d] = dw_c/dx_d
                for (int i = 0; i < 6; ++i) {
                    for (int c = 0; c < 2; ++c) {
                        wval[c] += e.n[i] * wloc[i][c];
                        wgrad[c][0] += px[i] * wloc[i][c];
                        wgrad[c][1] += py[i] * wloc[i][c];
                    }
                }
                for (int i = 0; i < 6; ++i) {
                    const double gi[2] = {px[i], py[i]};
                    for (int j = 0; j < 6; ++j) {
                        for (int c = 0; c < 2; ++c) {
                            for (int cc = 0; cc < 2; ++cc) {
                                const double v = 0.5 * wq *
                                    (e.n[i] * e.n[j] * wgrad[c][cc] - e.n[j] * gi[cc] * wval[c]);
                                nloc[2 * i + c][2 * j + cc] += v;
                            }
                        }
                    }
                }
            }
            for (int i = 0; i < 6; ++i)
                for (int j = 0; j < 6; ++j)
                    for (int c = 0; c < 2; ++c)
                        for (int cc = 0; cc < 2; ++cc)
                            ts.emplace_back(2 * sd[i] + c, 2 * sd[j] + cc,
                                            nloc[2 * i + c][2 * j + cc]);
        }
    }

    SparseMatrix N(nv, nv);
    N.setFromTriplets(ts.begin(), ts.end());
    return N;
}

Vector assemble_forcing(const MixedSpace& space,
                        const std::function<Vec2(double, double)>& f) {
    const Mesh& mesh = space.mesh;
    Vector rhs = Vector::Zero(space.velocity_dof_count);
    const Gauss1D g = gauss8();

    for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
        const ElementGeometry geo = element_geometry(mesh, static_cast<int>(t));
        const auto& sd = space.element_scalar_dofs[t];
        for (int qs = 0; qs < 8; ++qs) {
            const double s = g.x[qs];
            for (int qt = 0; qt < 8; ++qt) {
                // Duffy map of the unit square onto the reference triangle
                const double xi = s;
                const double eta = g.x[qt] * (1.0 - s);
                const double w = g.w[qs] * g.w[qt] * (1.0 - s) * geo.det;
                const P2Eval e = eval_p2(1.0 - xi - eta, xi, eta);
                const Vec2 fv = f(geo.map_x(xi, eta), geo.map_y(xi, eta));
                for (int i = 0; i < 6; ++i) {
                    rhs[2 * sd[i]] += w * e.n[i] * fv.x;
                    rhs[2 * sd[i] + 1] += w * e.n[i] * fv.y;
                }
            }
        }
    }
    return rhs;
}

SaddleSystem assemble_saddle_system(const MixedSpace& space,
                                    const SparseMatrix& velocity_block,
                                    const SparseMatrix& B,
                                    const Vector& rhs_velocity,
                                    const VelocityConstraints& bc) {
    const int nv = space.velocity_dof_count;
    const int np = space.pressure_dof_count;
    const int n = nv + np;
    if (velocity_block.rows() != nv || B.rows() != np || B.cols() != nv ||
        rhs_velocity.size() != nv)
        throw std::invalid_argument("assemble_saddle_system: dimension mismatch");

    SaddleSystem sys;
    sys.n_velocity = nv;
    sys.n_pressure = np;
    sys.constrained.assign(n, 0);
    sys.constrained_value = Vector::Zero(n);
    for (std::size_t k = 0; k < bc.dofs.size(); ++k) {
        sys.constrained[bc.dofs[k]] = 1;
        sys.constrained_value[bc.dofs[k]] = bc.values[k];
    }
    sys.constrained[nv] = 1;  // pin pressure dof 0 to zero
    sys.constrained_value[nv] = 0.0;

    sys.rhs = Vector::Zero(n);
    sys.rhs.head(nv) = rhs_velocity;

    std::vector<Triplet> ts;
    ts.reserve(static_cast<std::size_t>(velocity_block.nonZeros()) + 2 * B.nonZeros() + n);

    auto visit = [&](int i, int j, double v) {
        if (sys.constrained[i]) return;
        if (sys.constrained[j]) {
            sys.rhs[i] -= v * sys.constrained_value[j];
            return;
        }
        ts.emplace_back(i, j, v);
    };

    for (int col = 0; col < velocity_block.outerSize(); ++col)
        for (SparseMatrix::InnerIterator it(velocity_block, col); it; ++it)
            visit(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
    for (int col = 0; col < B.outerSize(); ++col)
        for (SparseMatrix::InnerIterator it(B, col); it; ++it) {
            const int p = nv + static_cast<int>(it.row());
            const int j = static_cast<int>(it.col());
            visit(p, j, it.value());
            visit(j, p, it.value());
        }
    for (int d = 0; d < n; ++d) {
        if (sys.constrained[d]) {
            ts.emplace_back(d, d, 1.0);
            sys.rhs[d] = sys.constrained_value[d];
        }
    }

    sys.K.resize(n, n);
    sys.K.setFromTriplets(ts.begin(), ts.end());
    return sys;
}

double nonlinear_residual(const MixedSpace& space, const LinearBlocks& blocks,
                          const Vector& forcing, const State& s,
                          const VelocityConstraints& bc) {
    const SparseMatrix N = assemble_convection(space, s.velocity, ConvectionMode::picard);
    Vector rv = blocks.A * s.velocity + N * s.velocity +
                blocks.B.transpose() * s.pressure - forcing;
    double viol2 = 0.0;
    for (std::size_t k = 0; k < bc.dofs.size(); ++k) {
        const double d = s.velocity[bc.dofs[k]] - bc.values[k];
        viol2 += d * d;
        rv[bc.dofs[k]] = 0.0;
    }
    const Vector rp = blocks.B * s.velocity;
    return std::sqrt(rv.squaredNorm() + rp.squaredNorm() + viol2);
}

double nonlinear_residual(const MixedSpace& space, const State& s, double nu,
                          double lid_speed) {
    const LinearBlocks blocks = assemble_linear_blocks(space, nu);
    const VelocityConstraints bc = boundary_constraints(space, lid_speed);
    return nonlinear_residual(space, blocks, Vector::Zero(space.velocity_dof_count), s, bc);
}

SparseMatrix restrict_to_free(const SparseMatrix& K, const VelocityConstraints& bc) {
    const int n = static_cast<int>(K.rows());
    std::vector<int> free_index(n, -1);
    int nf = 0;
    for (int i = 0; i < n; ++i)
        if (!bc.is_constrained(i)) free_index[i] = nf++;

    std::vector<Triplet> ts;
    ts.reserve(K.nonZeros());
    for (int col = 0; col < K.outerSize(); ++col)
        for (SparseMatrix::InnerIterator it(K, col); it; ++it) {
            const int fi = free_index[it.row()];
            const int fj = free_index[it.col()];
            if (fi >= 0 && fj >= 0) ts.emplace_back(fi, fj, it.value());
        }
    SparseMatrix Kf(nf, nf);
    Kf.setFromTriplets(ts.begin(), ts.end());
    return Kf;
}

Vector gather_free(const Vector& full, const VelocityConstraints& bc) {
    Vector out(full.size() - static_cast<Eigen::Index>(bc.dofs.size()));
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < full.size(); ++i)
        if (!bc.is_constrained(static_cast<int>(i))) out[k++] = full[i];
    return out;
}

Vector scatter_free(const Vector& free_part, const VelocityConstraints& bc, int full_size) {
    Vector out = Vector::Zero(full_size);
    Eigen::Index k = 0;
    for (int i = 0; i < full_size; ++i)
        if (!bc.is_constrained(i)) out[i] = free_part[k++];
    return out;
}

double discrete_dual_norm(const Vector& f_velocity, const SparseMatrix& K1,
                          const VelocityConstraints& bc) {
    const Vector ff = gather_free(f_velocity, bc);
    if (ff.size() == 0) return 0.0;
    const SparseMatrix Kf = restrict_to_free(K1, bc);
    Eigen::SimplicialLLT<SparseMatrix> llt(Kf);
    if (llt.info() != Eigen::Success)
        throw std::runtime_error("discrete_dual_norm: restricted stiffness is not SPD");
    const Vector g = llt.solve(ff);
    return std::sqrt(std::max(0.0, ff.dot(g)));
}

double quadratic_norm(const Vector& v, const SparseMatrix& Q) {
    return std::sqrt(std::max(0.0, v.dot(Q * v)));
}

}  // namespace cdanse
