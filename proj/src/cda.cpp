#include "cdanse/cda.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace cdanse {

const char* to_string(NudgingMode mode) {
    switch (mode) {
        case NudgingMode::off: return "off";
        case NudgingMode::penalty: return "penalty";
        case NudgingMode::direct: return "direct";
    }
    return "?";
}

NudgingMode nudging_mode_from_string(const std::string& s) {
    if (s == "off") return NudgingMode::off;
    if (s == "penalty") return NudgingMode::penalty;
    if (s == "direct") return NudgingMode::direct;
    throw std::invalid_argument("unknown nudging mode: " + s);
}

bool NudgingConfig::validate(double nu, double H) const {
    if (mode != NudgingMode::penalty) return false;
    if (mu <= 0.0) throw std::invalid_argument("NudgingConfig: penalty mode requires mu > 0");
    if (mu < mu_min(nu, H)) {
        if (!allow_small_mu)
            throw std::invalid_argument("NudgingConfig: mu below nu/(4 H^2); set allow_small_mu to override");
        return true;
    }
    return false;
}

ObservationData sample_observations(const MixedSpace& space, const ObservationNodeSet& nodes,
                                    const Vector& velocity) {
    if (velocity.size() != space.velocity_dof_count)
        throw std::invalid_argument("sample_observations: field size does not match space");
    ObservationData data;
    data.nodes = nodes;
    data.H = nodes.H;
    data.values.reserve(nodes.fine_vertex_indices.size());
    for (int fv : nodes.fine_vertex_indices)
        data.values.push_back({velocity[2 * fv], velocity[2 * fv + 1]});
    return data;
}

SparseMatrix build_sampling_operator(const MixedSpace& space, const ObservationNodeSet& nodes) {
    const int nobs = static_cast<int>(nodes.fine_vertex_indices.size());
    std::vector<Eigen::Triplet<double>> ts;
    ts.reserve(2 * nobs);
    for (int k = 0; k < nobs; ++k) {
        const int fv = nodes.fine_vertex_indices[k];
        if (fv < 0 || fv >= static_cast<int>(space.mesh.vertices.size()))
            throw std::invalid_argument("build_sampling_operator: node is not a fine vertex");
        ts.emplace_back(2 * k, 2 * fv, 1.0);
        ts.emplace_back(2 * k + 1, 2 * fv + 1, 1.0);
    }
    SparseMatrix S(2 * nobs, space.velocity_dof_count);
    S.setFromTriplets(ts.begin(), ts.end());
    return S;
}

SparseMatrix build_coarse_mass(const ObservationNodeSet& nodes) {
    const Mesh& coarse = nodes.coarse;
    const int nobs = static_cast<int>(coarse.vertices.size());
    std::vector<Eigen::Triplet<double>> ts;
    ts.reserve(coarse.triangles.size() * 18);
    for (int t = 0; t < static_cast<int>(coarse.triangles.size()); ++t) {
        const auto& tri = coarse.triangles[t];
        const double a12 = coarse.triangle_area(t) / 12.0;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                const double v = (i == j ? 2.0 : 1.0) * a12;
                ts.emplace_back(2 * tri[i], 2 * tri[j], v);
                ts.emplace_back(2 * tri[i] + 1, 2 * tri[j] + 1, v);
            }
    }
    SparseMatrix M(2 * nobs, 2 * nobs);
    M.setFromTriplets(ts.begin(), ts.end());
    return M;
}

NudgingContribution nudging_contribution(const SparseMatrix& S, const SparseMatrix& M_H,
                                         double mu, const ObservationData& data) {
    if (mu <= 0.0) throw std::invalid_argument("nudging_contribution: mu must be positive");
    if (static_cast<Eigen::Index>(2 * data.values.size()) != S.rows())
        throw std::invalid_argument("nudging_contribution: data does not match sampling operator");
    Vector g(S.rows());
    for (std::size_t k = 0; k < data.values.size(); ++k) {
        g[2 * k] = data.values[k].x;
        g[2 * k + 1] = data.values[k].y;
    }
    if (!g.allFinite()) throw std::invalid_argument("nudging_contribution: non-finite observation values");

    NudgingContribution out;
    const SparseMatrix MS = M_H * S;
    out.matrix = mu * SparseMatrix(S.transpose() * MS);
    out.rhs = mu * (S.transpose() * (M_H * g));
    return out;
}

VelocityConstraints apply_direct_enforcement(const VelocityConstraints& bc,
                                             const MixedSpace& space,
                                             const ObservationData& data) {
    VelocityConstraints merged = bc;
    for (std::size_t k = 0; k < data.nodes.fine_vertex_indices.size(); ++k) {
        const int fv = data.nodes.fine_vertex_indices[k];
        const Vec2& val = data.values[k];
        if (!std::isfinite(val.x) || !std::isfinite(val.y))
            throw std::invalid_argument("apply_direct_enforcement: non-finite observation value");
        if (space.mesh.vertex_tag[fv] != BoundaryTag::interior) {
            // boundary data wins; measured values must be consistent with it
            for (int c = 0; c < 2; ++c) {
                const int dof = 2 * fv + c;
                const auto it = std::lower_bound(bc.dofs.begin(), bc.dofs.end(), dof);
                if (it == bc.dofs.end() || *it != dof) continue;
                const double bval = bc.values[static_cast<std::size_t>(it - bc.dofs.begin())];
                const double mval = c == 0 ? val.x : val.y;
                if (std::abs(bval - mval) > 1e-10)
                    throw std::runtime_error(
                        "apply_direct_enforcement: inconsistent data at a boundary node");
            }
            continue;
        }
        merged.dofs.push_back(2 * fv);
        merged.values.push_back(val.x);
        merged.dofs.push_back(2 * fv + 1);
        merged.values.push_back(val.y);
    }

    std::vector<std::size_t> order(merged.dofs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t l, std::size_t r) { return merged.dofs[l] < merged.dofs[r]; });
    VelocityConstraints sorted;
    sorted.dofs.reserve(merged.dofs.size());
    sorted.values.reserve(merged.values.size());
    for (std::size_t i : order) {
        const int dof = merged.dofs[i];
        const double val = merged.values[i];
        if (!sorted.dofs.empty() && sorted.dofs.back() == dof) {
            if (sorted.values.back() != val)
                throw std::runtime_error("apply_direct_enforcement: conflicting constraint values");
            continue;  // idempotent re-application
        }
        sorted.dofs.push_back(dof);
        sorted.values.push_back(val);
    }
    return sorted;
}

Vector interpolant_on_fine(const MixedSpace& space, const ObservationData& data) {
    const int n_H = data.nodes.n_H;
    const int npc = n_H + 1;
    auto nodal = [&](int i, int j, int c) {
        const Vec2& v = data.values[static_cast<std::size_t>(j) * npc + i];
        return c == 0 ? v.x : v.y;
    };
    auto eval = [&](double x, double y, int c) {
        int i = static_cast<int>(std::floor(x * n_H));
        int j = static_cast<int>(std::floor(y * n_H));
        i = std::clamp(i, 0, n_H - 1);
        j = std::clamp(j, 0, n_H - 1);
        const double xi = x * n_H - i;
        const double eta = y * n_H - j;
        const double f00 = nodal(i, j, c);
        const double f10 = nodal(i + 1, j, c);
        const double f01 = nodal(i, j + 1, c);
        const double f11 = nodal(i + 1, j + 1, c);
        // cell split along the bottom-left to top-right diagonal
        if (eta <= xi) return f00 + (f10 - f00) * xi + (f11 - f10) * eta;
        return f00 + (f11 - f01) * xi + (f01 - f00) * eta;
    };

    const Mesh& mesh = space.mesh;
    const int nvtx = static_cast<int>(mesh.vertices.size());
    Vector out(space.velocity_dof_count);
    for (int v = 0; v < nvtx; ++v) {
        out[2 * v] = eval(mesh.vertices[v].x, mesh.vertices[v].y, 0);
        out[2 * v + 1] = eval(mesh.vertices[v].x, mesh.vertices[v].y, 1);
    }
    for (int e = 0; e < static_cast<int>(mesh.edges.size()); ++e) {
        const Vec2 mid = mesh.midpoint(e);
        out[2 * (nvtx + e)] = eval(mid.x, mid.y, 0);
        out[2 * (nvtx + e) + 1] = eval(mid.x, mid.y, 1);
    }
    return out;
}

void write_observation_data(const ObservationData& data, std::ostream& out) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "H %.17g\n", data.H);
    out << buf;
    for (std::size_t k = 0; k < data.values.size(); ++k) {
        std::snprintf(buf, sizeof buf, "%d %.17g %.17g\n", data.nodes.fine_vertex_indices[k],
                      data.values[k].x, data.values[k].y);
        out << buf;
    }
}

ObservationData read_observation_data(const Mesh& fine, std::istream& in) {
    std::string key;
    double H = 0.0;
    if (!(in >> key >> H) || key != "H")
        throw std::runtime_error("read_observation_data: missing H header");
    const int n_H = static_cast<int>(std::lround(1.0 / H));
    ObservationData data;
    data.nodes = observation_nodes(fine, n_H);
    data.H = data.nodes.H;
    data.values.resize(data.nodes.fine_vertex_indices.size());
    for (std::size_t k = 0; k < data.values.size(); ++k) {
        int idx;
        double ux, uy;
        if (!(in >> idx >> ux >> uy))
            throw std::runtime_error("read_observation_data: truncated node list");
        if (idx != data.nodes.fine_vertex_indices[k])
            throw std::runtime_error("read_observation_data: node index out of order");
        data.values[k] = {ux, uy};
    }
    return data;
}

}  // namespace cdanse
