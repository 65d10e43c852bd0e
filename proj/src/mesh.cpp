#include "cdanse/mesh.hpp"

#include <cmath>
#include <map>
#include <ostream>
#include <stdexcept>
#include <string>

namespace cdanse {

const char* to_string(BoundaryTag tag) {
    switch (tag) {
        case BoundaryTag::interior: return "interior";
        case BoundaryTag::wall: return "wall";
        case BoundaryTag::lid: return "lid";
    }
    return "?";
}

double Mesh::triangle_area(int t) const {
    const auto& tri = triangles[t];
    const Vec2& p0 = vertices[tri[0]];
    const Vec2& p1 = vertices[tri[1]];
    const Vec2& p2 = vertices[tri[2]];
    return 0.5 * ((p1.x - p0.x) * (p2.y - p0.y) - (p2.x - p0.x) * (p1.y - p0.y));
}

double Mesh::total_area() const {
    double sum = 0.0;
    for (int t = 0; t < static_cast<int>(triangles.size()); ++t) sum += triangle_area(t);
    return sum;
}

namespace {

BoundaryTag classify(double x, double y) {
    if (y == 1.0) return BoundaryTag::lid;  // leaky cavity: top corners belong to the lid
    if (x == 0.0 || x == 1.0 || y == 0.0) return BoundaryTag::wall;
    return BoundaryTag::interior;
}

}  // namespace

Mesh build_uniform_triangulation(int n) {
    if (n < 1) throw std::invalid_argument("build_uniform_triangulation: n must be >= 1");

    Mesh mesh;
    const int np = n + 1;
    mesh.vertices.reserve(static_cast<std::size_t>(np) * np);
    mesh.vertex_tag.reserve(static_cast<std::size_t>(np) * np);
    for (int j = 0; j < np; ++j) {
        for (int i = 0; i < np; ++i) {
            const double x = static_cast<double>(i) / static_cast<double>(n);
            const double y = static_cast<double>(j) / static_cast<double>(n);
            mesh.vertices.push_back({x, y});
            mesh.vertex_tag.push_back(classify(x, y));
        }
    }

    auto vid = [np](int i, int j) { return j * np + i; };

    // Cells split along the bottom-left to top-right diagonal.
    mesh.triangles.reserve(2 * static_cast<std::size_t>(n) * n);
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            const int v00 = vid(i, j);
            const int v10 = vid(i + 1, j);
            const int v01 = vid(i, j + 1);
            const int v11 = vid(i + 1, j + 1);
            mesh.triangles.push_back({v00, v10, v11});
            mesh.triangles.push_back({v00, v11, v01});
        }
    }

    std::map<std::pair<int, int>, int> edge_of;
    mesh.tri_edges.resize(mesh.triangles.size());
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
        const auto& tri = mesh.triangles[t];
        for (int k = 0; k < 3; ++k) {
            int a = tri[k];
            int b = tri[(k + 1) % 3];
            if (a > b) std::swap(a, b);
            auto [it, inserted] = edge_of.try_emplace({a, b}, static_cast<int>(mesh.edges.size()));
            if (inserted) {
                Edge e;
                e.a = a;
                e.b = b;
                const Vec2 mid{0.5 * (mesh.vertices[a].x + mesh.vertices[b].x),
                               0.5 * (mesh.vertices[a].y + mesh.vertices[b].y)};
                e.tag = classify(mid.x, mid.y);
                mesh.edges.push_back(e);
            }
            mesh.tri_edges[t][k] = it->second;
        }
    }

    if (static_cast<int>(mesh.vertices.size()) != np * np ||
        static_cast<int>(mesh.triangles.size()) != 2 * n * n)
        throw std::logic_error("build_uniform_triangulation: entity count mismatch");
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t)
        if (mesh.triangle_area(static_cast<int>(t)) <= 0.0)
            throw std::logic_error("build_uniform_triangulation: non-positive triangle area");
    if (std::abs(mesh.total_area() - 1.0) > 1e-12)
        throw std::logic_error("build_uniform_triangulation: total area != 1");

    return mesh;
}

int mesh_resolution(const Mesh& mesh) {
    const int np = static_cast<int>(std::lround(std::sqrt(static_cast<double>(mesh.vertices.size()))));
    if (static_cast<std::size_t>(np) * np != mesh.vertices.size() || np < 2)
        throw std::invalid_argument("mesh_resolution: not a uniform unit-square triangulation");
    return np - 1;
}

ObservationNodeSet observation_nodes(const Mesh& fine, int n_H) {
    if (n_H < 1) throw std::invalid_argument("observation_nodes: n_H must be >= 1");
    const int n = mesh_resolution(fine);
    if (n % n_H != 0)
        throw std::invalid_argument("observation_nodes: n_H = " + std::to_string(n_H) +
                                    " does not divide the fine resolution n = " + std::to_string(n));

    ObservationNodeSet obs;
    obs.n_H = n_H;
    obs.H = 1.0 / static_cast<double>(n_H);
    obs.coarse = build_uniform_triangulation(n_H);

    const int stride = n / n_H;
    const int np = n + 1;
    obs.fine_vertex_indices.reserve(obs.coarse.vertices.size());
    for (int j = 0; j <= n_H; ++j) {
        for (int i = 0; i <= n_H; ++i) {
            const int fv = (j * stride) * np + (i * stride);
            obs.fine_vertex_indices.push_back(fv);
        }
    }

    // Nesting must hold bitwise: i*stride/n and i/n_H round identically in IEEE
    // arithmetic because both divide the same rational number.
    for (std::size_t k = 0; k < obs.fine_vertex_indices.size(); ++k) {
        const Vec2& f = fine.vertices[obs.fine_vertex_indices[k]];
        const Vec2& c = obs.coarse.vertices[k];
        if (f.x != c.x || f.y != c.y)
            throw std::logic_error("observation_nodes: coarse node does not coincide with fine vertex");
    }
    return obs;
}

void write_mesh_dump(const Mesh& mesh, std::ostream& out) {
    for (std::size_t v = 0; v < mesh.vertices.size(); ++v)
        out << "vtx " << mesh.vertices[v].x << ' ' << mesh.vertices[v].y << ' '
            << to_string(mesh.vertex_tag[v]) << '\n';
    for (const auto& tri : mesh.triangles)
        out << "tri " << tri[0] << ' ' << tri[1] << ' ' << tri[2] << '\n';
}

}  // namespace cdanse
