#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <vector>

namespace cdanse {

enum class BoundaryTag : std::uint8_t { interior, wall, lid };

const char* to_string(BoundaryTag tag);

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

struct Edge {
    int a = -1;  // vertex indices, a < b
    int b = -1;
    BoundaryTag tag = BoundaryTag::interior;
};

/// Triangulation of the unit square. Vertices carry boundary tags
/// (lid iff y == 1, the leaky-cavity convention; wall on the other
/// three sides). Edges are registered uniquely so each midpoint is a
/// single entity, which the quadratic velocity space relies on.
struct Mesh {
    std::vector<Vec2> vertices;
    std::vector<std::array<int, 3>> triangles;     // counterclockwise
    std::vector<std::array<int, 3>> tri_edges;     // edge k is opposite convention: k = (v_k, v_{k+1})
    std::vector<Edge> edges;
    std::vector<BoundaryTag> vertex_tag;

    Vec2 midpoint(int edge) const {
        const Edge& e = edges[edge];
        return {0.5 * (vertices[e.a].x + vertices[e.b].x),
                0.5 * (vertices[e.a].y + vertices[e.b].y)};
    }

    double triangle_area(int t) const;
    double total_area() const;
};

/// Right-angled triangulation of [0,1]^2 with (n+1)^2 vertices and
/// 2n^2 triangles; every cell is split along its bottom-left to
/// top-right diagonal. Throws std::invalid_argument for n < 1.
Mesh build_uniform_triangulation(int n);

/// Coarse observation lattice whose nodes coincide with fine vertices.
struct ObservationNodeSet {
    std::vector<int> fine_vertex_indices;  // coarse vertex i -> fine vertex index
    double H = 0.0;                        // lattice spacing 1/n_H
    int n_H = 0;
    Mesh coarse;                           // same diagonal convention as the fine mesh
};

/// Selects the (n_H+1)^2 lattice nodes of spacing 1/n_H as fine-vertex
/// indices. Requires n_H to divide the fine resolution so the coarse
/// nodes land exactly on fine vertices; throws otherwise.
ObservationNodeSet observation_nodes(const Mesh& fine, int n_H);

/// Fine resolution n of a mesh produced by build_uniform_triangulation.
int mesh_resolution(const Mesh& mesh);

/// Plain-text dump: "vtx x y tag" and "tri a b c" lines.
void write_mesh_dump(const Mesh& mesh, std::ostream& out);

}  // namespace cdanse
