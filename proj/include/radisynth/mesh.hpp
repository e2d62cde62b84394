#pragma once
#include <array>
#include <string>
#include <vector>

#include "radisynth/geom.hpp"

namespace radisynth {

struct Material {
    std::string name;
    double mu = 0; // linear attenuation coefficient, 1/mm; may be negative for
                   // effective materials produced by decomposition
};

// Watertight triangle surface in mm. Triangles wind outward (signed volume > 0
// for solids).
struct TriMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> triangles;
    Material material;

    Aabb bounds() const {
        Aabb b;
        for (const auto& v : vertices) b.expand(v);
        return b;
    }
    void apply(const Transform& t) {
        for (auto& v : vertices) v = t.apply(v);
    }
};

// Signed volume by the divergence theorem. Throws TopologyError (listing a few
// boundary edges) when the mesh is not watertight.
double mesh_volume(const TriMesh& mesh);

// Every undirected edge shared by exactly two triangles with opposite
// orientation. Returns offending edges (empty when watertight).
std::vector<std::pair<int, int>> boundary_edges(const TriMesh& mesh);
bool is_watertight(const TriMesh& mesh);

// Parity-based point containment (ray cast along +x with fallback jitter).
bool point_inside(const TriMesh& mesh, const Vec3& p);

} // namespace radisynth
