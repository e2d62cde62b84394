#include "radisynth/mesh.hpp"

#include <algorithm>
#include <cstdint>
#include <map>
#include <sstream>

#include "radisynth/errors.hpp"
#include "radisynth/raycast.hpp"

namespace radisynth {

std::vector<std::pair<int, int>> boundary_edges(const TriMesh& mesh) {
    // directed edge count; watertight + consistent winding means every
    // undirected edge appears once in each direction
    std::map<std::pair<int, int>, int> count;
    for (const auto& tri : mesh.triangles) {
        for (int e = 0; e < 3; ++e) {
            int a = tri[e], b = tri[(e + 1) % 3];
            count[{a, b}] += 1;
        }
    }
    std::vector<std::pair<int, int>> bad;
    for (const auto& [edge, n] : count) {
        auto rev = count.find({edge.second, edge.first});
        int nrev = rev == count.end() ? 0 : rev->second;
        if (n != 1 || nrev != 1) {
            if (edge.first < edge.second) bad.push_back(edge);
        }
    }
    return bad;
}

bool is_watertight(const TriMesh& mesh) {
    return !mesh.triangles.empty() && boundary_edges(mesh).empty();
}

double mesh_volume(const TriMesh& mesh) {
    auto bad = boundary_edges(mesh);
    if (mesh.triangles.empty() || !bad.empty()) {
        std::ostringstream os;
        os << "mesh '" << mesh.material.name << "' is not watertight; "
           << bad.size() << " boundary/non-manifold edges";
        std::size_t shown = std::min<std::size_t>(bad.size(), 8);
        for (std::size_t i = 0; i < shown; ++i)
            os << (i ? "," : ":") << " (" << bad[i].first << "," << bad[i].second << ")";
        throw TopologyError(os.str());
    }
    double vol = 0;
    for (const auto& tri : mesh.triangles) {
        const Vec3& a = mesh.vertices[tri[0]];
        const Vec3& b = mesh.vertices[tri[1]];
        const Vec3& c = mesh.vertices[tri[2]];
        vol += a.dot(b.cross(c));
    }
    return vol / 6.0;
}

bool point_inside(const TriMesh& mesh, const Vec3& p) {
    Aabb box = mesh.bounds();
    if (!box.valid()) return false;
    if (p.x < box.lo.x || p.x > box.hi.x || p.y < box.lo.y || p.y > box.hi.y ||
        p.z < box.lo.z || p.z > box.hi.z)
        return false;
    double jitter = 1e-7 * std::max(1.0, box.diameter());
    std::vector<double> hits;
    for (int attempt = 0; attempt < 4; ++attempt) {
        Vec3 dir{1.0, attempt * jitter * 0.7, attempt * jitter * 1.3};
        ray_mesh_hits(mesh, p, dir, hits);
        // collapse duplicate hits from shared edges
        std::sort(hits.begin(), hits.end());
        std::size_t n = 0;
        double tol = 1e-12 * std::max(1.0, box.diameter());
        for (std::size_t i = 0; i < hits.size(); ++i) {
            if (n == 0 || hits[i] - hits[n - 1] > tol) hits[n++] = hits[i];
            else goto retry; // a genuine duplicate means we grazed an edge
        }
        return n % 2 == 1;
    retry:;
    }
    return false;
}

} // namespace radisynth
