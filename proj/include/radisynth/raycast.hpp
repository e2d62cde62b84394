#pragma once
#include <vector>

#include "radisynth/mesh.hpp"

namespace radisynth {

// Moller-Trumbore. Returns true and the ray parameter t (in units of |dir|)
// when the ray origin+t*dir crosses the triangle, t >= 0. Edge/vertex grazing
// is resolved by the caller through parity repair + jitter.
inline bool ray_triangle(const Vec3& origin, const Vec3& dir, const Vec3& a,
                         const Vec3& b, const Vec3& c, double& t_out) {
    const Vec3 e1 = b - a;
    const Vec3 e2 = c - a;
    const Vec3 pvec = dir.cross(e2);
    const double det = e1.dot(pvec);
    if (det == 0.0) return false;
    const double inv_det = 1.0 / det;
    const Vec3 tvec = origin - a;
    const double u = tvec.dot(pvec) * inv_det;
    if (u < 0.0 || u > 1.0) return false;
    const Vec3 qvec = tvec.cross(e1);
    const double v = dir.dot(qvec) * inv_det;
    if (v < 0.0 || u + v > 1.0) return false;
    const double t = e2.dot(qvec) * inv_det;
    if (t < 0.0) return false;
    t_out = t;
    return true;
}

// All forward hits of a ray against a mesh, unsorted, t in units of |dir|.
inline void ray_mesh_hits(const TriMesh& mesh, const Vec3& origin, const Vec3& dir,
                          std::vector<double>& hits) {
    hits.clear();
    double t;
    for (const auto& tri : mesh.triangles) {
        if (ray_triangle(origin, dir, mesh.vertices[tri[0]], mesh.vertices[tri[1]],
                         mesh.vertices[tri[2]], t))
            hits.push_back(t);
    }
}

} // namespace radisynth
