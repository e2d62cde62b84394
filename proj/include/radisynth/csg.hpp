#pragma once
#include <memory>
#include <variant>
#include <vector>

#include "radisynth/mesh.hpp"

namespace radisynth {

struct CsgNode;
using CsgNodePtr = std::shared_ptr<const CsgNode>;

struct CsgSphere {
    double radius = 1;   // mm
    int segments = 20;   // meridian count (>= 6)
};

struct CsgBox {
    Vec3 size{1, 1, 1}; // mm
    bool centered = true;
};

struct CsgTransformed {
    Transform transform;
    CsgNodePtr child;
};

enum class CsgOp { Union, Difference, Intersection };

struct CsgBoolean {
    CsgOp op = CsgOp::Union;
    std::vector<CsgNodePtr> children;
};

struct CsgNode {
    std::variant<CsgSphere, CsgBox, CsgTransformed, CsgBoolean> value;
};

CsgNodePtr csg_sphere(double radius, int segments = 20);
CsgNodePtr csg_box(const Vec3& size, bool centered = true);
CsgNodePtr csg_transform(const Transform& t, CsgNodePtr child);
CsgNodePtr csg_boolean(CsgOp op, std::vector<CsgNodePtr> children);

// Tessellates primitive/transform trees. `segments` is the default meridian
// count for spheres whose own setting is <= 0. Boolean nodes are rejected with
// UnsupportedConstructError naming the path (decompose handles the supported
// multi-material pattern instead).
TriMesh tessellate(const CsgNode& node, int segments = 20);

// Multi-material decomposition of difference(host, union(enclosed...)):
// host mesh keeps mu_host, each enclosed body becomes a separate mesh with the
// effective coefficient mu_inner - mu_host. Every enclosed body must lie
// strictly inside the host (ContainmentError otherwise).
std::vector<TriMesh> decompose(const CsgNode& node, const Material& host,
                               const Material& inner, int segments = 20);

} // namespace radisynth
