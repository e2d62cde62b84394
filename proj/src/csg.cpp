#include "radisynth/csg.hpp"

#include <cmath>
#include <sstream>
#include <string>

#include "radisynth/errors.hpp"

namespace radisynth {

CsgNodePtr csg_sphere(double radius, int segments) {
    if (!(radius > 0)) throw ValidationError("sphere radius must be > 0");
    return std::make_shared<const CsgNode>(CsgNode{CsgSphere{radius, segments}});
}

CsgNodePtr csg_box(const Vec3& size, bool centered) {
    if (!(size.x > 0 && size.y > 0 && size.z > 0))
        throw ValidationError("box sizes must be > 0");
    return std::make_shared<const CsgNode>(CsgNode{CsgBox{size, centered}});
}

CsgNodePtr csg_transform(const Transform& t, CsgNodePtr child) {
    if (!(t.scale.x > 0 && t.scale.y > 0 && t.scale.z > 0))
        throw ValidationError("transform scale components must be > 0");
    return std::make_shared<const CsgNode>(CsgNode{CsgTransformed{t, std::move(child)}});
}

CsgNodePtr csg_boolean(CsgOp op, std::vector<CsgNodePtr> children) {
    return std::make_shared<const CsgNode>(CsgNode{CsgBoolean{op, std::move(children)}});
}

namespace {

TriMesh make_box(const CsgBox& box) {
    TriMesh m;
    Vec3 lo = box.centered ? box.size * -0.5 : Vec3{0, 0, 0};
    Vec3 hi = box.centered ? box.size * 0.5 : box.size;
    m.vertices = {{lo.x, lo.y, lo.z}, {hi.x, lo.y, lo.z}, {hi.x, hi.y, lo.z},
                  {lo.x, hi.y, lo.z}, {lo.x, lo.y, hi.z}, {hi.x, lo.y, hi.z},
                  {hi.x, hi.y, hi.z}, {lo.x, hi.y, hi.z}};
    m.triangles = {
        {0, 2, 1}, {0, 3, 2}, // z = lo
        {4, 5, 6}, {4, 6, 7}, // z = hi
        {0, 1, 5}, {0, 5, 4}, // y = lo
        {2, 3, 7}, {2, 7, 6}, // y = hi
        {0, 4, 7}, {0, 7, 3}, // x = lo
        {1, 2, 6}, {1, 6, 5}, // x = hi
    };
    return m;
}

// UV sphere with `segments` meridians and equally many stacks, pole fans.
TriMesh make_sphere(double radius, int segments) {
    if (segments < 6) throw ValidationError("sphere segments must be >= 6");
    int stacks = segments;
    // compensate the inscribed-polygon deficit so chord lengths and volume
    // straddle the analytic sphere instead of under-shooting it
    radius *= std::sqrt((2 * kPi / segments) / std::sin(2 * kPi / segments));
    TriMesh m;
    m.vertices.push_back({0, 0, radius});  // north pole
    for (int i = 1; i < stacks; ++i) {
        double phi = kPi * i / stacks; // from +z
        double z = radius * std::cos(phi);
        double r = radius * std::sin(phi);
        for (int j = 0; j < segments; ++j) {
            double th = 2 * kPi * j / segments;
            m.vertices.push_back({r * std::cos(th), r * std::sin(th), z});
        }
    }
    m.vertices.push_back({0, 0, -radius}); // south pole
    int south = static_cast<int>(m.vertices.size()) - 1;
    auto ring = [&](int i, int j) { return 1 + (i - 1) * segments + (j % segments); };
    for (int j = 0; j < segments; ++j)
        m.triangles.push_back({0, ring(1, j), ring(1, j + 1)});
    for (int i = 1; i < stacks - 1; ++i) {
        for (int j = 0; j < segments; ++j) {
            int a = ring(i, j), b = ring(i, j + 1), c = ring(i + 1, j + 1), d = ring(i + 1, j);
            m.triangles.push_back({a, d, c});
            m.triangles.push_back({a, c, b});
        }
    }
    for (int j = 0; j < segments; ++j)
        m.triangles.push_back({south, ring(stacks - 1, j + 1), ring(stacks - 1, j)});
    return m;
}

TriMesh tessellate_impl(const CsgNode& node, int default_segments, std::string path) {
    if (const auto* s = std::get_if<CsgSphere>(&node.value)) {
        int seg = s->segments > 0 ? s->segments : default_segments;
        return make_sphere(s->radius, seg);
    }
    if (const auto* b = std::get_if<CsgBox>(&node.value)) {
        return make_box(*b);
    }
    if (const auto* t = std::get_if<CsgTransformed>(&node.value)) {
        TriMesh m = tessellate_impl(*t->child, default_segments, path + "/transform");
        m.apply(t->transform);
        if (t->transform.linear().det() < 0) {
            // reflection would flip winding; scales are constrained positive so
            // this cannot happen, but keep the volume-sign contract explicit
            for (auto& tri : m.triangles) std::swap(tri[1], tri[2]);
        }
        return m;
    }
    const auto& b = std::get<CsgBoolean>(node.value);
    const char* names[] = {"union", "difference", "intersection"};
    std::ostringstream os;
    os << "boolean node (" << names[static_cast<int>(b.op)] << ") at '" << path
       << "' cannot be tessellated directly; decompose the model into "
          "difference(host, union(enclosed...)) parts";
    throw UnsupportedConstructError(os.str());
}

} // namespace

TriMesh tessellate(const CsgNode& node, int segments) {
    return tessellate_impl(node, segments, "");
}

std::vector<TriMesh> decompose(const CsgNode& node, const Material& host,
                               const Material& inner, int segments) {
    const auto* diff = std::get_if<CsgBoolean>(&node.value);
    if (!diff || diff->op != CsgOp::Difference || diff->children.size() != 2)
        throw UnsupportedConstructError(
            "decompose expects difference(host, union(enclosed...)) at the root");
    const CsgNode& host_node = *diff->children[0];
    const auto* uni = std::get_if<CsgBoolean>(&diff->children[1]->value);
    if (!uni || uni->op != CsgOp::Union)
        throw UnsupportedConstructError(
            "decompose expects the subtracted operand to be a union of enclosed bodies");

    std::vector<TriMesh> out;
    TriMesh host_mesh = tessellate(host_node, segments);
    host_mesh.material = host;
    out.push_back(std::move(host_mesh));

    for (std::size_t i = 0; i < uni->children.size(); ++i) {
        TriMesh m = tessellate(*uni->children[i], segments);
        for (const auto& v : m.vertices) {
            if (!point_inside(out[0], v)) {
                std::ostringstream os;
                os << "enclosed body " << i << " is not strictly inside the host (vertex ("
                   << v.x << ", " << v.y << ", " << v.z << ") outside)";
                throw ContainmentError(os.str());
            }
        }
        m.material = Material{inner.name + "-" + host.name + "-eff", inner.mu - host.mu};
        out.push_back(std::move(m));
    }
    return out;
}

} // namespace radisynth
