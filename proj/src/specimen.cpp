#include "radisynth/specimen.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "radisynth/errors.hpp"
#include "radisynth/rng.hpp"

namespace radisynth {

using nlohmann::json;

Vec3 PoreSpec::world_extent() const {
    // extent along world axis i = |row_i(R * diag(semi_axes))|
    Mat3 m = Mat3::rot_z(rotation_z_deg) * Mat3::scale(semi_axes());
    auto row = [&](int i) {
        return std::sqrt(m.m[i * 3] * m.m[i * 3] + m.m[i * 3 + 1] * m.m[i * 3 + 1] +
                         m.m[i * 3 + 2] * m.m[i * 3 + 2]);
    };
    return {row(0), row(1), row(2)};
}

bool PoreSpec::contains(const Vec3& p) const {
    Vec3 q = Mat3::rot_z(-rotation_z_deg) * (p - center);
    Vec3 a = semi_axes();
    double u = q.x / a.x, v = q.y / a.y, w = q.z / a.z;
    return u * u + v * v + w * w <= 1.0;
}

bool PoreSpec::ray_hit(const Vec3& origin, const Vec3& dir, double& t0, double& t1) const {
    // map into the unit-sphere frame of the ellipsoid
    Mat3 r_inv = Mat3::rot_z(-rotation_z_deg);
    Vec3 a = semi_axes();
    Vec3 o = r_inv * (origin - center);
    Vec3 d = r_inv * dir;
    o = {o.x / a.x, o.y / a.y, o.z / a.z};
    d = {d.x / a.x, d.y / a.y, d.z / a.z};
    double A = d.dot(d);
    double B = 2 * o.dot(d);
    double C = o.dot(o) - 1;
    double disc = B * B - 4 * A * C;
    if (disc <= 0 || A == 0) return false;
    double s = std::sqrt(disc);
    t0 = (-B - s) / (2 * A);
    t1 = (-B + s) / (2 * A);
    if (t1 < 0) return false;
    t0 = std::max(t0, 0.0);
    return true;
}

double PoreSpec::volume() const {
    Vec3 a = semi_axes();
    return 4.0 / 3.0 * kPi * a.x * a.y * a.z;
}

bool pores_clearly_disjoint(const PoreSpec& a, const PoreSpec& b) {
    Vec3 sa = a.semi_axes(), sb = b.semi_axes();
    double ra = std::max({sa.x, sa.y, sa.z});
    double rb = std::max({sb.x, sb.y, sb.z});
    return (a.center - b.center).norm() > ra + rb;
}

double SpecimenSpec::stack_thickness() const {
    double t = 0;
    for (const auto& l : layers) t += l.thickness;
    return t;
}

namespace {

json vec3_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }
Vec3 vec3_from(const json& j) { return {j.at(0), j.at(1), j.at(2)}; }

} // namespace

std::string SpecimenSpec::to_json() const {
    json j;
    j["schema_version"] = 1;
    j["kind"] = kind == SpecimenKind::PorePlate ? "pore_plate" : "fml_stack";
    j["plate_size"] = vec3_json(plate_size);
    j["host"] = {{"name", host.name}, {"mu", host.mu}};
    j["rng_seed"] = rng_seed;
    j["defects"] = json::array();
    for (const auto& p : defects)
        j["defects"].push_back({{"center", vec3_json(p.center)},
                                {"base_radius", p.base_radius},
                                {"scale", vec3_json(p.scale)},
                                {"rotation_z_deg", p.rotation_z_deg}});
    j["layers"] = json::array();
    for (const auto& l : layers)
        j["layers"].push_back({{"material", {{"name", l.material.name}, {"mu", l.material.mu}}},
                               {"thickness", l.thickness}});
    if (generator) {
        const auto& g = *generator;
        j["generator"] = {{"plate_size", vec3_json(g.plate_size)},
                          {"pore_count", g.pore_count},
                          {"poisson_count", g.poisson_count},
                          {"base_radius", g.base_radius},
                          {"scale_min", g.scale_min},
                          {"scale_max", g.scale_max},
                          {"rot_min_deg", g.rot_min_deg},
                          {"rot_max_deg", g.rot_max_deg},
                          {"margin", g.margin},
                          {"max_retries_per_pore", g.max_retries_per_pore}};
    }
    return j.dump(2);
}

SpecimenSpec SpecimenSpec::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("specimen JSON: ") + e.what());
    }
    try {
        SpecimenSpec s;
        std::string kind = j.at("kind");
        if (kind == "pore_plate") s.kind = SpecimenKind::PorePlate;
        else if (kind == "fml_stack") s.kind = SpecimenKind::FmlStack;
        else throw ParseError("specimen JSON: unknown kind '" + kind + "'");
        s.plate_size = vec3_from(j.at("plate_size"));
        s.host = {j.at("host").at("name"), j.at("host").at("mu")};
        s.rng_seed = j.at("rng_seed");
        for (const auto& d : j.at("defects"))
            s.defects.push_back({vec3_from(d.at("center")), d.at("base_radius"),
                                 vec3_from(d.at("scale")), d.at("rotation_z_deg")});
        for (const auto& l : j.at("layers"))
            s.layers.push_back({{l.at("material").at("name"), l.at("material").at("mu")},
                                l.at("thickness")});
        if (j.contains("generator")) {
            const auto& g = j["generator"];
            PorePlateParams p;
            p.plate_size = vec3_from(g.at("plate_size"));
            p.pore_count = g.at("pore_count");
            p.poisson_count = g.at("poisson_count");
            p.base_radius = g.at("base_radius");
            p.scale_min = g.at("scale_min");
            p.scale_max = g.at("scale_max");
            p.rot_min_deg = g.at("rot_min_deg");
            p.rot_max_deg = g.at("rot_max_deg");
            p.margin = g.at("margin");
            p.max_retries_per_pore = g.at("max_retries_per_pore");
            s.generator = p;
        }
        return s;
    } catch (const json::exception& e) {
        throw ParseError(std::string("specimen JSON: ") + e.what());
    }
}

std::string SpecimenSpec::pores_csv() const {
    std::ostringstream os;
    os.precision(9);
    os << "id,cx,cy,cz,r,sx,sy,sz,rot_deg\n";
    for (std::size_t i = 0; i < defects.size(); ++i) {
        const auto& p = defects[i];
        os << i << ',' << p.center.x << ',' << p.center.y << ',' << p.center.z << ','
           << p.base_radius << ',' << p.scale.x << ',' << p.scale.y << ',' << p.scale.z
           << ',' << p.rotation_z_deg << '\n';
    }
    return os.str();
}

SpecimenSpec generate_pore_plate(const PorePlateParams& params, const Material& host,
                                 std::uint64_t seed) {
    const Vec3 half = params.plate_size * 0.5;
    const Vec3 inner{half.x - params.margin, half.y - params.margin, half.z - params.margin};
    if (inner.x <= 0 || inner.y <= 0 || inner.z <= 0)
        throw ValidationError("margin leaves no interior volume");

    Rng rng = Rng(seed).sub("pore-plate");
    int target = params.pore_count;
    if (params.poisson_count) target = std::max(1, rng.sub("count").poisson(params.pore_count));

    SpecimenSpec spec;
    spec.kind = SpecimenKind::PorePlate;
    spec.plate_size = params.plate_size;
    spec.host = host;
    spec.rng_seed = seed;
    spec.generator = params;

    Rng draw = rng.sub("pores");
    for (int i = 0; i < target; ++i) {
        bool placed = false;
        for (int attempt = 0; attempt < params.max_retries_per_pore; ++attempt) {
            PoreSpec p;
            p.base_radius = params.base_radius;
            p.scale = {draw.uniform(params.scale_min, params.scale_max),
                       draw.uniform(params.scale_min, params.scale_max),
                       draw.uniform(params.scale_min, params.scale_max)};
            p.rotation_z_deg = draw.uniform(params.rot_min_deg, params.rot_max_deg);
            Vec3 ext = p.world_extent();
            Vec3 room{inner.x - ext.x, inner.y - ext.y, inner.z - ext.z};
            if (room.x <= 0 || room.y <= 0 || room.z <= 0) continue;
            p.center = {draw.uniform(-room.x, room.x), draw.uniform(-room.y, room.y),
                        draw.uniform(-room.z, room.z)};
            bool ok = true;
            for (const auto& other : spec.defects)
                if (!pores_clearly_disjoint(p, other)) { ok = false; break; }
            if (!ok) continue;
            spec.defects.push_back(p);
            placed = true;
            break;
        }
        if (!placed) {
            std::ostringstream os;
            os << "pore packing failed: placed " << spec.defects.size() << " of " << target
               << " pores within " << params.max_retries_per_pore << " retries each";
            throw PackingError(os.str());
        }
    }
    return spec;
}

SpecimenSpec generate_fml_stack(const Vec3& lateral_size,
                                const std::vector<LayerSpec>& layers) {
    if (layers.empty()) throw ValidationError("fml stack needs at least one layer");
    for (const auto& l : layers)
        if (!(l.thickness > 0)) throw ValidationError("layer thickness must be > 0");
    SpecimenSpec spec;
    spec.kind = SpecimenKind::FmlStack;
    spec.plate_size = {lateral_size.x, 0, lateral_size.z};
    spec.layers = layers;
    spec.plate_size.y = spec.stack_thickness();
    spec.host = layers.front().material;
    return spec;
}

CsgNodePtr specimen_csg(const SpecimenSpec& spec, int segments) {
    if (spec.kind != SpecimenKind::PorePlate)
        throw UnsupportedConstructError("specimen_csg supports pore plates only");
    CsgNodePtr plate = csg_box(spec.plate_size, true);
    std::vector<CsgNodePtr> pores;
    for (const auto& p : spec.defects) {
        Transform t;
        t.translation = p.center;
        t.rotation_deg = {0, 0, p.rotation_z_deg};
        t.scale = p.scale;
        pores.push_back(csg_transform(t, csg_sphere(p.base_radius, segments)));
    }
    return csg_boolean(CsgOp::Difference, {plate, csg_boolean(CsgOp::Union, std::move(pores))});
}

std::vector<TriMesh> specimen_meshes(const SpecimenSpec& spec, const Material& inner,
                                     int segments) {
    if (spec.kind == SpecimenKind::PorePlate)
        return decompose(*specimen_csg(spec, segments), spec.host, inner, segments);

    // stack: one box per layer along +y, centered overall
    std::vector<TriMesh> out;
    double y0 = -spec.stack_thickness() / 2;
    for (const auto& l : spec.layers) {
        TriMesh m = tessellate(*csg_box({spec.plate_size.x, l.thickness, spec.plate_size.z}, true));
        Transform t;
        t.translation = {0, y0 + l.thickness / 2, 0};
        m.apply(t);
        m.material = l.material;
        out.push_back(std::move(m));
        y0 += l.thickness;
    }
    return out;
}

} // namespace radisynth
