#include "radisynth/xray.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "radisynth/errors.hpp"
#include "radisynth/parallel.hpp"
#include "radisynth/raycast.hpp"
#include "radisynth/rng.hpp"

namespace radisynth {

using nlohmann::json;

void ProjectionGeometry::validate() const {
    if (!(sod_mm > 0 && sdd_mm > sod_mm))
        throw ValidationError("geometry requires 0 < SOD < SDD");
    if (!(pitch_mm > 0)) throw ValidationError("pixel pitch must be > 0");
    if (nx < 1 || ny < 1) throw ValidationError("detector must have >= 1 pixel per axis");
}

std::string ProjectionGeometry::to_json() const {
    json j{{"sod_mm", sod_mm}, {"sdd_mm", sdd_mm},  {"pitch_mm", pitch_mm},
           {"nx", nx},         {"ny", ny},          {"angle_deg", angle_deg}};
    return j.dump(2);
}

ProjectionGeometry ProjectionGeometry::from_json(const std::string& text) {
    try {
        json j = json::parse(text);
        ProjectionGeometry g;
        g.sod_mm = j.at("sod_mm");
        g.sdd_mm = j.at("sdd_mm");
        g.pitch_mm = j.at("pitch_mm");
        g.nx = j.at("nx");
        g.ny = j.at("ny");
        g.angle_deg = j.value("angle_deg", 0.0);
        g.validate();
        return g;
    } catch (const json::exception& e) {
        throw ParseError(std::string("geometry JSON: ") + e.what());
    }
}

ProjectionGeometry DevicePreset::geometry() const {
    ProjectionGeometry g;
    g.sod_mm = sod_mm;
    g.sdd_mm = sdd_mm;
    g.pitch_mm = pitch_mm;
    g.nx = nx;
    g.ny = ny;
    return g;
}

DevicePreset device_preset(const std::string& name) {
    // pixel counts, pitch and bit depth follow the three device classes; the
    // distances pick M=2 within each class's source-object range
    if (name == "highq") return {"highq", 2000, 2000, 0.02, 16, 75, 150, 0.01};
    if (name == "midq") return {"midq", 1000, 1000, 0.2, 16, 450, 900, 0.05};
    if (name == "lowq") return {"lowq", 2000, 1000, 0.04, 12, 250, 500, 0.15};
    throw NotFoundError("unknown device preset '" + name + "' (highq|midq|lowq)");
}

void AcquisitionConfig::validate() const {
    if (count < 1) throw ValidationError("projection count must be >= 1");
    if (!(range_deg > 0) && count > 1)
        throw ValidationError("angular range must be > 0 for multiple projections");
    geometry.validate();
}

std::vector<double> AcquisitionConfig::angles() const {
    std::vector<double> out(count);
    for (int i = 0; i < count; ++i) out[i] = start_deg + range_deg * i / count;
    return out;
}

namespace {

// merge hits closer than tol, track whether any merge happened
std::size_t merge_hits(std::vector<double>& hits, double tol) {
    std::sort(hits.begin(), hits.end());
    std::size_t n = 0, merged = 0;
    for (std::size_t i = 0; i < hits.size(); ++i) {
        if (n == 0 || hits[i] - hits[n - 1] > tol) hits[n++] = hits[i];
        else ++merged;
    }
    hits.resize(n);
    return merged;
}

struct TraceScene {
    const std::vector<TriMesh>* meshes;
    std::vector<Aabb> boxes;
    std::vector<double> diameters; // per mesh, so results do not depend on what
                                   // else is in the scene

    explicit TraceScene(const std::vector<TriMesh>& m) : meshes(&m) {
        for (const auto& mesh : m) {
            boxes.push_back(mesh.bounds());
            diameters.push_back(std::max(boxes.back().diameter(), 1.0));
        }
    }

    // unit-dir path length through mesh k, parity pairing with jitter retry
    double path_length(std::size_t k, const Vec3& origin, const Vec3& dir,
                       std::vector<double>& hits) const {
        const double diameter = diameters[k];
        const double tol = 1e-9 * diameter;
        Vec3 d = dir;
        for (int attempt = 0;; ++attempt) {
            Vec3 inv{1.0 / d.x, 1.0 / d.y, 1.0 / d.z};
            if (!boxes[k].hit_ray(origin, inv)) return 0.0;
            ray_mesh_hits((*meshes)[k], origin, d, hits);
            merge_hits(hits, tol);
            if (hits.size() % 2 == 0) break;
            if (attempt >= 1) {
                std::ostringstream os;
                os << "degenerate ray/mesh parity (" << hits.size() << " crossings) for mesh "
                   << k << " after jitter retry";
                throw DegenerateHitError(os.str());
            }
            // deterministic jitter, small relative to the scene
            double j = 1e-6 * diameter / std::max(1.0, (origin - boxes[k].center()).norm());
            d = Vec3{d.x + j * 0.83, d.y + j * 0.41, d.z + j * 1.19}.normalized();
        }
        double len = 0;
        for (std::size_t i = 0; i + 1 < hits.size(); i += 2) len += hits[i + 1] - hits[i];
        return len;
    }
};

Vec3 rotate_z(const Vec3& p, double cos_a, double sin_a) {
    return {cos_a * p.x - sin_a * p.y, sin_a * p.x + cos_a * p.y, p.z};
}

} // namespace

std::vector<double> ray_path_lengths(const Vec3& origin, const Vec3& dir,
                                     const std::vector<TriMesh>& meshes) {
    if (dir.norm() == 0) throw ValidationError("ray direction must be nonzero");
    TraceScene scene(meshes);
    Vec3 d = dir.normalized();
    std::vector<double> hits;
    std::vector<double> out(meshes.size(), 0.0);
    for (std::size_t k = 0; k < meshes.size(); ++k)
        out[k] = scene.path_length(k, origin, d, hits);
    return out;
}

ProjectionImage simulate_projection(const std::vector<TriMesh>& meshes,
                                    const ProjectionGeometry& geometry, int threads) {
    geometry.validate();
    TraceScene scene(meshes);
    ProjectionImage img;
    img.width = geometry.nx;
    img.height = geometry.ny;
    img.pitch_mm = geometry.pitch_mm;
    img.angle_deg = geometry.angle_deg;
    img.v.assign(static_cast<std::size_t>(geometry.nx) * geometry.ny, 1.0);

    // rotating the specimen by +angle about z == rotating rays by -angle
    const double ca = std::cos(deg2rad(-geometry.angle_deg));
    const double sa = std::sin(deg2rad(-geometry.angle_deg));
    const Vec3 src = rotate_z(geometry.source(), ca, sa);

    parallel_for(static_cast<std::size_t>(geometry.ny), threads, [&](std::size_t j) {
        std::vector<double> hits;
        for (int i = 0; i < geometry.nx; ++i) {
            Vec3 pix = rotate_z(geometry.pixel_center(i, static_cast<int>(j)), ca, sa);
            Vec3 d = (pix - src).normalized();
            double att = 0;
            for (std::size_t k = 0; k < meshes.size(); ++k) {
                double len = scene.path_length(k, src, d, hits);
                if (len > 0) att += meshes[k].material.mu * len;
            }
            img.v[j * geometry.nx + i] = std::exp(-att);
        }
    });
    return img;
}

std::vector<ProjectionImage> simulate_rotation_series(const std::vector<TriMesh>& meshes,
                                                      const AcquisitionConfig& config,
                                                      int threads) {
    config.validate();
    std::vector<ProjectionImage> out;
    out.reserve(config.count);
    for (double a : config.angles()) {
        ProjectionGeometry g = config.geometry;
        g.angle_deg = a;
        out.push_back(simulate_projection(meshes, g, threads));
    }
    return out;
}

ProjectionImage add_noise(const ProjectionImage& img, const NoiseModel& model) {
    if (model.sigma_rel < 0) throw ValidationError("noise sigma must be >= 0");
    ProjectionImage out = img;
    if (model.sigma_rel == 0) return out;
    for (std::size_t i = 0; i < out.v.size(); ++i) {
        double n = model.sigma_rel * normal_at(model.seed, i);
        double v = model.kind == NoiseModel::Kind::GaussianRelative ? out.v[i] * (1.0 + n)
                                                                    : out.v[i] + n;
        out.v[i] = std::max(0.0, v);
    }
    return out;
}

ImageU16 quantize(const ImageF& img, const QuantizationSpec& spec) {
    if (spec.bits != 12 && spec.bits != 16)
        throw ValidationError("quantization supports 12 or 16 bits");
    const double full = (1u << spec.bits) - 1;
    ImageU16 out;
    out.width = img.width;
    out.height = img.height;
    out.v.resize(img.size());
    for (std::size_t i = 0; i < img.size(); ++i)
        out.v[i] = static_cast<std::uint16_t>(std::lround(std::clamp(img.v[i], 0.0, 1.0) * full));
    return out;
}

ImageF dequantize(const ImageU16& img, int bits) {
    if (bits != 12 && bits != 16) throw ValidationError("dequantize supports 12 or 16 bits");
    const double full = (1u << bits) - 1;
    ImageF out(img.width, img.height);
    for (std::size_t i = 0; i < img.v.size(); ++i) out.v[i] = img.v[i] / full;
    return out;
}

MaskImage ground_truth_mask(const SpecimenSpec& spec, const ProjectionGeometry& geometry) {
    geometry.validate();
    MaskImage mask(geometry.nx, geometry.ny);
    const double ca = std::cos(deg2rad(-geometry.angle_deg));
    const double sa = std::sin(deg2rad(-geometry.angle_deg));
    const Vec3 src = rotate_z(geometry.source(), ca, sa);
    for (int j = 0; j < geometry.ny; ++j) {
        for (int i = 0; i < geometry.nx; ++i) {
            Vec3 pix = rotate_z(geometry.pixel_center(i, j), ca, sa);
            Vec3 d = (pix - src).normalized();
            double t0, t1;
            for (const auto& pore : spec.defects) {
                if (pore.ray_hit(src, d, t0, t1) && t1 > t0) {
                    mask.at(i, j) = 1;
                    break;
                }
            }
        }
    }
    return mask;
}

} // namespace radisynth
