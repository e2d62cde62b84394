#pragma once
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "radisynth/csg.hpp"
#include "radisynth/mesh.hpp"

namespace radisynth {

// One pore = translate(center) . rotate_z . scale . sphere(base_radius).
struct PoreSpec {
    Vec3 center;               // mm
    double base_radius = 0.5;  // mm
    Vec3 scale{1, 1, 1};
    double rotation_z_deg = 0;

    Vec3 semi_axes() const { return scale * base_radius; }
    // half-extent of the rotated ellipsoid along each world axis
    Vec3 world_extent() const;
    bool contains(const Vec3& p) const;
    // forward ray hit test in units of |dir|; returns entry/exit params
    bool ray_hit(const Vec3& origin, const Vec3& dir, double& t0, double& t1) const;
    double volume() const;
};

struct LayerSpec {
    Material material;
    double thickness = 1; // mm
};

enum class SpecimenKind { PorePlate, FmlStack };

struct PorePlateParams {
    Vec3 plate_size{100, 4, 40};
    int pore_count = 100;        // exact target, or Poisson mean when poisson_count
    bool poisson_count = false;
    double base_radius = 0.5;
    double scale_min = 0.5, scale_max = 2.1;
    double rot_min_deg = -90, rot_max_deg = 90;
    double margin = 0.2;         // mm kept clear of every plate face
    int max_retries_per_pore = 100;
};

struct SpecimenSpec {
    SpecimenKind kind = SpecimenKind::PorePlate;
    Vec3 plate_size{100, 4, 40};       // pore plate dims, or lateral dims of a stack
    std::vector<LayerSpec> layers;     // FML stack only, bottom to top along +y
    std::vector<PoreSpec> defects;
    Material host{"aluminum", 0.15};
    std::uint64_t rng_seed = 0;
    std::optional<PorePlateParams> generator; // recorded generation parameters

    double stack_thickness() const;

    std::string to_json() const;
    static SpecimenSpec from_json(const std::string& text);
    std::string pores_csv() const; // header: id,cx,cy,cz,r,sx,sy,sz,rot_deg
};

// Plate centered at the origin; pores placed by rejection sampling so that each
// lies inside the plate minus margin and no two overlap. PackingError reports
// the achieved count when the retry budget runs out.
SpecimenSpec generate_pore_plate(const PorePlateParams& params, const Material& host,
                                 std::uint64_t seed);

// Flat stack of layer boxes along +y, centered at the origin, sharing
// interfaces exactly.
SpecimenSpec generate_fml_stack(const Vec3& lateral_size,
                                const std::vector<LayerSpec>& layers);

// CSG view of a spec: difference(host box, union(pore ellipsoids)).
CsgNodePtr specimen_csg(const SpecimenSpec& spec, int segments = 20);

// Decomposed simulation meshes: host + effective pores for a pore plate, one
// box per layer for a stack.
std::vector<TriMesh> specimen_meshes(const SpecimenSpec& spec, const Material& inner,
                                     int segments = 20);

// conservative disjointness used by the generator (bounding spheres)
bool pores_clearly_disjoint(const PoreSpec& a, const PoreSpec& b);

} // namespace radisynth
