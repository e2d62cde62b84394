#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "radisynth/image.hpp"
#include "radisynth/mesh.hpp"
#include "radisynth/specimen.hpp"

namespace radisynth {

// Cone-beam geometry on the y axis: source at (0, -SOD, 0), detector plane at
// y = SDD - SOD centered on the axis, detector u = +x, v = +z (the specimen
// rotation axis). The specimen sits at the origin and is rotated by angle_deg
// counter-clockwise about +z.
struct ProjectionGeometry {
    double sod_mm = 500;  // source-object distance
    double sdd_mm = 1000; // source-detector distance
    double pitch_mm = 0.2;
    int nx = 1000, ny = 1000;
    double angle_deg = 0;

    void validate() const;
    double magnification() const { return sdd_mm / sod_mm; }
    Vec3 source() const { return {0, -sod_mm, 0}; }
    Vec3 pixel_center(int i, int j) const {
        return {(i - (nx - 1) / 2.0) * pitch_mm, sdd_mm - sod_mm,
                (j - (ny - 1) / 2.0) * pitch_mm};
    }

    std::string to_json() const;
    static ProjectionGeometry from_json(const std::string& text);
};

// Device classes modeled after typical high/mid/low quality lab setups.
// Attenuation and noise values are calibration constants, not physics claims.
struct DevicePreset {
    std::string name;
    int nx = 0, ny = 0;
    double pitch_mm = 0;
    int bits = 16;
    double sod_mm = 0, sdd_mm = 0;
    double noise_sigma_rel = 0;

    ProjectionGeometry geometry() const;
};

DevicePreset device_preset(const std::string& name); // "highq" | "midq" | "lowq"

struct AcquisitionConfig {
    int count = 400;
    double start_deg = 0;
    double range_deg = 180;
    ProjectionGeometry geometry;

    void validate() const;
    std::vector<double> angles() const; // start + i*range/count, strictly increasing
};

struct NoiseModel {
    enum class Kind { GaussianRelative, GaussianFullScale };
    Kind kind = Kind::GaussianRelative;
    double sigma_rel = 0;
    std::uint64_t seed = 0;
};

struct QuantizationSpec {
    int bits = 16; // 12 or 16
};

struct ProjectionImage : ImageF {
    double angle_deg = 0;
    std::string provenance; // free-form JSON blob recorded by the pipeline
};

// Per-mesh accumulated path length (mm) along origin + t*dir. Parity-ordered
// interval sum; 0 for misses. Grazing hits are retried once with a small
// direction jitter, then DegenerateHitError.
std::vector<double> ray_path_lengths(const Vec3& origin, const Vec3& dir,
                                     const std::vector<TriMesh>& meshes);

// Beer-Lambert: I/I0 = exp(-sum mu_eff * L) per pixel ray.
ProjectionImage simulate_projection(const std::vector<TriMesh>& meshes,
                                    const ProjectionGeometry& geometry, int threads = 1);

std::vector<ProjectionImage> simulate_rotation_series(const std::vector<TriMesh>& meshes,
                                                      const AcquisitionConfig& config,
                                                      int threads = 1);

ProjectionImage add_noise(const ProjectionImage& img, const NoiseModel& model);

ImageU16 quantize(const ImageF& img, const QuantizationSpec& spec);
ImageF dequantize(const ImageU16& img, int bits);

// Pixel = defect iff the source-to-pixel ray meets any defect ellipsoid
// (analytic test, not mesh based).
MaskImage ground_truth_mask(const SpecimenSpec& spec, const ProjectionGeometry& geometry);

} // namespace radisynth
