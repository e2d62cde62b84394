#pragma once
#include <cstdint>
#include <string>
#include <vector>

namespace radisynth {

// Row-major 2D image, y*width + x. Values are relative intensity I/I0 for
// projections, scores in [0,1] for feature maps.
struct ImageF {
    int width = 0, height = 0;
    double pitch_mm = 0;
    std::vector<double> v;

    ImageF() = default;
    ImageF(int w, int h, double pitch = 0, double fill = 0)
        : width(w), height(h), pitch_mm(pitch), v(static_cast<std::size_t>(w) * h, fill) {}

    double& at(int x, int y) { return v[static_cast<std::size_t>(y) * width + x]; }
    double at(int x, int y) const { return v[static_cast<std::size_t>(y) * width + x]; }
    std::size_t size() const { return v.size(); }
};

struct ImageU16 {
    int width = 0, height = 0;
    std::vector<std::uint16_t> v;
};

// binary class image: 0 background, 1 defect
struct MaskImage {
    int width = 0, height = 0;
    std::vector<std::uint8_t> v;

    MaskImage() = default;
    MaskImage(int w, int h) : width(w), height(h), v(static_cast<std::size_t>(w) * h, 0) {}
    std::uint8_t& at(int x, int y) { return v[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t at(int x, int y) const { return v[static_cast<std::size_t>(y) * width + x]; }
};

// Reconstructed density grid, x-fastest: (z*ny + y)*nx + x.
struct Volume {
    int nx = 0, ny = 0, nz = 0;
    double voxel_mm = 0;
    std::vector<double> v;

    Volume() = default;
    Volume(int x, int y, int z, double voxel = 0, double fill = 0)
        : nx(x), ny(y), nz(z), voxel_mm(voxel),
          v(static_cast<std::size_t>(x) * y * z, fill) {}

    double& at(int x, int y, int z) {
        return v[(static_cast<std::size_t>(z) * ny + y) * nx + x];
    }
    double at(int x, int y, int z) const {
        return v[(static_cast<std::size_t>(z) * ny + y) * nx + x];
    }
};

// 16-bit grayscale PNG/PGM of values clamped to [0,1] (or windowed by
// [lo, hi] when given).
void write_pgm16(const ImageF& img, const std::string& path, double lo = 0, double hi = 1);
void write_png16(const ImageF& img, const std::string& path, double lo = 0, double hi = 1);
void write_png8_mask(const MaskImage& mask, const std::string& path);

// raw float32 little-endian + JSON sidecar at path + ".json"
void write_raw_f32(const ImageF& img, const std::string& path,
                   const std::string& sidecar_json);
ImageF read_raw_f32(const std::string& path);
std::string read_sidecar(const std::string& path);

void write_volume_f32(const Volume& vol, const std::string& path,
                      const std::string& sidecar_json);
Volume read_volume_f32(const std::string& path);

} // namespace radisynth
