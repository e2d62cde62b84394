#pragma once
#include <complex>
#include <vector>

#include "radisynth/image.hpp"
#include "radisynth/xray.hpp"

namespace radisynth {

// In-place power-of-two FFT (Cooley-Tukey). inverse includes the 1/n factor.
void fft_pow2(std::vector<std::complex<double>>& a, bool inverse);

// Line integrals p(theta, s) = -ln(I/I0) for one detector row. ds_mm is the
// object-plane sample spacing (detector pitch / magnification).
struct Sinogram {
    std::vector<double> angles_deg; // ascending
    int ns = 0;
    double ds_mm = 1;
    std::vector<double> p; // angles x ns

    double& at(int a, int s) { return p[static_cast<std::size_t>(a) * ns + s]; }
    double at(int a, int s) const { return p[static_cast<std::size_t>(a) * ns + s]; }
};

struct FilterSpec {
    enum class Kind { Ramp, RampHann };
    Kind kind = Kind::Ramp;
    double cutoff = 1.0; // fraction of Nyquist
};

// One sinogram per detector row; intensities clamped at epsilon before log.
std::vector<Sinogram> to_sinogram(const std::vector<ProjectionImage>& series,
                                  double magnification, double epsilon = 1e-6);

// Parallel-beam filtered back projection of one row onto an n x n grid with
// ds_mm voxels. Requires >= 2 angles spanning >= 180 degrees.
ImageF fbp_slice(const Sinogram& sino, const FilterSpec& filter, int out_n);

// Stack of per-row slices: volume (n, n, rows), quasi-parallel approximation.
Volume reconstruct_volume(const std::vector<ProjectionImage>& series,
                          const FilterSpec& filter, const ProjectionGeometry& geometry,
                          int out_n = 0, int threads = 1);

} // namespace radisynth
