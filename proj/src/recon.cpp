#include "radisynth/recon.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "radisynth/errors.hpp"
#include "radisynth/parallel.hpp"

namespace radisynth {

void fft_pow2(std::vector<std::complex<double>>& a, bool inverse) {
    const std::size_t n = a.size();
    if (n == 0 || (n & (n - 1)) != 0)
        throw ValidationError("fft_pow2 requires a power-of-two length");
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        double ang = 2 * kPi / static_cast<double>(len) * (inverse ? 1 : -1);
        std::complex<double> wlen(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1);
            for (std::size_t k = 0; k < len / 2; ++k) {
                std::complex<double> u = a[i + k];
                std::complex<double> v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
    if (inverse)
        for (auto& x : a) x /= static_cast<double>(n);
}

std::vector<Sinogram> to_sinogram(const std::vector<ProjectionImage>& series,
                                  double magnification, double epsilon) {
    if (series.empty()) throw ShapeError("to_sinogram: empty series");
    const int nx = series[0].width, ny = series[0].height;
    for (const auto& img : series)
        if (img.width != nx || img.height != ny) {
            std::ostringstream os;
            os << "to_sinogram: image dimensions differ (" << img.width << "x" << img.height
               << " vs " << nx << "x" << ny << ")";
            throw ShapeError(os.str());
        }
    std::vector<Sinogram> rows(ny);
    for (int j = 0; j < ny; ++j) {
        Sinogram& s = rows[j];
        s.ns = nx;
        s.ds_mm = series[0].pitch_mm / magnification;
        s.angles_deg.reserve(series.size());
        s.p.resize(series.size() * static_cast<std::size_t>(nx));
    }
    for (std::size_t a = 0; a < series.size(); ++a) {
        for (int j = 0; j < ny; ++j) {
            rows[j].angles_deg.push_back(series[a].angle_deg);
            for (int i = 0; i < nx; ++i)
                rows[j].at(static_cast<int>(a), i) =
                    -std::log(std::max(series[a].at(i, j), epsilon));
        }
    }
    return rows;
}

namespace {

void check_coverage(const Sinogram& sino) {
    const auto& a = sino.angles_deg;
    if (a.size() < 2) throw InsufficientCoverageError("fbp needs at least 2 angles");
    double span = a.back() - a.front();
    double step = span / static_cast<double>(a.size() - 1);
    if (span + step < 180.0 * (1 - 1e-9)) {
        std::ostringstream os;
        os << "angular span " << span + step << " deg < 180 deg";
        throw InsufficientCoverageError(os.str());
    }
}

// ramp-filter every angle of the sinogram, zero-padded to >= 2x width
std::vector<double> filter_rows(const Sinogram& sino, const FilterSpec& filter) {
    std::size_t npad = 1;
    while (npad < static_cast<std::size_t>(2 * sino.ns)) npad <<= 1;
    const double nyquist = 1.0 / (2.0 * sino.ds_mm);
    const double f_cut = filter.cutoff * nyquist;

    std::vector<double> response(npad / 2 + 1);
    for (std::size_t k = 0; k <= npad / 2; ++k) {
        double f = static_cast<double>(k) / (static_cast<double>(npad) * sino.ds_mm);
        double r = f <= f_cut ? f : 0.0;
        if (filter.kind == FilterSpec::Kind::RampHann && f <= f_cut && f_cut > 0)
            r *= 0.5 * (1.0 + std::cos(kPi * f / f_cut));
        response[k] = r;
    }

    std::vector<double> out(sino.p.size());
    std::vector<std::complex<double>> buf;
    for (std::size_t a = 0; a < sino.angles_deg.size(); ++a) {
        buf.assign(npad, {0, 0});
        for (int i = 0; i < sino.ns; ++i) buf[i] = sino.p[a * sino.ns + i];
        fft_pow2(buf, false);
        for (std::size_t k = 0; k < npad; ++k) {
            std::size_t kk = k <= npad / 2 ? k : npad - k;
            buf[k] *= response[kk];
        }
        fft_pow2(buf, true);
        for (int i = 0; i < sino.ns; ++i) out[a * sino.ns + i] = buf[i].real();
    }
    return out;
}

} // namespace

ImageF fbp_slice(const Sinogram& sino, const FilterSpec& filter, int out_n) {
    check_coverage(sino);
    if (out_n <= 0) out_n = sino.ns;
    std::vector<double> q = filter_rows(sino, filter);

    ImageF slice(out_n, out_n, sino.ds_mm, 0.0);
    const double ctr = (out_n - 1) / 2.0;
    const double sctr = (sino.ns - 1) / 2.0;
    const std::size_t na = sino.angles_deg.size();
    for (std::size_t a = 0; a < na; ++a) {
        const double th = deg2rad(sino.angles_deg[a]);
        const double c = std::cos(th), s = std::sin(th);
        const double* row = q.data() + a * sino.ns;
        for (int iy = 0; iy < out_n; ++iy) {
            double y = (iy - ctr) * sino.ds_mm;
            for (int ix = 0; ix < out_n; ++ix) {
                double x = (ix - ctr) * sino.ds_mm;
                // detector coordinate of (x, y) at specimen rotation theta
                double u = (x * c - y * s) / sino.ds_mm + sctr;
                int i0 = static_cast<int>(std::floor(u));
                if (i0 < 0 || i0 + 1 >= sino.ns) continue;
                double w = u - i0;
                slice.v[static_cast<std::size_t>(iy) * out_n + ix] +=
                    (1 - w) * row[i0] + w * row[i0 + 1];
            }
        }
    }
    const double scale = kPi / static_cast<double>(na);
    for (auto& v : slice.v) v *= scale;
    return slice;
}

Volume reconstruct_volume(const std::vector<ProjectionImage>& series,
                          const FilterSpec& filter, const ProjectionGeometry& geometry,
                          int out_n, int threads) {
    auto rows = to_sinogram(series, geometry.magnification());
    if (out_n <= 0) out_n = rows.front().ns;
    Volume vol(out_n, out_n, static_cast<int>(rows.size()), rows.front().ds_mm);
    parallel_for(rows.size(), threads, [&](std::size_t j) {
        ImageF slice = fbp_slice(rows[j], filter, out_n);
        std::copy(slice.v.begin(), slice.v.end(),
                  vol.v.begin() + static_cast<std::size_t>(j) * slice.v.size());
    });
    return vol;
}

} // namespace radisynth
