#include <doctest.h>

#include <cmath>

#include "radisynth/csg.hpp"
#include "radisynth/errors.hpp"
#include "radisynth/recon.hpp"

using namespace radisynth;

namespace {

// analytic parallel-beam sinogram of a uniform disk at (x0, y0)
Sinogram disk_sinogram(double mu, double r, double x0, double y0, int n_angles,
                       int ns, double ds) {
    Sinogram sino;
    sino.ns = ns;
    sino.ds_mm = ds;
    sino.p.resize(static_cast<std::size_t>(n_angles) * ns);
    for (int a = 0; a < n_angles; ++a) {
        double th_deg = 180.0 * a / n_angles;
        sino.angles_deg.push_back(th_deg);
        double th = deg2rad(th_deg);
        double s0 = x0 * std::cos(th) - y0 * std::sin(th);
        for (int i = 0; i < ns; ++i) {
            double s = (i - (ns - 1) / 2.0) * ds - s0;
            double d2 = r * r - s * s;
            sino.at(a, i) = d2 > 0 ? 2.0 * mu * std::sqrt(d2) : 0.0;
        }
    }
    return sino;
}

double mean_inside(const ImageF& img, double cx_mm, double cy_mm, double r_mm) {
    double ctr = (img.width - 1) / 2.0;
    double sum = 0;
    long long n = 0;
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            double px = (x - ctr) * img.pitch_mm - cx_mm;
            double py = (y - ctr) * img.pitch_mm - cy_mm;
            if (px * px + py * py <= r_mm * r_mm) {
                sum += img.at(x, y);
                ++n;
            }
        }
    return n ? sum / n : 0.0;
}

} // namespace

TEST_CASE("fft round trip and known transform") {
    std::vector<std::complex<double>> a = {1, 2, 3, 4, 0, 0, 0, 0};
    auto orig = a;
    fft_pow2(a, false);
    // DC bin is the sum
    CHECK(a[0].real() == doctest::Approx(10.0));
    fft_pow2(a, true);
    for (std::size_t i = 0; i < a.size(); ++i)
        CHECK(std::abs(a[i] - orig[i]) < 1e-12);
}

TEST_CASE("to_sinogram basics and clamping") {
    ProjectionImage img;
    img.width = 4;
    img.height = 2;
    img.pitch_mm = 0.5;
    img.angle_deg = 0;
    img.v.assign(8, 1.0);
    auto rows = to_sinogram({img}, 2.0);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].ds_mm == doctest::Approx(0.25));
    for (int i = 0; i < 4; ++i) CHECK(rows[0].at(0, i) == 0.0);

    img.v.assign(8, std::exp(-0.2));
    rows = to_sinogram({img}, 2.0);
    CHECK(rows[1].at(0, 2) == doctest::Approx(0.2));

    img.v.assign(8, 0.0);
    rows = to_sinogram({img}, 2.0);
    CHECK(rows[0].at(0, 0) == doctest::Approx(-std::log(1e-6)));
}

TEST_CASE("to_sinogram rejects mismatched dimensions") {
    ProjectionImage a, b;
    a.width = a.height = 4;
    a.v.assign(16, 1.0);
    b.width = b.height = 8;
    b.v.assign(64, 1.0);
    CHECK_THROWS_AS(to_sinogram({a, b}, 1.0), ShapeError);
}

TEST_CASE("fbp of a zero sinogram is zero") {
    Sinogram sino = disk_sinogram(0.0, 1, 0, 0, 64, 64, 0.1);
    auto slice = fbp_slice(sino, {}, 64);
    for (double v : slice.v) CHECK(v == 0.0);
}

TEST_CASE("fbp disk phantom: interior mean within 5% at 400 angles") {
    double mu = 0.1, r = 5.0;
    Sinogram sino = disk_sinogram(mu, r, 0, 0, 400, 256, 0.1);
    auto slice = fbp_slice(sino, {}, 256);
    double m = mean_inside(slice, 0, 0, 0.8 * r);
    CHECK(std::abs(m - mu) / mu < 0.05);
}

TEST_CASE("fbp linearity") {
    Sinogram p1 = disk_sinogram(0.1, 4, 1.5, 0, 90, 128, 0.1);
    Sinogram p2 = disk_sinogram(0.2, 2, -2.0, 1.0, 90, 128, 0.1);
    Sinogram mix = p1;
    for (std::size_t i = 0; i < mix.p.size(); ++i)
        mix.p[i] = 2.0 * p1.p[i] + 0.5 * p2.p[i];
    auto r1 = fbp_slice(p1, {}, 128);
    auto r2 = fbp_slice(p2, {}, 128);
    auto rm = fbp_slice(mix, {}, 128);
    for (std::size_t i = 0; i < rm.v.size(); ++i)
        CHECK(std::abs(rm.v[i] - (2.0 * r1.v[i] + 0.5 * r2.v[i])) < 1e-6);
}

TEST_CASE("fbp scaling: doubling mu doubles the reconstruction within 1%") {
    Sinogram s1 = disk_sinogram(0.1, 5, 0, 0, 200, 128, 0.1);
    Sinogram s2 = disk_sinogram(0.2, 5, 0, 0, 200, 128, 0.1);
    auto r1 = fbp_slice(s1, {}, 128);
    auto r2 = fbp_slice(s2, {}, 128);
    double m1 = mean_inside(r1, 0, 0, 4);
    double m2 = mean_inside(r2, 0, 0, 4);
    CHECK(std::abs(m2 - 2 * m1) / (2 * m1) < 0.01);
}

TEST_CASE("fbp insufficient angular coverage") {
    Sinogram sino = disk_sinogram(0.1, 5, 0, 0, 64, 64, 0.1);
    for (auto& a : sino.angles_deg) a *= 0.5; // 90 degree span
    CHECK_THROWS_AS(fbp_slice(sino, {}, 64), InsufficientCoverageError);
    Sinogram one = disk_sinogram(0.1, 5, 0, 0, 1, 64, 0.1);
    CHECK_THROWS_AS(fbp_slice(one, {}, 64), InsufficientCoverageError);
}

TEST_CASE("fbp 800 angles at least as accurate as 400 (RMS vs analytic)") {
    auto rms_err = [](int n_angles) {
        double mu = 0.1, r = 5.0;
        Sinogram sino = disk_sinogram(mu, r, 1.0, -1.0, n_angles, 128, 0.1);
        auto slice = fbp_slice(sino, {}, 128);
        double ctr = (slice.width - 1) / 2.0;
        double sum = 0;
        for (int y = 0; y < slice.height; ++y)
            for (int x = 0; x < slice.width; ++x) {
                double px = (x - ctr) * 0.1 - 1.0, py = (y - ctr) * 0.1 + 1.0;
                double truth = px * px + py * py <= r * r ? mu : 0.0;
                double d = slice.at(x, y) - truth;
                sum += d * d;
            }
        return std::sqrt(sum / slice.v.size());
    };
    CHECK(rms_err(800) <= rms_err(400) + 1e-12);
}

TEST_CASE("fbp rotation covariance (90 degree rotation is index remap)") {
    double mu = 0.1, r = 3.0, x0 = 2.5, y0 = 0.0;
    int n = 128;
    auto ra = fbp_slice(disk_sinogram(mu, r, x0, y0, 360, n, 0.1), {}, n);
    // phantom rotated +90deg about z: (x0, y0) -> (-y0, x0)
    auto rb = fbp_slice(disk_sinogram(mu, r, -y0, x0, 360, n, 0.1), {}, n);
    // rotating the grid +90deg: value at (x, y) moves to (-y, x)
    double worst = 0;
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
            int xr = (n - 1) - y, yr = x; // 90deg index rotation about center
            worst = std::max(worst, std::abs(rb.at(xr, yr) - ra.at(x, y)));
        }
    CHECK(worst < 0.02 * mu * 2); // within interpolation tolerance
}

TEST_CASE("sinogram 360-degree symmetry in the parallel limit") {
    // quasi-parallel simulated cylinder, full turn
    std::vector<TriMesh> scene{tessellate(*csg_sphere(2.0, 48))};
    scene[0].material = {"al", 0.1};
    AcquisitionConfig cfg;
    cfg.count = 16;
    cfg.range_deg = 360;
    cfg.geometry.sod_mm = 5000;
    cfg.geometry.sdd_mm = 5050;
    cfg.geometry.pitch_mm = 0.25;
    cfg.geometry.nx = 33;
    cfg.geometry.ny = 3;
    auto series = simulate_rotation_series(scene, cfg);
    auto rows = to_sinogram(series, cfg.geometry.magnification());
    const Sinogram& s = rows[1];
    for (int a = 0; a < 8; ++a) {
        for (int i = 0; i < s.ns; ++i) {
            double fwd = s.at(a, i);
            double mirrored = s.at(a + 8, s.ns - 1 - i);
            CHECK(std::abs(fwd - mirrored) <= 0.02 * std::max(1.0, std::abs(fwd)) + 1e-3);
        }
    }
}

TEST_CASE("reconstruct_volume: slab phantom density and pore contrast") {
    Material host{"al", 0.1}, air{"air", 0.0};
    auto scene = decompose(*csg_boolean(CsgOp::Difference,
                                        {csg_box({6, 3, 6}, true),
                                         csg_boolean(CsgOp::Union,
                                                     {csg_sphere(1.0, 48)})}),
                           host, air, 48);
    AcquisitionConfig cfg;
    cfg.count = 200;
    cfg.range_deg = 180;
    cfg.geometry.sod_mm = 2000;
    cfg.geometry.sdd_mm = 2100; // quasi-parallel, M = 1.05
    cfg.geometry.pitch_mm = 0.2;
    cfg.geometry.nx = 64;
    cfg.geometry.ny = 6; // central rows only
    auto series = simulate_rotation_series(scene, cfg);
    auto vol = reconstruct_volume(series, {}, cfg.geometry, 0, 2);
    REQUIRE(vol.nz == 6);

    // defect-free comparison volume
    auto plain = decompose(*csg_boolean(CsgOp::Difference,
                                        {csg_box({6, 3, 6}, true),
                                         csg_boolean(CsgOp::Union, {})}),
                           host, air);
    auto vol0 = reconstruct_volume(simulate_rotation_series(plain, cfg), {},
                                   cfg.geometry, 0, 2);

    double ctr = (vol.nx - 1) / 2.0;
    double ds = vol.voxel_mm;
    int z = 3; // central row
    double host_sum = 0, pore_sum = 0, out_max = 0;
    long long host_n = 0, pore_n = 0;
    for (int y = 0; y < vol.ny; ++y) {
        for (int x = 0; x < vol.nx; ++x) {
            double px = (x - ctr) * ds, py = (y - ctr) * ds;
            bool in_slab = std::abs(px) < 2.2 && std::abs(py) < 0.9;
            bool in_pore = px * px + py * py < 0.5 * 0.5;
            if (in_pore) {
                pore_sum += vol.at(x, y, z);
                ++pore_n;
            } else if (in_slab && std::abs(px) > 1.6) {
                host_sum += vol0.at(x, y, z);
                ++host_n;
            }
            if (std::abs(px) > 4.5 || std::abs(py) > 2.2)
                out_max = std::max(out_max, std::abs(vol0.at(x, y, z)));
        }
    }
    double host_mean = host_sum / host_n;
    double pore_mean = pore_sum / pore_n;
    CHECK(std::abs(host_mean - 0.1) / 0.1 < 0.10);
    CHECK(pore_mean < 0.7 * host_mean);
    CHECK(out_max < 0.05 * 0.1); // background noise floor away from edges
}
