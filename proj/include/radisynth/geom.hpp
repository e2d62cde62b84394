#pragma once
#include <array>
#include <cmath>
#include <limits>

namespace radisynth {

inline constexpr double kPi = 3.14159265358979323846;

inline double deg2rad(double d) { return d * kPi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / kPi; }

struct Vec3 {
    double x = 0, y = 0, z = 0;

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator-() const { return {-x, -y, -z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
    Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }

    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    Vec3 cross(const Vec3& o) const {
        return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
    }
    double norm() const { return std::sqrt(dot(*this)); }
    Vec3 normalized() const { return *this / norm(); }
    // component-wise product
    Vec3 cwise(const Vec3& o) const { return {x * o.x, y * o.y, z * o.z}; }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }

// Row-major 3x3 matrix; enough for rotations and linear parts of transforms.
struct Mat3 {
    std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

    static Mat3 identity() { return {}; }

    static Mat3 rot_x(double deg) {
        double c = std::cos(deg2rad(deg)), s = std::sin(deg2rad(deg));
        return {{1, 0, 0, 0, c, -s, 0, s, c}};
    }
    static Mat3 rot_y(double deg) {
        double c = std::cos(deg2rad(deg)), s = std::sin(deg2rad(deg));
        return {{c, 0, s, 0, 1, 0, -s, 0, c}};
    }
    static Mat3 rot_z(double deg) {
        double c = std::cos(deg2rad(deg)), s = std::sin(deg2rad(deg));
        return {{c, -s, 0, s, c, 0, 0, 0, 1}};
    }
    // Euler XYZ intrinsic, degrees.
    static Mat3 euler_xyz(const Vec3& deg) {
        return rot_x(deg.x) * rot_y(deg.y) * rot_z(deg.z);
    }
    static Mat3 scale(const Vec3& s) {
        return {{s.x, 0, 0, 0, s.y, 0, 0, 0, s.z}};
    }

    Mat3 operator*(const Mat3& o) const {
        Mat3 r;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                double a = 0;
                for (int k = 0; k < 3; ++k) a += m[i * 3 + k] * o.m[k * 3 + j];
                r.m[i * 3 + j] = a;
            }
        return r;
    }
    Vec3 operator*(const Vec3& v) const {
        return {m[0] * v.x + m[1] * v.y + m[2] * v.z,
                m[3] * v.x + m[4] * v.y + m[5] * v.z,
                m[6] * v.x + m[7] * v.y + m[8] * v.z};
    }
    Mat3 transposed() const {
        return {{m[0], m[3], m[6], m[1], m[4], m[7], m[2], m[5], m[8]}};
    }
    double det() const {
        return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
               m[2] * (m[3] * m[7] - m[4] * m[6]);
    }
};

// scale -> rotate (Euler XYZ intrinsic, degrees) -> translate
struct Transform {
    Vec3 translation{0, 0, 0};
    Vec3 rotation_deg{0, 0, 0};
    Vec3 scale{1, 1, 1};

    Vec3 apply(const Vec3& p) const {
        return Mat3::euler_xyz(rotation_deg) * p.cwise(scale) + translation;
    }
    // linear part only (for directions / volume scaling)
    Mat3 linear() const { return Mat3::euler_xyz(rotation_deg) * Mat3::scale(scale); }
    Vec3 apply_inverse(const Vec3& p) const {
        Vec3 q = Mat3::euler_xyz(rotation_deg).transposed() * (p - translation);
        return {q.x / scale.x, q.y / scale.y, q.z / scale.z};
    }
};

struct Aabb {
    Vec3 lo{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
            std::numeric_limits<double>::infinity()};
    Vec3 hi{-std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(),
            -std::numeric_limits<double>::infinity()};

    void expand(const Vec3& p) {
        lo.x = std::min(lo.x, p.x); lo.y = std::min(lo.y, p.y); lo.z = std::min(lo.z, p.z);
        hi.x = std::max(hi.x, p.x); hi.y = std::max(hi.y, p.y); hi.z = std::max(hi.z, p.z);
    }
    bool valid() const { return lo.x <= hi.x; }
    Vec3 center() const { return (lo + hi) * 0.5; }
    double diameter() const { return valid() ? (hi - lo).norm() : 0.0; }

    // slab test; inv_dir may contain infinities for axis-parallel rays
    bool hit_ray(const Vec3& origin, const Vec3& inv_dir) const {
        double tmin = -std::numeric_limits<double>::infinity();
        double tmax = std::numeric_limits<double>::infinity();
        const double o[3] = {origin.x, origin.y, origin.z};
        const double id[3] = {inv_dir.x, inv_dir.y, inv_dir.z};
        const double l[3] = {lo.x, lo.y, lo.z};
        const double h[3] = {hi.x, hi.y, hi.z};
        for (int a = 0; a < 3; ++a) {
            if (std::isinf(id[a])) {
                if (o[a] < l[a] || o[a] > h[a]) return false;
                continue;
            }
            double t0 = (l[a] - o[a]) * id[a];
            double t1 = (h[a] - o[a]) * id[a];
            if (t0 > t1) std::swap(t0, t1);
            tmin = std::max(tmin, t0);
            tmax = std::min(tmax, t1);
            if (tmin > tmax) return false;
        }
        return tmax >= 0;
    }
};

} // namespace radisynth
