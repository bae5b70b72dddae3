#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace pw {

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    Vec3() = default;
    Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
    Vec3 operator-() const { return {-x, -y, -z}; }
    Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
    Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
    Vec3& operator*=(double s) { x *= s; y *= s; z *= s; return *this; }
    bool operator==(const Vec3& o) const { return x == o.x && y == o.y && z == o.z; }

    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    Vec3 cross(const Vec3& o) const {
        return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
    }
    double norm2() const { return x * x + y * y + z * z; }
    double norm() const { return std::sqrt(norm2()); }
    bool finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }

struct Vec2 {
    double x = 0.0, y = 0.0;

    Vec2() = default;
    Vec2(double x_, double y_) : x(x_), y(y_) {}

    Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    Vec2& operator+=(const Vec2& o) { x += o.x; y += o.y; return *this; }
    double dot(const Vec2& o) const { return x * o.x + y * o.y; }
    // z-component of the 2D cross product.
    double cross(const Vec2& o) const { return x * o.y - y * o.x; }
    double norm2() const { return x * x + y * y; }
    double norm() const { return std::sqrt(norm2()); }
};

// An ordered set of 3D points (positions in meters).
using PointSet = std::vector<Vec3>;

// Per-particle 3D deltas paired with an embodiment particle set.
using DisplacementField = std::vector<Vec3>;

// 3x3 rotation, row-major.
struct Mat3 {
    double m[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};

    static Mat3 identity() { return {}; }

    // Rodrigues rotation about a unit axis.
    static Mat3 axis_angle(const Vec3& axis, double angle) {
        const double c = std::cos(angle), s = std::sin(angle), t = 1.0 - c;
        const double ax = axis.x, ay = axis.y, az = axis.z;
        Mat3 r;
        r.m[0][0] = t * ax * ax + c;
        r.m[0][1] = t * ax * ay - s * az;
        r.m[0][2] = t * ax * az + s * ay;
        r.m[1][0] = t * ax * ay + s * az;
        r.m[1][1] = t * ay * ay + c;
        r.m[1][2] = t * ay * az - s * ax;
        r.m[2][0] = t * ax * az - s * ay;
        r.m[2][1] = t * ay * az + s * ax;
        r.m[2][2] = t * az * az + c;
        return r;
    }

    static Mat3 rot_z(double angle) { return axis_angle({0, 0, 1}, angle); }

    Vec3 apply(const Vec3& v) const {
        return {m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
                m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
                m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z};
    }

    Mat3 mul(const Mat3& o) const {
        Mat3 r;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                double s = 0.0;
                for (int k = 0; k < 3; ++k) s += m[i][k] * o.m[k][j];
                r.m[i][j] = s;
            }
        return r;
    }
};

// Rigid transform: rotation followed by translation.
struct Transform {
    Mat3 rot;
    Vec3 trans;

    static Transform identity() { return {}; }

    Vec3 apply(const Vec3& v) const { return rot.apply(v) + trans; }

    Transform compose(const Transform& o) const {
        // this * o: apply o first, then this.
        return {rot.mul(o.rot), rot.apply(o.trans) + trans};
    }
};

}  // namespace pw
