#pragma once

#include <cmath>

namespace df {

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  Vec3 operator-() const { return {-x, -y, -z}; }

  double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  Vec3 cross(const Vec3& o) const {
    return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
  }
  double norm() const { return std::sqrt(dot(*this)); }
  Vec3 normalized() const {
    double n = norm();
    return n > 0.0 ? Vec3{x / n, y / n, z / n} : Vec3{};
  }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }

// Unit quaternion, (w, x, y, z) storage.
struct Quat {
  double w = 1.0, x = 0.0, y = 0.0, z = 0.0;

  static Quat identity() { return {}; }

  static Quat from_axis_angle(const Vec3& axis, double angle) {
    Vec3 a = axis.normalized();
    double h = 0.5 * angle;
    double s = std::sin(h);
    return {std::cos(h), a.x * s, a.y * s, a.z * s};
  }

  double norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }

  Quat normalized() const {
    double n = norm();
    return {w / n, x / n, y / n, z / n};
  }

  double dot(const Quat& o) const { return w * o.w + x * o.x + y * o.y + z * o.z; }

  Quat operator*(const Quat& o) const {
    return {w * o.w - x * o.x - y * o.y - z * o.z,
            w * o.x + x * o.w + y * o.z - z * o.y,
            w * o.y - x * o.z + y * o.w + z * o.x,
            w * o.z + x * o.y - y * o.x + z * o.w};
  }

  Quat conjugate() const { return {w, -x, -y, -z}; }

  Vec3 rotate(const Vec3& v) const {
    // q v q*
    Quat p{0.0, v.x, v.y, v.z};
    Quat r = (*this) * p * conjugate();
    return {r.x, r.y, r.z};
  }
};

// Geodesic angle between two unit quaternions, in [0, pi]. Sign-insensitive
// (q and -q describe the same rotation).
inline double quat_angle(const Quat& a, const Quat& b) {
  double d = std::fabs(a.dot(b));
  if (d > 1.0) d = 1.0;
  return 2.0 * std::acos(d);
}

// Rotation taking camera-frame axes (+z forward, +x right, +y down) to world
// axes such that the camera at `eye` looks at `target`. `up_hint` breaks the
// roll ambiguity; a fallback axis is used when the view is parallel to it.
inline Quat look_at_rotation(const Vec3& eye, const Vec3& target, const Vec3& up_hint) {
  Vec3 fwd = (target - eye).normalized();
  Vec3 up = up_hint.normalized();
  if (std::fabs(fwd.dot(up)) > 0.999) up = Vec3{0.0, 1.0, 0.0};
  Vec3 right = fwd.cross(up).normalized();
  Vec3 down = fwd.cross(right);
  // Column-major rotation matrix [right, down, fwd] -> quaternion.
  double m00 = right.x, m01 = down.x, m02 = fwd.x;
  double m10 = right.y, m11 = down.y, m12 = fwd.y;
  double m20 = right.z, m21 = down.z, m22 = fwd.z;
  double tr = m00 + m11 + m22;
  Quat q;
  if (tr > 0.0) {
    double s = std::sqrt(tr + 1.0) * 2.0;
    q = {0.25 * s, (m21 - m12) / s, (m02 - m20) / s, (m10 - m01) / s};
  } else if (m00 > m11 && m00 > m22) {
    double s = std::sqrt(1.0 + m00 - m11 - m22) * 2.0;
    q = {(m21 - m12) / s, 0.25 * s, (m01 + m10) / s, (m02 + m20) / s};
  } else if (m11 > m22) {
    double s = std::sqrt(1.0 + m11 - m00 - m22) * 2.0;
    q = {(m02 - m20) / s, (m01 + m10) / s, 0.25 * s, (m12 + m21) / s};
  } else {
    double s = std::sqrt(1.0 + m22 - m00 - m11) * 2.0;
    q = {(m10 - m01) / s, (m02 + m20) / s, (m12 + m21) / s, 0.25 * s};
  }
  return q.normalized();
}

}  // namespace df
