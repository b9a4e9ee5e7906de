#pragma once

// Rotation-group helpers. Attitudes are plain 3x3 rotation matrices mapping
// body coordinates to world coordinates; no quaternions anywhere.

#include "indilab/types.hpp"

#include <cmath>

namespace indilab::so3 {

/// Skew-symmetric matrix with hat(v) * w == v.cross(w).
inline Mat3 hat(const Vec3 &v) {
    Mat3 S;
    S << 0.0, -v.z(), v.y(),
         v.z(), 0.0, -v.x(),
         -v.y(), v.x(), 0.0;
    return S;
}

/// Inverse of hat(). Throws NotSkew when ||M + M^T||_F > 1e-9.
inline Vec3 vee(const Mat3 &M) {
    if ((M + M.transpose()).norm() > 1e-9) {
        throw NotSkew("vee: matrix is not skew-symmetric");
    }
    return Vec3(M(2, 1), M(0, 2), M(1, 0));
}

inline Mat3 rot_x(double angle) {
    const double c = std::cos(angle), s = std::sin(angle);
    Mat3 R;
    R << 1.0, 0.0, 0.0,
         0.0, c, -s,
         0.0, s, c;
    return R;
}

inline Mat3 rot_y(double angle) {
    const double c = std::cos(angle), s = std::sin(angle);
    Mat3 R;
    R << c, 0.0, s,
         0.0, 1.0, 0.0,
         -s, 0.0, c;
    return R;
}

inline Mat3 rot_z(double angle) {
    const double c = std::cos(angle), s = std::sin(angle);
    Mat3 R;
    R << c, -s, 0.0,
         s, c, 0.0,
         0.0, 0.0, 1.0;
    return R;
}

/// Rotation reached after spinning at body rate `omega` for `dt` seconds.
///
/// Rodrigues' formula for angles >= 1e-6 rad, a second-order series below
/// that, and the identity below 1e-12 rad. With Ts = 1e-4 the series branch
/// is the common case for slow attitude motion.
inline Mat3 exp_map(const Vec3 &omega, double dt) {
    const Vec3 phi = omega * dt;
    const double theta = phi.norm();
    if (theta < 1e-12) {
        return Mat3::Identity();
    }
    const Mat3 K = hat(phi);
    if (theta < 1e-6) {
        return Mat3::Identity() + K + 0.5 * K * K;
    }
    const double a = std::sin(theta) / theta;
    const double b = (1.0 - std::cos(theta)) / (theta * theta);
    return Mat3::Identity() + a * K + b * K * K;
}

/// e_R = 1/2 (R_r^T R - R^T R_r)^vee
inline Vec3 rotation_error(const Mat3 &R, const Mat3 &R_ref) {
    const Mat3 E = R_ref.transpose() * R - R.transpose() * R_ref;
    return 0.5 * Vec3(E(2, 1), E(0, 2), E(1, 0));
}

/// e_Omega = Omega - R^T R_r Omega_r
inline Vec3 angular_velocity_error(const Vec3 &omega, const Vec3 &omega_ref, const Mat3 &R,
                                   const Mat3 &R_ref) {
    return omega - R.transpose() * R_ref * omega_ref;
}

/// ||R^T R - I||_F
inline double orthogonality_error(const Mat3 &R) {
    return (R.transpose() * R - Mat3::Identity()).norm();
}

inline bool is_rotation(const Mat3 &R, double tol = 1e-9) {
    return orthogonality_error(R) <= tol && std::abs(R.determinant() - 1.0) <= tol;
}

} // namespace indilab::so3
