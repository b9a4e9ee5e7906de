#pragma once

// Tilted-hexarotor model: rotor geometry, the wrench allocation matrix, the
// control-affine acceleration terms and the rigid-body plant.

#include "indilab/so3.hpp"
#include "indilab/types.hpp"

#include <Eigen/LU>
#include <Eigen/SVD>

#include <array>
#include <cmath>
#include <string>
#include <vector>

namespace indilab {

inline constexpr double kStandardGravity = 9.81;

struct VehicleParams {
    double mass = 0.935;                                        // kg
    Vec3 inertia_diag = Vec3(1.49e-3, 1.71e-3, 2.77e-3);        // kg m^2
    int n_rotors = 6;
    double arm_length = 0.155;                                  // m
    double c_f = 6.7e-5;                                        // N / (rad/s)^2
    double c_t = 1.0e-6;                                        // N m / (rad/s)^2
    double alpha = deg2rad(26.0);                               // radial tilt, rad
    double beta = deg2rad(14.0);                                // tangential tilt, rad
    double gravity = kStandardGravity;                          // m/s^2

    Mat3 inertia() const { return inertia_diag.asDiagonal(); }

    /// Plant with m = m_n (1 + mass_dev) and J = J_n (1 + inertia_dev).
    VehicleParams perturbed(double mass_dev, double inertia_dev) const {
        VehicleParams p = *this;
        p.mass = mass * (1.0 + mass_dev);
        p.inertia_diag = inertia_diag * (1.0 + inertia_dev);
        return p;
    }

    /// Human-readable invariant violations; empty when the parameters are valid.
    std::vector<std::string> violations() const {
        std::vector<std::string> out;
        if (!(mass > 0.0) || !std::isfinite(mass)) out.emplace_back("vehicle.mass: mass must be positive");
        if (!(inertia_diag.minCoeff() > 0.0) || !inertia_diag.allFinite())
            out.emplace_back("vehicle.inertia_diag: inertia must be positive definite");
        if (n_rotors != 6) out.emplace_back("vehicle.n_rotors: only hexarotors (6) are supported");
        if (!(arm_length > 0.0)) out.emplace_back("vehicle.arm_length: arm length must be positive");
        if (!(c_f > 0.0)) out.emplace_back("vehicle.c_f: thrust coefficient must be positive");
        if (!(c_t >= 0.0)) out.emplace_back("vehicle.c_t: torque coefficient must be non-negative");
        if (!std::isfinite(alpha) || !std::isfinite(beta))
            out.emplace_back("vehicle.alpha/beta: tilt angles must be finite");
        if (!(gravity > 0.0)) out.emplace_back("vehicle.gravity: gravity must be positive");
        return out;
    }

    bool operator==(const VehicleParams &) const = default;
};

struct ActuatorUnit {
    Vec3 position;     // body frame, m
    Vec3 thrust_axis;  // unit vector, body frame
    int spin_sign;     // +1 / -1
};

/// Maps signed squared rotor speeds u (rad^2/s^2) to the body wrench [F_b; tau_b].
struct AllocationMatrix {
    Mat6 F;

    auto force_rows() const { return F.topRows<3>(); }
    auto torque_rows() const { return F.bottomRows<3>(); }
    Vec6 wrench(const Vec6 &u) const { return F * u; }
};

struct RigidState {
    Vec3 p = Vec3::Zero();
    Vec3 v = Vec3::Zero();
    Mat3 R = Mat3::Identity();
    Vec3 Omega = Vec3::Zero();
};

/// Numerical rank with threshold 1e-8 * sigma_max.
inline int numerical_rank(const Mat6 &M) {
    Eigen::JacobiSVD<Mat6> svd(M);
    const auto &s = svd.singularValues();
    if (s(0) == 0.0) return 0;
    int rank = 0;
    for (int i = 0; i < s.size(); ++i) {
        if (s(i) > 1e-8 * s(0)) ++rank;
    }
    return rank;
}

inline double condition_number(const Mat6 &M) {
    Eigen::JacobiSVD<Mat6> svd(M);
    const auto &s = svd.singularValues();
    return s(0) / s(s.size() - 1);
}

/// Arm i (0-based) sits at azimuth i * 60 deg. Spin direction and both tilt
/// angles alternate sign from arm to arm, which is what makes the platform
/// fully actuated.
inline std::array<ActuatorUnit, 6> build_geometry(const VehicleParams &params) {
    std::array<ActuatorUnit, 6> units{};
    for (int i = 0; i < 6; ++i) {
        const double gamma = deg2rad(60.0 * i);
        const double sign = (i % 2 == 0) ? 1.0 : -1.0;
        const Mat3 Rz = so3::rot_z(gamma);
        const Vec3 local_axis = so3::rot_y(sign * params.beta) * so3::rot_x(sign * params.alpha) * Vec3::UnitZ();
        units[i].position = params.arm_length * Vec3(std::cos(gamma), std::sin(gamma), 0.0);
        units[i].thrust_axis = Rz * local_axis;
        units[i].spin_sign = static_cast<int>(sign);
    }
    return units;
}

/// Column i: [c_f v_i ; k_i c_t v_i + c_f (p_i x v_i)]. Throws SingularAllocation
/// when the result is not full rank.
inline AllocationMatrix build_allocation(const std::array<ActuatorUnit, 6> &units, const VehicleParams &params) {
    AllocationMatrix alloc;
    for (int i = 0; i < 6; ++i) {
        const auto &au = units[i];
        alloc.F.block<3, 1>(0, i) = params.c_f * au.thrust_axis;
        alloc.F.block<3, 1>(3, i) =
            au.spin_sign * params.c_t * au.thrust_axis + params.c_f * au.position.cross(au.thrust_axis);
    }
    const int rank = numerical_rank(alloc.F);
    if (rank < 6) {
        throw SingularAllocation("allocation matrix has rank " + std::to_string(rank) +
                                 " < 6; the rotor geometry is not fully actuated");
    }
    return alloc;
}

inline AllocationMatrix build_allocation(const VehicleParams &params) {
    return build_allocation(build_geometry(params), params);
}

/// a(x) = [-g e3 ; -J^{-1} (Omega x J Omega)]
inline Vec6 drift_term(const RigidState &x, const VehicleParams &params) {
    Vec6 a;
    a.head<3>() = Vec3(0.0, 0.0, -params.gravity);
    const Vec3 JOmega = params.inertia_diag.cwiseProduct(x.Omega);
    a.tail<3>() = -x.Omega.cross(JOmega).cwiseQuotient(params.inertia_diag);
    return a;
}

/// A(x) = [R F1 / m ; J^{-1} F2]
inline Mat6 decoupling_matrix(const RigidState &x, const VehicleParams &params, const AllocationMatrix &alloc) {
    Mat6 A;
    A.topRows<3>() = x.R * alloc.force_rows() / params.mass;
    A.bottomRows<3>() = params.inertia_diag.cwiseInverse().asDiagonal() * alloc.torque_rows();
    return A;
}

/// Input that produces a pure vertical force m g with zero torque at R = I.
inline Vec6 hover_input(const VehicleParams &params, const AllocationMatrix &alloc) {
    Vec6 wrench = Vec6::Zero();
    wrench(2) = params.mass * params.gravity;
    return alloc.F.partialPivLu().solve(wrench);
}

struct PlantDerivative {
    Vec3 p_dot;
    Vec3 v_dot;
    Vec3 Omega_dot;
};

/// Newton-Euler right-hand side of the true plant.
///   m v_dot     = -m g e3 + R F_b + d_F       (d_F in world frame)
///   J Omega_dot = -Omega x J Omega + tau_b + tau_ext   (tau_ext in body frame)
inline PlantDerivative plant_derivative(const RigidState &x, const Vec6 &u, const Vec3 &d_F, const Vec3 &tau_ext,
                                        const VehicleParams &params, const AllocationMatrix &alloc) {
    const Vec6 w = alloc.F * u;
    PlantDerivative d;
    d.p_dot = x.v;
    d.v_dot = Vec3(0.0, 0.0, -params.gravity) + (x.R * w.head<3>() + d_F) / params.mass;
    const Vec3 JOmega = params.inertia_diag.cwiseProduct(x.Omega);
    d.Omega_dot = (-x.Omega.cross(JOmega) + w.tail<3>() + tau_ext).cwiseQuotient(params.inertia_diag);
    return d;
}

/// Semi-implicit Euler step; the attitude is advanced on SO(3) with the
/// exponential map of the updated body rate.
inline RigidState integrate_step(const RigidState &x, const PlantDerivative &d, double Ts) {
    RigidState next;
    next.v = x.v + d.v_dot * Ts;
    next.p = x.p + next.v * Ts;
    next.Omega = x.Omega + d.Omega_dot * Ts;
    next.R = x.R * so3::exp_map(next.Omega, Ts);
    return next;
}

} // namespace indilab
