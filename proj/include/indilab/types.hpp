#pragma once

// Common fixed-size linear-algebra aliases and the error hierarchy shared by
// every indilab module.

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <Eigen/LU>

#include <stdexcept>
#include <string>

namespace indilab {

using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat3 = Eigen::Matrix3d;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Mat36 = Eigen::Matrix<double, 3, 6>;

inline constexpr double kPi = 3.14159265358979323846;

inline constexpr double deg2rad(double deg) { return deg * kPi / 180.0; }
inline constexpr double rad2deg(double rad) { return rad * 180.0 / kPi; }

/// Base class of all errors raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A matrix passed to vee() is not skew-symmetric.
class NotSkew : public Error {
public:
    using Error::Error;
};

/// The rotor geometry does not produce a full-rank allocation matrix.
class SingularAllocation : public Error {
public:
    using Error::Error;
};

/// A wind covariance is neither positive definite nor positive semi-definite.
class CovarianceNotPSD : public Error {
public:
    using Error::Error;
};

/// The closed loop left the admissible state envelope.
class DivergedState : public Error {
public:
    using Error::Error;
};

/// A metric window contains no samples.
class EmptyWindow : public Error {
public:
    using Error::Error;
};

/// Two series that must be aligned have different lengths.
class LengthMismatch : public Error {
public:
    using Error::Error;
};

/// Invalid configuration value; the message names the offending field.
class ConfigError : public Error {
public:
    using Error::Error;
};

} // namespace indilab
