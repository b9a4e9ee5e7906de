#pragma once

// Stochastic wind with drag coupling, and IMU corruption.

#include "indilab/rng.hpp"
#include "indilab/types.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>

namespace indilab {

struct WindModel {
    std::string name = "no_wind";
    Vec3 mu = Vec3::Zero();      // m/s, world frame
    Mat3 sigma = Mat3::Zero();   // (m/s)^2
    Mat3 D = Mat3::Zero();       // N s / m

    bool operator==(const WindModel &) const = default;
};

struct SensorModel {
    std::string name = "ideal";
    double accel_bias = 0.0;  // m/s^2, same on every axis
    double accel_var = 0.0;   // (m/s^2)^2
    double gyro_bias = 0.0;   // rad/s
    double gyro_var = 0.0;    // (rad/s)^2

    bool stochastic() const { return accel_var > 0.0 || gyro_var > 0.0; }
    bool operator==(const SensorModel &) const = default;
};

/// Square-root factor L with L L^T = sigma. Cholesky when sigma is positive
/// definite; otherwise a symmetric eigen-decomposition with eigenvalues
/// clipped at zero, accepted only if no eigenvalue is meaningfully negative.
inline Mat3 covariance_factor(const Mat3 &sigma) {
    if (!sigma.allFinite() || (sigma - sigma.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + sigma.cwiseAbs().maxCoeff())) {
        throw CovarianceNotPSD("wind covariance must be finite and symmetric");
    }
    Eigen::LLT<Mat3> llt(sigma);
    if (llt.info() == Eigen::Success) {
        return llt.matrixL();
    }
    Eigen::SelfAdjointEigenSolver<Mat3> eig(sigma);
    if (eig.info() != Eigen::Success) {
        throw CovarianceNotPSD("wind covariance: eigen-decomposition failed");
    }
    const Vec3 lambda = eig.eigenvalues();
    const double tol = 1e-12 * std::max(1.0, lambda.cwiseAbs().maxCoeff());
    if (lambda.minCoeff() < -tol) {
        throw CovarianceNotPSD("wind covariance has a negative eigenvalue " + std::to_string(lambda.minCoeff()));
    }
    return eig.eigenvectors() * lambda.cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

/// One draw of mu + L z, z ~ N(0, I).
inline Vec3 sample_wind(const WindModel &model, const Mat3 &factor, NormalStream &rng) {
    Vec3 z;
    z.x() = rng.normal();
    z.y() = rng.normal();
    z.z() = rng.normal();
    return model.mu + factor * z;
}

/// Wind velocity resampled every `steps_per_update` simulation steps and held
/// in between.
class WindProcess {
public:
    WindProcess(WindModel model, double update_hz, double Ts, std::uint64_t seed)
        : model_(std::move(model)), factor_(covariance_factor(model_.sigma)), rng_(seed),
          steps_per_update_(std::max<long>(1, std::lround(1.0 / (update_hz * Ts)))) {}

    const Vec3 &at_step(long k) {
        if (k % steps_per_update_ == 0 || !initialised_) {
            current_ = sample_wind(model_, factor_, rng_);
            initialised_ = true;
        }
        return current_;
    }

    const WindModel &model() const { return model_; }

private:
    WindModel model_;
    Mat3 factor_;
    NormalStream rng_;
    long steps_per_update_;
    bool initialised_ = false;
    Vec3 current_ = Vec3::Zero();
};

struct WindWrench {
    Vec3 force;   // d_F, world frame, N
    Vec3 torque;  // tau_ext, body frame, N m
};

/// d_F = -D (v - v_wind); the torque is that force, rotated into the body
/// frame, acting at `cop_offset` from the centre of mass.
inline WindWrench wind_wrench(const Vec3 &v, const Vec3 &v_wind, const Mat3 &D, const Vec3 &cop_offset,
                              const Mat3 &R) {
    WindWrench w;
    w.force = -D * (v - v_wind);
    w.torque = cop_offset.cross(R.transpose() * w.force);
    return w;
}

struct ImuSample {
    Vec3 accel;
    Vec3 gyro;
};

/// Adds per-axis bias plus white Gaussian noise. Always consumes six normal
/// variates (accel x, y, z then gyro x, y, z).
inline ImuSample corrupt_measurements(const Vec3 &true_accel, const Vec3 &true_gyro, const SensorModel &model,
                                      NormalStream &rng) {
    const double sa = std::sqrt(model.accel_var);
    const double sg = std::sqrt(model.gyro_var);
    ImuSample out;
    for (int i = 0; i < 3; ++i) out.accel(i) = true_accel(i) + model.accel_bias + sa * rng.normal();
    for (int i = 0; i < 3; ++i) out.gyro(i) = true_gyro(i) + model.gyro_bias + sg * rng.normal();
    return out;
}

} // namespace indilab
