#pragma once

// Inversion-based flight control: outer-loop virtual acceleration commands,
// the incremental (INDI) law, the model-based law with a first-order
// disturbance observer (NDI+NDO), and the diagnostics relating the two.

#include "indilab/so3.hpp"
#include "indilab/types.hpp"
#include "indilab/vehicle.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <string>
#include <string_view>

namespace indilab {

/// Diagonal PD gains of the outer loop.
struct Gains {
    Vec3 Kp = Vec3(15.5, 35.0, 16.7);
    Vec3 Kv = Vec3(9.5, 38.0, 13.5);
    Vec3 KR = Vec3(3.2, 3.5, 6.6);
    Vec3 KOmega = Vec3(14.0, 15.0, 26.0);

    bool valid() const {
        return Kp.minCoeff() > 0.0 && Kv.minCoeff() > 0.0 && KR.minCoeff() > 0.0 && KOmega.minCoeff() > 0.0;
    }
    bool operator==(const Gains &) const = default;
};

struct Reference {
    Vec3 p = Vec3::Zero();
    Vec3 v = Vec3::Zero();
    Vec3 a = Vec3::Zero();
    Mat3 R = Mat3::Identity();
    Vec3 Omega = Vec3::Zero();
    Vec3 Omega_dot = Vec3::Zero();
};

/// nu = [a_c ; alpha_c] with
///   a_c     = a_r - Kv e_v - Kp e_p
///   alpha_c = Omega_dot_r - KOmega e_Omega - KR e_R
inline Vec6 virtual_commands(const RigidState &x, const Reference &ref, const Gains &gains) {
    const Vec3 e_p = x.p - ref.p;
    const Vec3 e_v = x.v - ref.v;
    const Vec3 e_R = so3::rotation_error(x.R, ref.R);
    const Vec3 e_Omega = so3::angular_velocity_error(x.Omega, ref.Omega, x.R, ref.R);
    Vec6 nu;
    nu.head<3>() = ref.a - gains.Kv.cwiseProduct(e_v) - gains.Kp.cwiseProduct(e_p);
    nu.tail<3>() = ref.Omega_dot - gains.KOmega.cwiseProduct(e_Omega) - gains.KR.cwiseProduct(e_R);
    return nu;
}

/// Pole of the discrete first-order low-pass G(z) = (1 - a) / (1 - a z^-1).
inline double lowpass_coefficient(double cutoff_hz, double Ts) {
    return std::exp(-2.0 * kPi * cutoff_hz * Ts);
}

/// y_k = (1 - a) x_k + a y_{k-1}, zero-initialised unless seeded.
template <int N> class LowPassFilter {
public:
    using Vector = Eigen::Matrix<double, N, 1>;

    LowPassFilter() = default;
    LowPassFilter(double cutoff_hz, double Ts) : a_(lowpass_coefficient(cutoff_hz, Ts)) {}

    const Vector &step(const Vector &x) {
        y_ = (1.0 - a_) * x + a_ * y_;
        return y_;
    }

    /// Start from steady state at `x` instead of zero.
    void seed(const Vector &x) { y_ = x; }
    void reset() { y_.setZero(); }

    double coefficient() const { return a_; }
    const Vector &output() const { return y_; }

private:
    double a_ = 0.0;
    Vector y_ = Vector::Zero();
};

/// Filtered output derivative and the matching filtered input, as consumed by
/// both control laws at one step.
struct FilteredFeedback {
    Vec6 ydot_f = Vec6::Zero();
    Vec6 u_f = Vec6::Zero();
};

struct FilterSettings {
    double translational_cutoff_hz = 30.0;
    double rotational_cutoff_hz = 60.0;
    /// Start every filter at its first sample rather than at zero.
    bool seed_with_first_sample = true;

    bool operator==(const FilterSettings &) const = default;
};

/// Output-derivative estimator shared by both control laws.
///
/// Translational channel: measured acceleration through the translational
/// low-pass. Rotational channel: gyro through the rotational low-pass, then a
/// backward difference. The previously applied input is pushed through the
/// same filters in wrench space (force rows at the translational cutoff,
/// torque rows at the rotational cutoff) and mapped back through F^{-1}, so
/// ydot_f and u_f always carry identical filter dynamics. The pair handed out
/// at step k is the one computed at step k-1.
class FeedbackFilter {
public:
    FeedbackFilter(const FilterSettings &settings, double Ts, const AllocationMatrix &alloc)
        : Ts_(Ts), seed_(settings.seed_with_first_sample), alloc_(alloc), alloc_lu_(alloc.F),
          accel_(settings.translational_cutoff_hz, Ts), gyro_(settings.rotational_cutoff_hz, Ts),
          force_(settings.translational_cutoff_hz, Ts), torque_(settings.rotational_cutoff_hz, Ts) {}

    /// `accel`, `gyro`: measurements at step k. `u_held`: input applied over
    /// the interval that ends at step k.
    FilteredFeedback step(const Vec3 &accel, const Vec3 &gyro, const Vec6 &u_held) {
        const Vec6 w = alloc_.F * u_held;
        if (!primed_ && seed_) {
            accel_.seed(accel);
            gyro_.seed(gyro);
            force_.seed(w.head<3>());
            torque_.seed(w.tail<3>());
            prev_gyro_f_ = gyro;
            delayed_.ydot_f << accel, Vec3::Zero();
            delayed_.u_f = u_held;
        }
        primed_ = true;

        FilteredFeedback current;
        current.ydot_f.head<3>() = accel_.step(accel);
        const Vec3 &gyro_f = gyro_.step(gyro);
        current.ydot_f.tail<3>() = (gyro_f - prev_gyro_f_) / Ts_;
        prev_gyro_f_ = gyro_f;

        Vec6 w_f;
        w_f << force_.step(w.head<3>()), torque_.step(w.tail<3>());
        current.u_f = alloc_lu_.solve(w_f);

        const FilteredFeedback out = delayed_;
        delayed_ = current;
        return out;
    }

    double translational_coefficient() const { return accel_.coefficient(); }
    double rotational_coefficient() const { return gyro_.coefficient(); }

private:
    double Ts_;
    bool seed_;
    bool primed_ = false;
    AllocationMatrix alloc_;
    Eigen::PartialPivLU<Mat6> alloc_lu_;
    LowPassFilter<3> accel_;
    LowPassFilter<3> gyro_;
    LowPassFilter<3> force_;
    LowPassFilter<3> torque_;
    Vec3 prev_gyro_f_ = Vec3::Zero();
    FilteredFeedback delayed_;
};

/// u_k = u_f + A^{-1} (nu_k - ydot_f)
inline Vec6 indi_update(const Vec6 &u_f, const Vec6 &nu, const Vec6 &ydot_f, const Mat6 &A) {
    return u_f + A.partialPivLu().solve(nu - ydot_f);
}

/// Generalised-force residuals, measured minus modelled (nominal model).
struct Residuals {
    Vec3 force;   // N
    Vec3 torque;  // N m
};

/// r_F   = m ydot_t - (-m g e3 + R F1 u_f)
/// r_tau = J ydot_r - (-Omega x J Omega + F2 u_f)
inline Residuals ndo_residuals(const Vec6 &ydot_f, const Vec6 &u_f, const RigidState &x,
                               const VehicleParams &nominal, const AllocationMatrix &alloc) {
    const Vec6 w = alloc.F * u_f;
    const Vec3 JOmega = nominal.inertia_diag.cwiseProduct(x.Omega);
    Residuals r;
    r.force = nominal.mass * ydot_f.head<3>() -
              (Vec3(0.0, 0.0, -nominal.mass * nominal.gravity) + x.R * w.head<3>());
    r.torque = nominal.inertia_diag.cwiseProduct(ydot_f.tail<3>()) - (-x.Omega.cross(JOmega) + w.tail<3>());
    return r;
}

struct DisturbanceEstimate {
    Vec3 force = Vec3::Zero();   // N, world frame
    Vec3 torque = Vec3::Zero();  // N m, body frame
};

struct ObserverGains {
    double lambda_F = 30.0;    // 1/s
    double lambda_tau = 60.0;  // 1/s

    bool operator==(const ObserverGains &) const = default;
};

/// Forward-Euler step of d_hat' = lambda (r - d_hat) for both branches.
inline DisturbanceEstimate observer_step(const DisturbanceEstimate &d_hat, const Residuals &r,
                                         const ObserverGains &gains, double Ts) {
    DisturbanceEstimate next;
    next.force = d_hat.force + Ts * gains.lambda_F * (r.force - d_hat.force);
    next.torque = d_hat.torque + Ts * gains.lambda_tau * (r.torque - d_hat.torque);
    return next;
}

/// Disturbance estimate expressed in output-derivative units: [d_F / m ; J^{-1} d_tau].
inline Vec6 disturbance_acceleration(const DisturbanceEstimate &d_hat, const VehicleParams &nominal) {
    Vec6 d;
    d << d_hat.force / nominal.mass, d_hat.torque.cwiseQuotient(nominal.inertia_diag);
    return d;
}

/// u = A^{-1} (nu - a(x) - d_hat), with d_hat in output-derivative units.
inline Vec6 ndo_control(const Vec6 &nu, const RigidState &x, const Vec6 &d_hat, const VehicleParams &nominal,
                        const Mat6 &A) {
    return A.partialPivLu().solve(nu - drift_term(x, nominal) - d_hat);
}

/// r_hat = ydot_f - a(x) - A(x) u_f
inline Vec6 incremental_disturbance_estimate(const Vec6 &ydot_f, const Vec6 &a, const Mat6 &A, const Vec6 &u_f) {
    return ydot_f - a - A * u_f;
}

/// u_ndo - u_indi - A^{-1} (r_hat - d_hat). Vanishes up to rounding whenever
/// both laws were evaluated on the same ydot_f, u_f, a(x) and A(x).
inline Vec6 equivalence_gap(const Vec6 &u_ndo, const Vec6 &u_indi, const Mat6 &A, const Vec6 &r_hat,
                            const Vec6 &d_hat) {
    return u_ndo - u_indi - A.partialPivLu().solve(r_hat - d_hat);
}

enum class ControllerKind { Indi, Ndo };

inline std::string_view to_string(ControllerKind kind) {
    return kind == ControllerKind::Indi ? "indi" : "ndo";
}

struct ControllerSettings {
    Gains gains;
    FilterSettings filters;
    ObserverGains observer;
};

/// One closed-loop controller instance (INDI or NDI+NDO) with its own memory.
/// Always uses the nominal model it was constructed with.
class InversionController {
public:
    InversionController(ControllerKind kind, const ControllerSettings &settings, const VehicleParams &nominal,
                        const AllocationMatrix &nominal_alloc, double Ts)
        : kind_(kind), settings_(settings), nominal_(nominal), alloc_(nominal_alloc), Ts_(Ts),
          feedback_(settings.filters, Ts, nominal_alloc) {}

    /// Computes the input for step k from the true state (outer loop) and the
    /// corrupted IMU samples (derivative feedback).
    Vec6 step(const RigidState &x, const Reference &ref, const Vec3 &accel_meas, const Vec3 &gyro_meas) {
        const FilteredFeedback fb = feedback_.step(accel_meas, gyro_meas, u_prev_);
        const Vec6 nu = virtual_commands(x, ref, settings_.gains);
        const Mat6 A = decoupling_matrix(x, nominal_, alloc_);

        Vec6 u;
        if (kind_ == ControllerKind::Indi) {
            u = indi_update(fb.u_f, nu, fb.ydot_f, A);
        } else {
            const Residuals r = ndo_residuals(fb.ydot_f, fb.u_f, x, nominal_, alloc_);
            d_hat_ = observer_step(d_hat_, r, settings_.observer, Ts_);
            const Vec6 d_acc = disturbance_acceleration(d_hat_, nominal_);
            u = ndo_control(nu, x, d_acc, nominal_, A);

            const Vec6 u_indi = indi_update(fb.u_f, nu, fb.ydot_f, A);
            const Vec6 r_hat = incremental_disturbance_estimate(fb.ydot_f, drift_term(x, nominal_), A, fb.u_f);
            const Vec6 gap = equivalence_gap(u, u_indi, A, r_hat, d_acc);
            const double scale = std::max({1.0, u.lpNorm<Eigen::Infinity>(), u_indi.lpNorm<Eigen::Infinity>()});
            max_relative_gap_ = std::max(max_relative_gap_, gap.lpNorm<Eigen::Infinity>() / scale);
        }
        u_prev_ = u;
        return u;
    }

    ControllerKind kind() const { return kind_; }
    const Vec6 &last_input() const { return u_prev_; }
    const DisturbanceEstimate &disturbance_estimate() const { return d_hat_; }
    /// Largest equivalence-gap residual seen so far, relative to max(1, |u|inf).
    /// Only tracked by the NDI+NDO variant.
    double max_relative_gap() const { return max_relative_gap_; }

private:
    ControllerKind kind_;
    ControllerSettings settings_;
    VehicleParams nominal_;
    AllocationMatrix alloc_;
    double Ts_;
    FeedbackFilter feedback_;
    Vec6 u_prev_ = Vec6::Zero();
    DisturbanceEstimate d_hat_;
    double max_relative_gap_ = 0.0;
};

} // namespace indilab
