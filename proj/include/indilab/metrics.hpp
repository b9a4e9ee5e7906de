#pragma once

// Tracking and actuation metrics over full-rate (Ts-spaced) series. All time
// integrals use the rectangle rule: sample i stands for [i Ts, (i+1) Ts).

#include "indilab/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace indilab {

struct MetricRecord {
    double rms_p = 0.0;          // m
    double rms_R = 0.0;          // ||e_R||, dimensionless
    double rms_R_deg = 0.0;      // geodesic angle asin(||e_R||), deg
    double rms_p_ss = 0.0;
    double rms_R_ss = 0.0;
    double rms_R_ss_deg = 0.0;
    double energy = 0.0;         // integral of ||w_u||^2
    double wrench_diff_rms = std::numeric_limits<double>::quiet_NaN();  // only for twin runs
    bool diverged = false;
};

namespace detail {

inline std::pair<std::size_t, std::size_t> window(std::size_t n, double Ts, double t_start, double t_end) {
    const auto first = static_cast<std::size_t>(std::max(0.0, std::ceil(t_start / Ts - 1e-9)));
    const auto last = std::min(n, static_cast<std::size_t>(std::max(0.0, std::ceil(t_end / Ts - 1e-9))));
    if (!(t_start < t_end) || first >= last) {
        throw EmptyWindow("metric window [" + std::to_string(t_start) + ", " + std::to_string(t_end) +
                          ") contains no samples");
    }
    return {first, last};
}

} // namespace detail

/// sqrt(1/(t_end - t_start) * integral ||e||^2 dt) over samples with t_i in [t_start, t_end).
inline double rms_error(std::span<const Vec3> series, double Ts, double t_start, double t_end) {
    const auto [first, last] = detail::window(series.size(), Ts, t_start, t_end);
    double acc = 0.0;
    for (std::size_t i = first; i < last; ++i) acc += series[i].squaredNorm();
    return std::sqrt(acc / static_cast<double>(last - first));
}

/// RMS of the geodesic attitude angle asin(min(||e_R||, 1)), in degrees.
inline double rms_angle_deg(std::span<const Vec3> e_R, double Ts, double t_start, double t_end) {
    const auto [first, last] = detail::window(e_R.size(), Ts, t_start, t_end);
    double acc = 0.0;
    for (std::size_t i = first; i < last; ++i) {
        const double angle = std::asin(std::min(1.0, e_R[i].norm()));
        acc += angle * angle;
    }
    return rad2deg(std::sqrt(acc / static_cast<double>(last - first)));
}

/// sqrt(1/T * integral ||w_a - w_b||^2 dt)
inline double wrench_diff_rms(std::span<const Vec6> a, std::span<const Vec6> b, double Ts) {
    if (a.size() != b.size()) {
        throw LengthMismatch("wrench series lengths differ: " + std::to_string(a.size()) + " vs " +
                             std::to_string(b.size()));
    }
    if (a.empty()) throw EmptyWindow("wrench series are empty");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]).squaredNorm();
    const double T = static_cast<double>(a.size()) * Ts;
    return std::sqrt(acc * Ts / T);
}

/// integral ||w||^2 dt
inline double control_energy(std::span<const Vec6> w, double Ts) {
    double acc = 0.0;
    for (const auto &wi : w) acc += wi.squaredNorm();
    return acc * Ts;
}

/// Full-rate signals of one closed loop needed by the metrics.
struct MetricSeries {
    std::vector<Vec3> e_p;
    std::vector<Vec3> e_R;
    std::vector<Vec6> wrench;
};

inline MetricRecord compute_metrics(const MetricSeries &s, double Ts, double t_ss) {
    MetricRecord m;
    const double T = static_cast<double>(s.e_p.size()) * Ts;
    m.rms_p = rms_error(s.e_p, Ts, 0.0, T);
    m.rms_R = rms_error(s.e_R, Ts, 0.0, T);
    m.rms_R_deg = rms_angle_deg(s.e_R, Ts, 0.0, T);
    m.rms_p_ss = rms_error(s.e_p, Ts, t_ss, T);
    m.rms_R_ss = rms_error(s.e_R, Ts, t_ss, T);
    m.rms_R_ss_deg = rms_angle_deg(s.e_R, Ts, t_ss, T);
    m.energy = control_energy(s.wrench, Ts);
    return m;
}

struct MetricSummary {
    MetricRecord mean;
    std::size_t n_runs = 0;
    std::size_t n_diverged = 0;
};

/// Arithmetic mean of every metric over the non-diverged records.
inline MetricSummary summarize(std::span<const MetricRecord> records) {
    MetricSummary s;
    s.n_runs = records.size();
    std::size_t n = 0, n_wd = 0;
    MetricRecord acc;
    acc.wrench_diff_rms = 0.0;
    for (const auto &r : records) {
        if (r.diverged) {
            ++s.n_diverged;
            continue;
        }
        ++n;
        acc.rms_p += r.rms_p;
        acc.rms_R += r.rms_R;
        acc.rms_R_deg += r.rms_R_deg;
        acc.rms_p_ss += r.rms_p_ss;
        acc.rms_R_ss += r.rms_R_ss;
        acc.rms_R_ss_deg += r.rms_R_ss_deg;
        acc.energy += r.energy;
        if (!std::isnan(r.wrench_diff_rms)) {
            acc.wrench_diff_rms += r.wrench_diff_rms;
            ++n_wd;
        }
    }
    if (n == 0) {
        const double nan = std::numeric_limits<double>::quiet_NaN();
        s.mean = MetricRecord{nan, nan, nan, nan, nan, nan, nan, nan, true};
        return s;
    }
    const double inv = 1.0 / static_cast<double>(n);
    s.mean.rms_p = acc.rms_p * inv;
    s.mean.rms_R = acc.rms_R * inv;
    s.mean.rms_R_deg = acc.rms_R_deg * inv;
    s.mean.rms_p_ss = acc.rms_p_ss * inv;
    s.mean.rms_R_ss = acc.rms_R_ss * inv;
    s.mean.rms_R_ss_deg = acc.rms_R_ss_deg * inv;
    s.mean.energy = acc.energy * inv;
    s.mean.wrench_diff_rms = n_wd > 0 ? acc.wrench_diff_rms / static_cast<double>(n_wd)
                                      : std::numeric_limits<double>::quiet_NaN();
    return s;
}

} // namespace indilab
