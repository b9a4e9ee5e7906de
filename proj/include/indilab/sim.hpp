#pragma once

// Closed-loop simulation: reference generation, scenarios, the fixed-step
// episode runner and the Monte Carlo campaign driver.

#include "indilab/control.hpp"
#include "indilab/environment.hpp"
#include "indilab/metrics.hpp"
#include "indilab/rng.hpp"
#include "indilab/so3.hpp"
#include "indilab/vehicle.hpp"

#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace indilab {

struct LissajousParams {
    double Ax = 1.0;             // m
    double Ay = 0.7;             // m
    double ax = 1.0;             // rad/s
    double ay = 2.0;             // rad/s
    double delta_x = kPi / 3.0;  // rad
    double z0 = 0.8;             // m

    bool operator==(const LissajousParams &) const = default;
};

/// Planar Lissajous position reference with analytic derivatives and a
/// constant identity attitude reference.
inline Reference lissajous_reference(double t, const LissajousParams &lp = {}) {
    Reference r;
    const double sx = std::sin(lp.ax * t + lp.delta_x), cx = std::cos(lp.ax * t + lp.delta_x);
    const double sy = std::sin(lp.ay * t), cy = std::cos(lp.ay * t);
    r.p = Vec3(lp.Ax * sx, lp.Ay * sy, lp.z0);
    r.v = Vec3(lp.Ax * lp.ax * cx, lp.Ay * lp.ay * cy, 0.0);
    r.a = Vec3(-lp.Ax * lp.ax * lp.ax * sx, -lp.Ay * lp.ay * lp.ay * sy, 0.0);
    return r;
}

struct Scenario {
    std::string name;
    double mass_dev = 0.0;     // relative
    double inertia_dev = 0.0;  // relative
    WindModel wind;
    SensorModel sensors;
    int n_reps = 20;

    /// Any random ingredient (sensor noise or wind variability).
    bool stochastic() const { return sensors.stochastic() || wind.sigma.cwiseAbs().maxCoeff() > 0.0; }
    int repetitions() const { return stochastic() ? n_reps : 1; }
};

/// Everything that is the same for every scenario of a campaign.
struct Platform {
    VehicleParams nominal;
    ControllerSettings controller;
    LissajousParams reference;
};

struct SimSettings {
    double Ts = 1e-4;
    double duration = 10.0;
    double t_ss = 2.5;
    RigidState initial{Vec3(1.0, 0.2, 0.1), Vec3::Zero(), Mat3::Identity(), Vec3::Zero()};
    double wind_update_hz = 100.0;
    Vec3 cop_offset = Vec3(0.0, 0.0, 0.05);  // m, body frame
    int decimation = 10;
    double divergence_limit = 1e6;

    long steps() const { return std::lround(duration / Ts); }
};

enum class ControllerMode { Indi, Ndo, Both };

inline std::string_view to_string(ControllerMode mode) {
    switch (mode) {
    case ControllerMode::Indi: return "indi";
    case ControllerMode::Ndo: return "ndo";
    case ControllerMode::Both: return "both";
    }
    return "?";
}

struct TraceSample {
    double t;
    Vec3 p, p_ref, e_p;
    double e_R_norm;
    Vec6 u, wrench;
    Vec3 d_F;
};

struct LoopLog {
    ControllerKind kind = ControllerKind::Indi;
    MetricSeries series;               // full rate
    std::vector<TraceSample> trace;    // every `decimation`-th step
    bool diverged = false;
    std::string divergence_reason;
    RigidState final_state;
    double max_orthogonality_error = 0.0;
    double max_relative_gap = 0.0;     // NDI+NDO loops only
};

struct RunLog {
    std::string scenario;
    ControllerMode mode = ControllerMode::Both;
    std::uint64_t seed = 0;
    double Ts = 0.0;
    int decimation = 1;
    std::vector<LoopLog> loops;

    const LoopLog *loop(ControllerKind kind) const {
        for (const auto &l : loops)
            if (l.kind == kind) return &l;
        return nullptr;
    }
};

namespace detail {

inline bool within_envelope(const RigidState &x, double limit) {
    auto ok = [limit](const auto &m) { return m.allFinite() && m.cwiseAbs().maxCoeff() <= limit; };
    return ok(x.p) && ok(x.v) && ok(x.R) && ok(x.Omega);
}

struct LiveLoop {
    LoopLog log;
    InversionController controller;
    RigidState x;
    Vec6 u_prev = Vec6::Zero();
};

} // namespace detail

/// Runs one episode. The plant uses the scenario's perturbed mass and
/// inertia; every controller uses the nominal model. In Both mode the two
/// loops see the same wind and sensor-noise realisation.
inline RunLog run_episode(const Scenario &scenario, const SimSettings &cfg, const Platform &platform,
                          ControllerMode mode, std::uint64_t seed) {
    const VehicleParams &nominal = platform.nominal;
    const VehicleParams plant = nominal.perturbed(scenario.mass_dev, scenario.inertia_dev);
    const AllocationMatrix nominal_alloc = build_allocation(nominal);
    const AllocationMatrix plant_alloc = build_allocation(plant);

    RunLog log;
    log.scenario = scenario.name;
    log.mode = mode;
    log.seed = seed;
    log.Ts = cfg.Ts;
    log.decimation = cfg.decimation;

    std::vector<ControllerKind> kinds;
    if (mode != ControllerMode::Ndo) kinds.push_back(ControllerKind::Indi);
    if (mode != ControllerMode::Indi) kinds.push_back(ControllerKind::Ndo);

    const long n_steps = cfg.steps();
    std::vector<detail::LiveLoop> loops;
    loops.reserve(kinds.size());
    for (auto kind : kinds) {
        detail::LiveLoop l{LoopLog{}, InversionController(kind, platform.controller, nominal, nominal_alloc, cfg.Ts),
                           cfg.initial};
        l.log.kind = kind;
        l.log.series.e_p.reserve(n_steps);
        l.log.series.e_R.reserve(n_steps);
        l.log.series.wrench.reserve(n_steps);
        l.log.trace.reserve(n_steps / cfg.decimation + 1);
        loops.push_back(std::move(l));
    }

    WindProcess wind(scenario.wind, cfg.wind_update_hz, cfg.Ts, mix64(seed ^ 0x1ULL));
    NormalStream noise(mix64(seed ^ 0x2ULL));

    for (long k = 0; k < n_steps; ++k) {
        const double t = static_cast<double>(k) * cfg.Ts;
        const Reference ref = lissajous_reference(t, platform.reference);
        const Vec3 v_wind = wind.at_step(k);
        const ImuSample offsets = corrupt_measurements(Vec3::Zero(), Vec3::Zero(), scenario.sensors, noise);

        for (auto &l : loops) {
            if (l.log.diverged) continue;
            const WindWrench ww = wind_wrench(l.x.v, v_wind, scenario.wind.D, cfg.cop_offset, l.x.R);
            const PlantDerivative held = plant_derivative(l.x, l.u_prev, ww.force, ww.torque, plant, plant_alloc);
            const Vec3 accel = held.v_dot + offsets.accel;
            const Vec3 gyro = l.x.Omega + offsets.gyro;

            const Vec6 u = l.controller.step(l.x, ref, accel, gyro);
            const PlantDerivative deriv = plant_derivative(l.x, u, ww.force, ww.torque, plant, plant_alloc);

            const Vec3 e_p = l.x.p - ref.p;
            const Vec3 e_R = so3::rotation_error(l.x.R, ref.R);
            const Vec6 w = nominal_alloc.F * u;
            l.log.series.e_p.push_back(e_p);
            l.log.series.e_R.push_back(e_R);
            l.log.series.wrench.push_back(w);
            if (k % cfg.decimation == 0) {
                l.log.trace.push_back(TraceSample{t, l.x.p, ref.p, e_p, e_R.norm(), u, w, ww.force});
                l.log.max_orthogonality_error =
                    std::max(l.log.max_orthogonality_error, so3::orthogonality_error(l.x.R));
            }

            l.x = integrate_step(l.x, deriv, cfg.Ts);
            l.u_prev = u;
            if (!detail::within_envelope(l.x, cfg.divergence_limit)) {
                l.log.diverged = true;
                l.log.divergence_reason = "state left the envelope |x| <= " + std::to_string(cfg.divergence_limit) +
                                          " at t = " + std::to_string(t + cfg.Ts) + " s";
            }
        }
    }

    for (auto &l : loops) {
        l.log.final_state = l.x;
        l.log.max_orthogonality_error = std::max(l.log.max_orthogonality_error, so3::orthogonality_error(l.x.R));
        l.log.max_relative_gap = l.controller.max_relative_gap();
        log.loops.push_back(std::move(l.log));
    }
    return log;
}

/// Metrics of every loop of a run; in a twin run both records also carry the
/// wrench-difference RMS.
struct RunMetrics {
    std::optional<MetricRecord> indi;
    std::optional<MetricRecord> ndo;
};

inline RunMetrics evaluate_run(const RunLog &log, double t_ss) {
    RunMetrics out;
    for (const auto &l : log.loops) {
        MetricRecord m;
        if (l.diverged) {
            m.diverged = true;
        } else {
            m = compute_metrics(l.series, log.Ts, t_ss);
        }
        (l.kind == ControllerKind::Indi ? out.indi : out.ndo) = m;
    }
    if (out.indi && out.ndo && !out.indi->diverged && !out.ndo->diverged) {
        const double wd = wrench_diff_rms(log.loop(ControllerKind::Indi)->series.wrench,
                                          log.loop(ControllerKind::Ndo)->series.wrench, log.Ts);
        out.indi->wrench_diff_rms = wd;
        out.ndo->wrench_diff_rms = wd;
    }
    return out;
}

struct RunRecord {
    std::size_t scenario_index = 0;
    int repetition = 0;
    std::uint64_t seed = 0;
    MetricRecord indi;
    MetricRecord ndo;
    double max_orthogonality_error = 0.0;
    double max_relative_gap = 0.0;
    std::string divergence_reason;
    /// Decimated traces of the first repetition; full-rate series dropped.
    std::optional<RunLog> trace;
};

struct ScenarioSummary {
    std::string name;
    MetricSummary indi;
    MetricSummary ndo;
};

struct CampaignSummary {
    std::vector<ScenarioSummary> scenarios;
    std::vector<RunRecord> runs;  // scenario-then-repetition order
};

/// Runs every scenario in twin (Both) mode; stochastic scenarios are
/// repeated n_reps times with seeds derive_seed(master, scenario, rep).
/// Results do not depend on `jobs` or on completion order.
inline CampaignSummary run_campaign(const std::vector<Scenario> &scenarios, const SimSettings &cfg,
                                    const Platform &platform, std::uint64_t master_seed, unsigned jobs = 1) {
    CampaignSummary summary;
    for (std::size_t s = 0; s < scenarios.size(); ++s) {
        for (int r = 0; r < scenarios[s].repetitions(); ++r) {
            RunRecord rec;
            rec.scenario_index = s;
            rec.repetition = r;
            rec.seed = derive_seed(master_seed, s, static_cast<std::uint64_t>(r));
            summary.runs.push_back(std::move(rec));
        }
    }

    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (std::size_t i = next++; i < summary.runs.size(); i = next++) {
            try {
                RunRecord &rec = summary.runs[i];
                RunLog log = run_episode(scenarios[rec.scenario_index], cfg, platform, ControllerMode::Both, rec.seed);
                const RunMetrics m = evaluate_run(log, cfg.t_ss);
                rec.indi = *m.indi;
                rec.ndo = *m.ndo;
                for (const auto &l : log.loops) {
                    rec.max_orthogonality_error = std::max(rec.max_orthogonality_error, l.max_orthogonality_error);
                    rec.max_relative_gap = std::max(rec.max_relative_gap, l.max_relative_gap);
                    if (l.diverged) rec.divergence_reason += std::string(to_string(l.kind)) + ": " + l.divergence_reason + "; ";
                }
                if (rec.repetition == 0) {
                    for (auto &l : log.loops) l.series = MetricSeries{};
                    rec.trace = std::move(log);
                }
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    const unsigned n_threads = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(summary.runs.size())));
    std::vector<std::thread> pool;
    for (unsigned i = 1; i < n_threads; ++i) pool.emplace_back(worker);
    worker();
    for (auto &th : pool) th.join();
    if (failure) std::rethrow_exception(failure);

    for (std::size_t s = 0; s < scenarios.size(); ++s) {
        std::vector<MetricRecord> indi, ndo;
        for (const auto &rec : summary.runs) {
            if (rec.scenario_index != s) continue;
            indi.push_back(rec.indi);
            ndo.push_back(rec.ndo);
        }
        summary.scenarios.push_back(ScenarioSummary{scenarios[s].name, summarize(indi), summarize(ndo)});
    }
    return summary;
}

} // namespace indilab
