#pragma once

// The run / campaign / check commands and their file outputs. Each command
// writes diagnostics to the given streams and returns a process exit code:
// 0 ok, 1 invariant or validation failure, 2 usage error.

#include "indilab/config.hpp"
#include "indilab/metrics.hpp"
#include "indilab/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace indilab {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInvalid = 1;
inline constexpr int kExitUsage = 2;

struct CommandOptions {
    std::optional<std::string> config_path;  // built-in defaults when empty
    std::optional<std::string> out_dir;      // overrides output_dir
    std::string scenario = "nominal";
    ControllerMode controller = ControllerMode::Both;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> jobs;
};

// ---------------------------------------------------------------------------
// Formatting

/// Shortest text that is guaranteed to round-trip: 17 significant digits.
inline std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline const char *timeseries_header() {
    return "controller,t,p_x,p_y,p_z,p_ref_x,p_ref_y,p_ref_z,e_p_x,e_p_y,e_p_z,e_R_norm,"
           "u_1,u_2,u_3,u_4,u_5,u_6,w_fx,w_fy,w_fz,w_tx,w_ty,w_tz,d_F_x,d_F_y,d_F_z";
}

inline const char *summary_header() {
    return "scenario,controller,n_runs,n_diverged,rms_p,rms_R,rms_R_deg,rms_p_ss,rms_R_ss,rms_R_ss_deg,energy,"
           "wrench_diff_rms";
}

/// Long-format CSV: one block of rows per controller loop.
inline void write_timeseries_csv(const RunLog &log, std::ostream &os) {
    os << timeseries_header() << '\n';
    for (const auto &l : log.loops) {
        const std::string kind(to_string(l.kind));
        for (const auto &s : l.trace) {
            os << kind << ',' << fmt17(s.t);
            for (const Vec3 *v : {&s.p, &s.p_ref, &s.e_p})
                for (int i = 0; i < 3; ++i) os << ',' << fmt17((*v)(i));
            os << ',' << fmt17(s.e_R_norm);
            for (int i = 0; i < 6; ++i) os << ',' << fmt17(s.u(i));
            for (int i = 0; i < 6; ++i) os << ',' << fmt17(s.wrench(i));
            for (int i = 0; i < 3; ++i) os << ',' << fmt17(s.d_F(i));
            os << '\n';
        }
    }
}

inline json metrics_json(const MetricRecord &m) {
    auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
    return json{{"rms_p", num(m.rms_p)},
                {"rms_R", num(m.rms_R)},
                {"rms_R_deg", num(m.rms_R_deg)},
                {"rms_p_ss", num(m.rms_p_ss)},
                {"rms_R_ss", num(m.rms_R_ss)},
                {"rms_R_ss_deg", num(m.rms_R_ss_deg)},
                {"energy", num(m.energy)},
                {"wrench_diff_rms", num(m.wrench_diff_rms)},
                {"diverged", m.diverged}};
}

inline void write_summary_csv(const CampaignSummary &summary, std::ostream &os) {
    os << summary_header() << '\n';
    for (const auto &s : summary.scenarios) {
        for (const auto *ms : {&s.indi, &s.ndo}) {
            const MetricRecord &m = ms->mean;
            os << s.name << ',' << (ms == &s.indi ? "indi" : "ndo") << ',' << ms->n_runs << ',' << ms->n_diverged;
            for (double v : {m.rms_p, m.rms_R, m.rms_R_deg, m.rms_p_ss, m.rms_R_ss, m.rms_R_ss_deg, m.energy,
                             m.wrench_diff_rms})
                os << ',' << fmt17(v);
            os << '\n';
        }
    }
}

// ---------------------------------------------------------------------------
// Helpers

namespace detail {

struct Loaded {
    CampaignConfig config;
    std::vector<Scenario> scenarios;
};

/// Loads and validates; prints itemised problems and returns nullopt on failure.
inline std::optional<Loaded> load_checked(const CommandOptions &opt, std::ostream &err) {
    Loaded out;
    try {
        out.config = opt.config_path ? load_config(*opt.config_path) : default_config();
    } catch (const Error &e) {
        err << "error: " << e.what() << '\n';
        return std::nullopt;
    }
    if (opt.out_dir) out.config.output_dir = *opt.out_dir;
    if (opt.jobs) out.config.run.jobs = *opt.jobs;
    const auto problems = validate(out.config);
    if (!problems.empty()) {
        for (const auto &p : problems) err << "error: " << p << '\n';
        return std::nullopt;
    }
    out.scenarios = build_scenarios(out.config);
    return out;
}

inline unsigned resolve_jobs(unsigned jobs) {
    if (jobs > 0) return jobs;
    return std::max(1u, std::thread::hardware_concurrency());
}

inline std::filesystem::path prepare_dir(const std::string &dir) {
    std::filesystem::path p(dir);
    std::filesystem::create_directories(p);
    return p;
}

inline void write_file(const std::filesystem::path &path, const std::string &content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << content;
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

} // namespace detail

// ---------------------------------------------------------------------------
// run

/// One episode of one scenario. Without --seed the episode uses the same seed
/// as repetition 0 of that scenario in a campaign.
inline int cmd_run(const CommandOptions &opt, std::ostream &out, std::ostream &err) {
    const auto loaded = detail::load_checked(opt, err);
    if (!loaded) return kExitInvalid;
    const auto &cfg = loaded->config;

    std::size_t index = cfg.scenarios.size();
    for (std::size_t i = 0; i < cfg.scenarios.size(); ++i)
        if (cfg.scenarios[i].name == opt.scenario) index = i;
    if (index == cfg.scenarios.size()) {
        err << "error: unknown scenario '" << opt.scenario << "'; valid names:";
        for (const auto &s : cfg.scenarios) err << ' ' << s.name;
        err << '\n';
        return kExitUsage;
    }

    const std::uint64_t seed = opt.seed.value_or(derive_seed(cfg.run.seed, index, 0));
    const SimSettings settings = build_settings(cfg);
    RunLog log;
    try {
        log = run_episode(loaded->scenarios[index], settings, build_platform(cfg), opt.controller, seed);
    } catch (const Error &e) {
        err << "error: " << e.what() << '\n';
        return kExitInvalid;
    }
    const RunMetrics m = evaluate_run(log, settings.t_ss);

    json j;
    j["scenario"] = opt.scenario;
    j["controller"] = std::string(to_string(opt.controller));
    j["seed"] = seed;
    j["config_hash"] = hex(config_hash(cfg));
    j["Ts"] = settings.Ts;
    j["duration"] = settings.duration;
    j["t_ss"] = settings.t_ss;
    j["decimation"] = settings.decimation;
    j["loops"] = json::object();
    for (const auto &l : log.loops) {
        const MetricRecord &rec = l.kind == ControllerKind::Indi ? *m.indi : *m.ndo;
        json lj = metrics_json(rec);
        lj["divergence_reason"] = l.divergence_reason;
        lj["max_orthogonality_error"] = l.max_orthogonality_error;
        if (l.kind == ControllerKind::Ndo) lj["max_relative_gap"] = l.max_relative_gap;
        j["loops"][std::string(to_string(l.kind))] = lj;
    }
    const double wd = m.indi ? m.indi->wrench_diff_rms : std::numeric_limits<double>::quiet_NaN();
    j["wrench_diff_rms"] = std::isfinite(wd) ? json(wd) : json(nullptr);

    try {
        const auto dir = detail::prepare_dir(cfg.output_dir);
        const std::string stem = opt.scenario + "_" + std::string(to_string(opt.controller)) + "_" + std::to_string(seed);
        std::ostringstream csv;
        write_timeseries_csv(log, csv);
        detail::write_file(dir / (stem + ".timeseries.csv"), csv.str());
        detail::write_file(dir / (stem + ".metrics.json"), j.dump(2) + "\n");
    } catch (const std::exception &e) {
        err << "error: " << e.what() << '\n';
        return kExitInvalid;
    }

    out << opt.scenario << " seed=" << seed;
    for (const auto &l : log.loops) {
        const MetricRecord &rec = l.kind == ControllerKind::Indi ? *m.indi : *m.ndo;
        out << " | " << to_string(l.kind);
        if (rec.diverged) {
            out << " DIVERGED";
        } else {
            out << " rms_p=" << rec.rms_p << " rms_R=" << rec.rms_R << " rms_p_ss=" << rec.rms_p_ss
                << " energy=" << rec.energy;
        }
    }
    if (std::isfinite(wd)) out << " | wrench_diff_rms=" << wd;
    out << '\n';
    return kExitOk;
}

// ---------------------------------------------------------------------------
// campaign

inline json campaign_json(const CampaignConfig &cfg, const std::vector<Scenario> &scenarios,
                          const CampaignSummary &summary) {
    json j;
    j["config_hash"] = hex(config_hash(cfg));
    j["master_seed"] = cfg.run.seed;
    j["seed_derivation"] = "mix64(mix64(mix64(master) ^ scenario_index) ^ repetition), mix64 = SplitMix64 finaliser";
    j["n_runs"] = summary.runs.size();
    j["config"] = to_json(cfg);
    j["scenarios"] = json::array();
    for (std::size_t s = 0; s < summary.scenarios.size(); ++s) {
        const auto &ss = summary.scenarios[s];
        json sj;
        sj["name"] = ss.name;
        sj["repetitions"] = scenarios[s].repetitions();
        sj["mean"] = {{"indi", metrics_json(ss.indi.mean)}, {"ndo", metrics_json(ss.ndo.mean)}};
        sj["n_diverged"] = {{"indi", ss.indi.n_diverged}, {"ndo", ss.ndo.n_diverged}};
        sj["runs"] = json::array();
        for (const auto &r : summary.runs) {
            if (r.scenario_index != s) continue;
            sj["runs"].push_back({{"repetition", r.repetition},
                                  {"seed", r.seed},
                                  {"indi", metrics_json(r.indi)},
                                  {"ndo", metrics_json(r.ndo)},
                                  {"max_orthogonality_error", r.max_orthogonality_error},
                                  {"max_relative_gap", r.max_relative_gap},
                                  {"divergence_reason", r.divergence_reason}});
        }
        j["scenarios"].push_back(std::move(sj));
    }
    return j;
}

/// All scenarios in twin mode. Writes summary.csv, campaign.json and the
/// decimated traces of repetition 0 of every scenario.
inline int cmd_campaign(const CommandOptions &opt, std::ostream &out, std::ostream &err) {
    const auto loaded = detail::load_checked(opt, err);
    if (!loaded) return kExitInvalid;
    const auto &cfg = loaded->config;

    CampaignSummary summary;
    try {
        summary = run_campaign(loaded->scenarios, build_settings(cfg), build_platform(cfg), cfg.run.seed,
                               detail::resolve_jobs(cfg.run.jobs));
    } catch (const Error &e) {
        err << "error: " << e.what() << '\n';
        return kExitInvalid;
    }

    try {
        const auto dir = detail::prepare_dir(cfg.output_dir);
        std::ostringstream csv;
        write_summary_csv(summary, csv);
        detail::write_file(dir / "summary.csv", csv.str());
        detail::write_file(dir / "campaign.json", campaign_json(cfg, loaded->scenarios, summary).dump(2) + "\n");
        for (const auto &r : summary.runs) {
            if (!r.trace) continue;
            std::ostringstream ts;
            write_timeseries_csv(*r.trace, ts);
            detail::write_file(dir / (r.trace->scenario + "_both_" + std::to_string(r.seed) + ".timeseries.csv"),
                               ts.str());
        }
    } catch (const std::exception &e) {
        err << "error: " << e.what() << '\n';
        return kExitInvalid;
    }

    std::size_t diverged = 0;
    for (const auto &r : summary.runs) diverged += (r.indi.diverged || r.ndo.diverged) ? 1 : 0;
    out << "campaign: " << summary.scenarios.size() << " scenarios, " << summary.runs.size() << " twin runs, "
        << diverged << " with a diverged loop -> " << cfg.output_dir << '\n';
    return kExitOk;
}

// ---------------------------------------------------------------------------
// check

/// Differences between a config and the built-in defaults, plus any loss in a
/// save/load round trip. Both lists empty means the defaults are reproduced
/// exactly.
struct FidelityReport {
    std::vector<std::string> differences_from_defaults;
    std::vector<std::string> round_trip_losses;
    bool exact() const { return differences_from_defaults.empty() && round_trip_losses.empty(); }
};

inline FidelityReport fidelity(const CampaignConfig &cfg) {
    FidelityReport r;
    r.differences_from_defaults = config_diff(default_config(), cfg);
    const CampaignConfig back = config_from_json(json::parse(to_json(cfg).dump(2)));
    if (!(back == cfg)) r.round_trip_losses = config_diff(cfg, back);
    if (!(back == cfg) && r.round_trip_losses.empty()) r.round_trip_losses.emplace_back("values differ after reload");
    return r;
}

inline int cmd_check(const CommandOptions &opt, std::ostream &out, std::ostream &err) {
    CampaignConfig cfg;
    try {
        cfg = opt.config_path ? load_config(*opt.config_path) : default_config();
    } catch (const Error &e) {
        err << "error: " << e.what() << '\n';
        return kExitInvalid;
    }
    int status = kExitOk;
    const auto problems = validate(cfg);
    for (const auto &p : problems) err << "error: " << p << '\n';
    if (!problems.empty()) status = kExitInvalid;

    const VehicleParams params = cfg.vehicle.params();
    if (params.violations().empty()) {
        try {
            const AllocationMatrix alloc = build_allocation(params);
            const Vec6 u_hover = hover_input(params, alloc);
            const RigidState rest{Vec3::Zero(), Vec3::Zero(), Mat3::Identity(), Vec3::Zero()};
            const Mat6 A = decoupling_matrix(rest, params, alloc);
            out << "rank(F) = " << numerical_rank(alloc.F) << '\n';
            out << "hover input u [rad^2/s^2] =";
            for (int i = 0; i < 6; ++i) out << ' ' << fmt17(u_hover(i));
            out << '\n';
            out << "hover force [N] = " << fmt17((alloc.force_rows() * u_hover).z())
                << ", hover torque norm [N m] = " << (alloc.torque_rows() * u_hover).norm() << '\n';
            out << "cond(A) at rest = " << condition_number(A) << '\n';
            if (u_hover.minCoeff() < 0.0) out << "warning: hover requires a negative squared rotor speed\n";
        } catch (const SingularAllocation &e) {
            err << "error: SingularAllocation: " << e.what() << '\n';
            status = kExitInvalid;
        }
    }

    const FidelityReport fr = fidelity(cfg);
    for (const auto &l : fr.round_trip_losses) err << "error: round trip: " << l << '\n';
    if (!fr.round_trip_losses.empty()) status = kExitInvalid;
    if (fr.differences_from_defaults.empty()) {
        out << "default fidelity: all platform, gain, wind, sensor and scenario values match the built-in defaults\n";
    } else {
        out << "default fidelity: " << fr.differences_from_defaults.size() << " value(s) differ from the defaults\n";
        for (const auto &d : fr.differences_from_defaults) out << "  " << d << '\n';
    }
    out << "config hash = " << hex(config_hash(cfg)) << '\n';
    out << (status == kExitOk ? "check: OK" : "check: FAILED") << '\n';
    return status;
}

} // namespace indilab
