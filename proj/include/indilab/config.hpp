#pragma once

// Campaign configuration: JSON (de)serialisation, validation and the built-in
// defaults (platform, gains, wind, sensor and scenario tables).

#include "indilab/control.hpp"
#include "indilab/environment.hpp"
#include "indilab/sim.hpp"
#include "indilab/vehicle.hpp"

#include "json.hpp"

#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace indilab {

using json = nlohmann::ordered_json;

/// Vehicle block as written in the config file: tilt angles in degrees.
struct VehicleBlock {
    double mass = 0.935;
    Vec3 inertia_diag = Vec3(1.49e-3, 1.71e-3, 2.77e-3);
    int n_rotors = 6;
    double arm_length = 0.155;
    double c_f = 6.7e-5;
    double c_t = 1.0e-6;
    double alpha_deg = 26.0;
    double beta_deg = 14.0;
    double gravity = kStandardGravity;

    VehicleParams params() const {
        VehicleParams p;
        p.mass = mass;
        p.inertia_diag = inertia_diag;
        p.n_rotors = n_rotors;
        p.arm_length = arm_length;
        p.c_f = c_f;
        p.c_t = c_t;
        p.alpha = deg2rad(alpha_deg);
        p.beta = deg2rad(beta_deg);
        p.gravity = gravity;
        return p;
    }
    bool operator==(const VehicleBlock &) const = default;
};

struct ScenarioEntry {
    std::string name;
    double mass_dev = 0.0;     // fraction, +0.2 = +20 %
    double inertia_dev = 0.0;
    std::string wind;          // key into the wind table
    std::string sensor;        // key into the sensor table
    bool operator==(const ScenarioEntry &) const = default;
};

struct RunSettings {
    double Ts = 1e-4;
    double duration = 10.0;
    double t_ss = 2.5;
    std::uint64_t seed = 20250101;
    int n_reps = 20;
    int decimation = 10;
    Vec3 cop_offset = Vec3(0.0, 0.0, 0.05);
    double wind_update_hz = 100.0;
    double divergence_limit = 1e6;
    Vec3 initial_position = Vec3(1.0, 0.2, 0.1);
    unsigned jobs = 0;  // 0: hardware concurrency
    bool operator==(const RunSettings &) const = default;
};

struct CampaignConfig {
    VehicleBlock vehicle;
    Gains gains;
    FilterSettings filters;
    ObserverGains observer;
    LissajousParams reference;
    std::vector<WindModel> winds;
    std::vector<SensorModel> sensors;
    std::vector<ScenarioEntry> scenarios;
    RunSettings run;
    std::string output_dir = "results";

    bool operator==(const CampaignConfig &) const = default;
};

inline CampaignConfig default_config() {
    CampaignConfig c;
    auto wind = [](std::string name, Vec3 mu, Mat3 sigma, double d) {
        WindModel w;
        w.name = std::move(name);
        w.mu = mu;
        w.sigma = sigma;
        w.D = d * Mat3::Identity();
        return w;
    };
    Mat3 light = Vec3(0.15 * 0.15, 0.10 * 0.10, 0.05 * 0.05).asDiagonal();
    Mat3 gusty;
    gusty << 4.0, 0.5, 0.1,
             0.5, 2.0, 0.0,
             0.1, 0.0, 0.5;
    Mat3 extreme;
    extreme << 6.0, 0.7, 0.2,
               0.7, 3.0, 0.0,
               0.2, 0.0, 0.7;
    c.winds = {
        wind("no_wind", Vec3::Zero(), Mat3::Zero(), 0.0),
        wind("light_breeze", Vec3(0.5, 0.3, 0.1), light, 2.0),
        wind("strong_gusty", Vec3(3.0, 2.0, 0.5), gusty, 2.0),
        wind("extreme_wind", Vec3(14.0, 9.0, 3.0), extreme, 3.0),
    };
    c.sensors = {
        SensorModel{"ideal", 0.0, 0.0, 0.0, 0.0},
        SensorModel{"high_quality", 0.01, 0.001, 0.001, 0.001},
        SensorModel{"low_quality", 1.0, 0.005, 0.05, 0.005},
    };
    c.scenarios = {
        {"nominal", 0.0, 0.0, "no_wind", "ideal"},
        {"light_model", -0.2, -0.2, "light_breeze", "high_quality"},
        {"heavy_model", 0.2, 0.2, "light_breeze", "high_quality"},
        {"bad_sensors", 0.0, 0.0, "light_breeze", "low_quality"},
        {"extreme_wind", 0.0, 0.0, "extreme_wind", "high_quality"},
        {"combined_stress", 0.2, 0.2, "strong_gusty", "low_quality"},
    };
    return c;
}

// ---------------------------------------------------------------------------
// JSON

namespace detail {

inline json vec_json(const Vec3 &v) { return json::array({v.x(), v.y(), v.z()}); }

inline json mat_json(const Mat3 &m) {
    json rows = json::array();
    for (int i = 0; i < 3; ++i) rows.push_back(json::array({m(i, 0), m(i, 1), m(i, 2)}));
    return rows;
}

/// Reads optional fields with errors that name the full path.
class Reader {
public:
    Reader(const json &j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
    }

    template <class T>
    void get(const char *key, T &out) const {
        const auto it = j_.find(key);
        if (it == j_.end()) return;
        try {
            out = it->template get<T>();
        } catch (const json::exception &) {
            throw ConfigError(field(key) + ": wrong type (" + std::string(it->type_name()) + ")");
        }
    }

    void get(const char *key, Vec3 &out) const {
        const auto it = j_.find(key);
        if (it == j_.end()) return;
        out = read_vec(*it, field(key));
    }

    void get(const char *key, Mat3 &out) const {
        const auto it = j_.find(key);
        if (it == j_.end()) return;
        if (!it->is_array() || it->size() != 3) throw ConfigError(field(key) + ": expected a 3x3 array of rows");
        for (int i = 0; i < 3; ++i) out.row(i) = read_vec((*it)[i], field(key) + "[" + std::to_string(i) + "]");
    }

    const json *child(const char *key) const {
        const auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    void reject_unknown(std::initializer_list<const char *> known) const {
        const std::set<std::string> allowed(known.begin(), known.end());
        for (const auto &[k, v] : j_.items()) {
            if (!allowed.contains(k)) throw ConfigError(field(k.c_str()) + ": unknown field");
        }
    }

    std::string field(const char *key) const { return path_.empty() ? std::string(key) : path_ + "." + key; }

private:
    static Vec3 read_vec(const json &j, const std::string &where) {
        if (!j.is_array() || j.size() != 3) throw ConfigError(where + ": expected an array of 3 numbers");
        Vec3 v;
        for (int i = 0; i < 3; ++i) {
            if (!j[i].is_number()) throw ConfigError(where + ": expected an array of 3 numbers");
            v(i) = j[i].get<double>();
        }
        return v;
    }

    const json &j_;
    std::string path_;
};

} // namespace detail

inline json to_json(const CampaignConfig &c) {
    using detail::mat_json;
    using detail::vec_json;
    json j;
    j["vehicle"] = {
        {"mass", c.vehicle.mass},           {"inertia_diag", vec_json(c.vehicle.inertia_diag)},
        {"n_rotors", c.vehicle.n_rotors},   {"arm_length", c.vehicle.arm_length},
        {"c_f", c.vehicle.c_f},             {"c_t", c.vehicle.c_t},
        {"alpha_deg", c.vehicle.alpha_deg}, {"beta_deg", c.vehicle.beta_deg},
        {"gravity", c.vehicle.gravity},
    };
    j["gains"] = {{"Kp", vec_json(c.gains.Kp)},
                  {"Kv", vec_json(c.gains.Kv)},
                  {"KR", vec_json(c.gains.KR)},
                  {"KOmega", vec_json(c.gains.KOmega)}};
    j["filters"] = {{"translational_cutoff_hz", c.filters.translational_cutoff_hz},
                    {"rotational_cutoff_hz", c.filters.rotational_cutoff_hz},
                    {"seed_with_first_sample", c.filters.seed_with_first_sample}};
    j["observer"] = {{"lambda_F", c.observer.lambda_F}, {"lambda_tau", c.observer.lambda_tau}};
    j["reference"] = {{"Ax", c.reference.Ax}, {"Ay", c.reference.Ay},           {"ax", c.reference.ax},
                      {"ay", c.reference.ay}, {"delta_x", c.reference.delta_x}, {"z0", c.reference.z0}};
    j["winds"] = json::array();
    for (const auto &w : c.winds) {
        j["winds"].push_back({{"name", w.name}, {"mu", vec_json(w.mu)}, {"sigma", mat_json(w.sigma)}, {"D", mat_json(w.D)}});
    }
    j["sensors"] = json::array();
    for (const auto &s : c.sensors) {
        j["sensors"].push_back({{"name", s.name},
                                {"accel_bias", s.accel_bias},
                                {"accel_var", s.accel_var},
                                {"gyro_bias", s.gyro_bias},
                                {"gyro_var", s.gyro_var}});
    }
    j["scenarios"] = json::array();
    for (const auto &s : c.scenarios) {
        j["scenarios"].push_back({{"name", s.name},
                                  {"mass_dev", s.mass_dev},
                                  {"inertia_dev", s.inertia_dev},
                                  {"wind", s.wind},
                                  {"sensor", s.sensor}});
    }
    j["run"] = {{"Ts", c.run.Ts},
                {"duration", c.run.duration},
                {"t_ss", c.run.t_ss},
                {"seed", c.run.seed},
                {"n_reps", c.run.n_reps},
                {"decimation", c.run.decimation},
                {"cop_offset", vec_json(c.run.cop_offset)},
                {"wind_update_hz", c.run.wind_update_hz},
                {"divergence_limit", c.run.divergence_limit},
                {"initial_position", vec_json(c.run.initial_position)},
                {"jobs", c.run.jobs}};
    j["output_dir"] = c.output_dir;
    return j;
}

/// Missing fields keep their built-in default; tables, when present, replace
/// the default table entirely. Unknown fields are rejected.
inline CampaignConfig config_from_json(const json &j) {
    CampaignConfig c = default_config();
    const detail::Reader root(j, "");
    root.reject_unknown({"vehicle", "gains", "filters", "observer", "reference", "winds", "sensors", "scenarios", "run",
                         "output_dir"});
    if (const json *v = root.child("vehicle")) {
        const detail::Reader r(*v, "vehicle");
        r.reject_unknown({"mass", "inertia_diag", "n_rotors", "arm_length", "c_f", "c_t", "alpha_deg", "beta_deg", "gravity"});
        r.get("mass", c.vehicle.mass);
        r.get("inertia_diag", c.vehicle.inertia_diag);
        r.get("n_rotors", c.vehicle.n_rotors);
        r.get("arm_length", c.vehicle.arm_length);
        r.get("c_f", c.vehicle.c_f);
        r.get("c_t", c.vehicle.c_t);
        r.get("alpha_deg", c.vehicle.alpha_deg);
        r.get("beta_deg", c.vehicle.beta_deg);
        r.get("gravity", c.vehicle.gravity);
    }
    if (const json *v = root.child("gains")) {
        const detail::Reader r(*v, "gains");
        r.reject_unknown({"Kp", "Kv", "KR", "KOmega"});
        r.get("Kp", c.gains.Kp);
        r.get("Kv", c.gains.Kv);
        r.get("KR", c.gains.KR);
        r.get("KOmega", c.gains.KOmega);
    }
    if (const json *v = root.child("filters")) {
        const detail::Reader r(*v, "filters");
        r.reject_unknown({"translational_cutoff_hz", "rotational_cutoff_hz", "seed_with_first_sample"});
        r.get("translational_cutoff_hz", c.filters.translational_cutoff_hz);
        r.get("rotational_cutoff_hz", c.filters.rotational_cutoff_hz);
        r.get("seed_with_first_sample", c.filters.seed_with_first_sample);
    }
    if (const json *v = root.child("observer")) {
        const detail::Reader r(*v, "observer");
        r.reject_unknown({"lambda_F", "lambda_tau"});
        r.get("lambda_F", c.observer.lambda_F);
        r.get("lambda_tau", c.observer.lambda_tau);
    }
    if (const json *v = root.child("reference")) {
        const detail::Reader r(*v, "reference");
        r.reject_unknown({"Ax", "Ay", "ax", "ay", "delta_x", "z0"});
        r.get("Ax", c.reference.Ax);
        r.get("Ay", c.reference.Ay);
        r.get("ax", c.reference.ax);
        r.get("ay", c.reference.ay);
        r.get("delta_x", c.reference.delta_x);
        r.get("z0", c.reference.z0);
    }
    auto table = [&](const char *key) -> const json * {
        const json *t = root.child(key);
        if (t && !t->is_array()) throw ConfigError(std::string(key) + ": expected an array");
        return t;
    };
    if (const json *t = table("winds")) {
        c.winds.clear();
        for (std::size_t i = 0; i < t->size(); ++i) {
            const detail::Reader r((*t)[i], "winds[" + std::to_string(i) + "]");
            r.reject_unknown({"name", "mu", "sigma", "D"});
            WindModel w;
            r.get("name", w.name);
            r.get("mu", w.mu);
            r.get("sigma", w.sigma);
            r.get("D", w.D);
            c.winds.push_back(std::move(w));
        }
    }
    if (const json *t = table("sensors")) {
        c.sensors.clear();
        for (std::size_t i = 0; i < t->size(); ++i) {
            const detail::Reader r((*t)[i], "sensors[" + std::to_string(i) + "]");
            r.reject_unknown({"name", "accel_bias", "accel_var", "gyro_bias", "gyro_var"});
            SensorModel s;
            r.get("name", s.name);
            r.get("accel_bias", s.accel_bias);
            r.get("accel_var", s.accel_var);
            r.get("gyro_bias", s.gyro_bias);
            r.get("gyro_var", s.gyro_var);
            c.sensors.push_back(std::move(s));
        }
    }
    if (const json *t = table("scenarios")) {
        c.scenarios.clear();
        for (std::size_t i = 0; i < t->size(); ++i) {
            const detail::Reader r((*t)[i], "scenarios[" + std::to_string(i) + "]");
            r.reject_unknown({"name", "mass_dev", "inertia_dev", "wind", "sensor"});
            ScenarioEntry s;
            r.get("name", s.name);
            r.get("mass_dev", s.mass_dev);
            r.get("inertia_dev", s.inertia_dev);
            r.get("wind", s.wind);
            r.get("sensor", s.sensor);
            c.scenarios.push_back(std::move(s));
        }
    }
    if (const json *v = root.child("run")) {
        const detail::Reader r(*v, "run");
        r.reject_unknown({"Ts", "duration", "t_ss", "seed", "n_reps", "decimation", "cop_offset", "wind_update_hz",
                          "divergence_limit", "initial_position", "jobs"});
        r.get("Ts", c.run.Ts);
        r.get("duration", c.run.duration);
        r.get("t_ss", c.run.t_ss);
        r.get("seed", c.run.seed);
        r.get("n_reps", c.run.n_reps);
        r.get("decimation", c.run.decimation);
        r.get("cop_offset", c.run.cop_offset);
        r.get("wind_update_hz", c.run.wind_update_hz);
        r.get("divergence_limit", c.run.divergence_limit);
        r.get("initial_position", c.run.initial_position);
        r.get("jobs", c.run.jobs);
    }
    root.get("output_dir", c.output_dir);
    return c;
}

inline CampaignConfig load_config(const std::string &path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path + ": cannot open config file");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error &e) {
        throw ConfigError(path + ": " + e.what());
    }
    return config_from_json(j);
}

inline void save_config(const CampaignConfig &c, const std::string &path) {
    std::ofstream out(path);
    if (!out) throw ConfigError(path + ": cannot write config file");
    out << to_json(c).dump(2) << '\n';
}

/// Itemised invariant violations, each prefixed with the offending field.
inline std::vector<std::string> validate(const CampaignConfig &c) {
    std::vector<std::string> out = c.vehicle.params().violations();
    auto positive = [&](bool ok, const std::string &msg) {
        if (!ok) out.push_back(msg);
    };
    positive(c.gains.valid(), "gains: all gain diagonals must be positive");
    positive(c.filters.translational_cutoff_hz > 0.0, "filters.translational_cutoff_hz: must be positive");
    positive(c.filters.rotational_cutoff_hz > 0.0, "filters.rotational_cutoff_hz: must be positive");
    positive(c.observer.lambda_F > 0.0, "observer.lambda_F: must be positive");
    positive(c.observer.lambda_tau > 0.0, "observer.lambda_tau: must be positive");
    positive(c.run.Ts > 0.0, "run.Ts: sampling period must be positive");
    positive(c.run.duration > c.run.Ts, "run.duration: must exceed one sampling period");
    positive(c.run.t_ss >= 0.0 && c.run.t_ss < c.run.duration, "run.t_ss: must lie in [0, duration)");
    positive(c.run.n_reps >= 1, "run.n_reps: must be at least 1");
    positive(c.run.decimation >= 1, "run.decimation: must be at least 1");
    positive(c.run.wind_update_hz > 0.0, "run.wind_update_hz: must be positive");
    positive(c.run.divergence_limit > 0.0, "run.divergence_limit: must be positive");
    positive(c.run.cop_offset.allFinite(), "run.cop_offset: must be finite");
    positive(c.run.initial_position.allFinite(), "run.initial_position: must be finite");
    if (c.run.Ts > 0.0) {
        positive(c.filters.translational_cutoff_hz < 0.5 / c.run.Ts, "filters.translational_cutoff_hz: above Nyquist");
        positive(c.filters.rotational_cutoff_hz < 0.5 / c.run.Ts, "filters.rotational_cutoff_hz: above Nyquist");
    }

    std::set<std::string> wind_names, sensor_names, scenario_names;
    for (std::size_t i = 0; i < c.winds.size(); ++i) {
        const auto &w = c.winds[i];
        const std::string at = "winds[" + std::to_string(i) + "]";
        if (!wind_names.insert(w.name).second) out.push_back(at + ".name: duplicate wind model '" + w.name + "'");
        try {
            (void)covariance_factor(w.sigma);
        } catch (const CovarianceNotPSD &e) {
            out.push_back(at + ".sigma: " + e.what());
        }
        if (!w.mu.allFinite() || !w.D.allFinite()) out.push_back(at + ": mu and D must be finite");
    }
    for (std::size_t i = 0; i < c.sensors.size(); ++i) {
        const auto &s = c.sensors[i];
        const std::string at = "sensors[" + std::to_string(i) + "]";
        if (!sensor_names.insert(s.name).second) out.push_back(at + ".name: duplicate sensor model '" + s.name + "'");
        if (!(s.accel_var >= 0.0)) out.push_back(at + ".accel_var: variance must be non-negative");
        if (!(s.gyro_var >= 0.0)) out.push_back(at + ".gyro_var: variance must be non-negative");
    }
    for (std::size_t i = 0; i < c.scenarios.size(); ++i) {
        const auto &s = c.scenarios[i];
        const std::string at = "scenarios[" + std::to_string(i) + "]";
        if (s.name.empty()) out.push_back(at + ".name: must not be empty");
        if (!scenario_names.insert(s.name).second) out.push_back(at + ".name: duplicate scenario '" + s.name + "'");
        if (!wind_names.contains(s.wind)) out.push_back(at + ".wind: unknown wind model '" + s.wind + "'");
        if (!sensor_names.contains(s.sensor)) out.push_back(at + ".sensor: unknown sensor model '" + s.sensor + "'");
        if (!(s.mass_dev > -1.0)) out.push_back(at + ".mass_dev: perturbed mass must be positive");
        if (!(s.inertia_dev > -1.0)) out.push_back(at + ".inertia_dev: perturbed inertia must be positive");
    }
    return out;
}

inline std::vector<Scenario> build_scenarios(const CampaignConfig &c) {
    std::vector<Scenario> out;
    for (const auto &e : c.scenarios) {
        Scenario s;
        s.name = e.name;
        s.mass_dev = e.mass_dev;
        s.inertia_dev = e.inertia_dev;
        s.n_reps = c.run.n_reps;
        bool found_wind = false, found_sensor = false;
        for (const auto &w : c.winds) {
            if (w.name == e.wind) {
                s.wind = w;
                found_wind = true;
            }
        }
        for (const auto &m : c.sensors) {
            if (m.name == e.sensor) {
                s.sensors = m;
                found_sensor = true;
            }
        }
        if (!found_wind) throw ConfigError("scenario '" + e.name + "': unknown wind model '" + e.wind + "'");
        if (!found_sensor) throw ConfigError("scenario '" + e.name + "': unknown sensor model '" + e.sensor + "'");
        out.push_back(std::move(s));
    }
    return out;
}

inline Platform build_platform(const CampaignConfig &c) {
    return Platform{c.vehicle.params(), ControllerSettings{c.gains, c.filters, c.observer}, c.reference};
}

inline SimSettings build_settings(const CampaignConfig &c) {
    SimSettings s;
    s.Ts = c.run.Ts;
    s.duration = c.run.duration;
    s.t_ss = c.run.t_ss;
    s.initial.p = c.run.initial_position;
    s.wind_update_hz = c.run.wind_update_hz;
    s.cop_offset = c.run.cop_offset;
    s.decimation = c.run.decimation;
    s.divergence_limit = c.run.divergence_limit;
    return s;
}

/// 64-bit FNV-1a over the compact canonical JSON dump. The output directory
/// and job count do not affect results and are left out.
inline std::uint64_t config_hash(const CampaignConfig &c) {
    json j = to_json(c);
    j.erase("output_dir");
    if (j.contains("run")) j["run"].erase("jobs");
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : j.dump()) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex;
    os.width(16);
    os.fill('0');
    os << v;
    return os.str();
}

/// Field-by-field differences between two configs, as "path: a != b" lines.
inline std::vector<std::string> config_diff(const CampaignConfig &a, const CampaignConfig &b) {
    std::vector<std::string> out;
    const json ja = to_json(a), jb = to_json(b);
    const json patch = json::diff(ja, jb);
    for (const auto &op : patch) {
        const std::string path = op.value("path", std::string{});
        const json::json_pointer ptr(path);
        const std::string lhs = ja.contains(ptr) ? ja.at(ptr).dump() : "<absent>";
        const std::string rhs = jb.contains(ptr) ? jb.at(ptr).dump() : "<absent>";
        out.push_back(path + ": " + lhs + " != " + rhs);
    }
    return out;
}

} // namespace indilab
