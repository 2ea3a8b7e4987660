#pragma once

// JSON documents: alignment field, simulation config, controller config and
// the composite run config used by the CLI.

#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <system_error>
#include <vector>

#include <nlohmann/json.hpp>

#include "arcdrift/container.hpp"
#include "arcdrift/controller.hpp"
#include "arcdrift/errors.hpp"
#include "arcdrift/field.hpp"
#include "arcdrift/sim.hpp"
#include "arcdrift/tension.hpp"

namespace arcdrift {

/// Shortest text that round-trips, padded out to 17 significant digits.
inline std::string format_exact(double v) {
    if (!std::isfinite(v)) throw DataError("cannot serialize a non-finite number");
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

namespace detail {

inline void reject_unknown(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!j.is_object()) throw UsageError(where + " must be a JSON object");
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [key, _] : j.items()) {
        if (!ok.count(key)) throw UsageError(where + ": unknown key '" + key + "'");
    }
}

template <class T>
T get_or(const json& j, const char* key, T fallback, const std::string& where) {
    if (!j.contains(key) || j[key].is_null()) return fallback;
    try {
        return j[key].get<T>();
    } catch (const json::exception&) {
        throw UsageError(where + ": key '" + key + "' has the wrong type");
    }
}

inline Vec vector_from_json(const json& j, const std::string& where) {
    if (!j.is_array()) throw UsageError(where + " must be an array of numbers");
    Vec v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) throw UsageError(where + "[" + std::to_string(i) + "] is not a number");
        v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
    }
    return v;
}

/// Accepts {"SC":x,"SA":y,"KG":z}, [x,y,z] or a scalar applied to all axes.
template <class T>
std::array<T, 3> per_axis(const json& j, std::array<T, 3> fallback, const std::string& where) {
    if (j.is_null()) return fallback;
    try {
        if (j.is_array()) {
            if (j.size() != 3) throw UsageError(where + " must have 3 entries (SC, SA, KG)");
            return {j[0].get<T>(), j[1].get<T>(), j[2].get<T>()};
        }
        if (j.is_object()) {
            reject_unknown(j, {"SC", "SA", "KG"}, where);
            auto out = fallback;
            for (Axis a : kAxes) {
                if (j.contains(axis_name(a))) out[index_of(a)] = j[axis_name(a)].get<T>();
            }
            return out;
        }
        const T v = j.get<T>();
        return {v, v, v};
    } catch (const json::exception&) {
        throw UsageError(where + " has the wrong type");
    }
}

inline std::filesystem::path resolve(const std::filesystem::path& base_dir, const std::string& p) {
    std::filesystem::path path(p);
    if (path.is_relative()) path = std::filesystem::absolute(base_dir / path);
    if (!std::filesystem::exists(path)) throw UsageError("referenced file '" + path.string() + "' does not exist");
    return path;
}

} // namespace detail

inline json parse_json_file(const std::filesystem::path& path) {
    const std::string text = read_file(path);
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw DataError(path.string() + ": invalid JSON at byte " + std::to_string(e.byte) + ": " + e.what());
    }
}

// ---- alignment field -------------------------------------------------------

/// Field document with the reference path inline. Numbers carry 17
/// significant digits.
inline std::string field_to_json(const AlignmentField& f) {
    std::string out = "{\"version\":1,\"dim\":" + std::to_string(f.dim()) + ",\"mode\":\"" + mode_name(f.mode()) +
                      "\",\"axes\":[";
    for (std::size_t i = 0; i < 3; ++i) {
        const auto& ax = f.axes()[i];
        if (i) out += ",";
        out += "{\"name\":" + json(ax.name).dump() + ",\"weight\":" + format_exact(ax.weight) +
               ",\"k\":" + std::to_string(ax.basis.cols()) + ",\"basis\":[";
        for (Eigen::Index r = 0; r < ax.basis.rows(); ++r) {
            for (Eigen::Index c = 0; c < ax.basis.cols(); ++c) {
                if (r || c) out += ",";
                out += format_exact(ax.basis(r, c));
            }
        }
        out += "]}";
    }
    out += "],\"reference\":[";
    const Mat& ref = f.reference().states();
    for (Eigen::Index t = 0; t < ref.cols(); ++t) {
        out += t ? ",[" : "[";
        for (Eigen::Index c = 0; c < ref.rows(); ++c) {
            if (c) out += ",";
            out += format_exact(ref(c, t));
        }
        out += "]";
    }
    out += "]}\n";
    return out;
}

inline AlignmentField field_from_json(const json& j, const std::filesystem::path& base_dir = ".") {
    const std::string where = "field";
    detail::reject_unknown(j, {"version", "dim", "mode", "axes", "reference"}, where);
    if (detail::get_or<int>(j, "version", 1, where) != 1) throw DataError("field: unsupported version");
    if (!j.contains("dim") || !j["dim"].is_number_integer()) throw DataError("field: 'dim' missing");
    const auto d = j["dim"].get<Eigen::Index>();
    if (d < 1) throw DataError("field: 'dim' must be >= 1");
    const FieldMode mode = parse_mode(detail::get_or<std::string>(j, "mode", "custom", where));

    if (!j.contains("axes") || !j["axes"].is_array() || j["axes"].size() != 3) {
        throw DataError("field: 'axes' must list exactly 3 subspaces");
    }
    std::array<AxisSubspace, 3> axes;
    for (std::size_t i = 0; i < 3; ++i) {
        const json& a = j["axes"][i];
        const std::string aw = "field.axes[" + std::to_string(i) + "]";
        detail::reject_unknown(a, {"name", "weight", "k", "basis"}, aw);
        axes[i].name = detail::get_or<std::string>(a, "name", default_axis_names()[i], aw);
        axes[i].weight = detail::get_or<double>(a, "weight", 1.0, aw);
        if (!a.contains("basis")) throw DataError(aw + ": 'basis' missing");
        const Vec flat = detail::vector_from_json(a["basis"], aw + ".basis");
        if (flat.size() == 0 || flat.size() % d != 0) {
            throw DataError(aw + ": basis has " + std::to_string(flat.size()) + " numbers, not a multiple of dim " +
                            std::to_string(d));
        }
        const Eigen::Index k = flat.size() / d;
        if (a.contains("k") && a["k"].get<Eigen::Index>() != k) throw DataError(aw + ": 'k' disagrees with basis size");
        axes[i].basis.resize(d, k);
        for (Eigen::Index r = 0; r < d; ++r)
            for (Eigen::Index c = 0; c < k; ++c) axes[i].basis(r, c) = flat[r * k + c];
    }

    if (!j.contains("reference")) throw DataError("field: 'reference' missing");
    const json& ref = j["reference"];
    Mat states;
    if (ref.is_string()) {
        const auto set = read_trajectories(detail::resolve(base_dir, ref.get<std::string>()));
        if (set.trajectories.empty()) throw DataError("field: reference container is empty");
        states = set.trajectories.front().states;
    } else if (ref.is_array()) {
        states.resize(d, static_cast<Eigen::Index>(ref.size()));
        for (std::size_t t = 0; t < ref.size(); ++t) {
            const Vec z = detail::vector_from_json(ref[t], "field.reference[" + std::to_string(t) + "]");
            if (z.size() != d) throw DataError("field.reference[" + std::to_string(t) + "] has wrong length");
            states.col(static_cast<Eigen::Index>(t)) = z;
        }
    } else {
        throw DataError("field: 'reference' must be an inline array or a container path");
    }
    if (states.rows() != d) throw DataError("field: reference dimension differs from 'dim'");
    return AlignmentField(std::move(axes), ReferencePath(std::move(states)), mode);
}

inline AlignmentField read_field(const std::filesystem::path& path) {
    return field_from_json(parse_json_file(path), path.parent_path());
}

inline void write_field(const std::filesystem::path& path, const AlignmentField& f) {
    write_file(path, field_to_json(f));
}

// ---- simulation config -----------------------------------------------------

namespace detail {

inline std::vector<double> schedule_from_json(const json& j, Eigen::Index steps, Eigen::Index onset,
                                              const std::string& where) {
    if (j.is_null()) return {};
    if (j.is_number()) return {j.get<double>()};
    if (j.is_array()) {
        const Vec v = vector_from_json(j, where);
        return {v.data(), v.data() + v.size()};
    }
    reject_unknown(j, {"constant", "ramp"}, where);
    if (j.contains("constant")) return {j["constant"].get<double>()};
    if (j.contains("ramp")) {
        const json& r = j["ramp"];
        reject_unknown(r, {"start", "slope"}, where + ".ramp");
        const double start = get_or<double>(r, "start", 0.0, where);
        const double slope = get_or<double>(r, "slope", 0.0, where);
        std::vector<double> out(static_cast<std::size_t>(steps));
        for (Eigen::Index t = 1; t <= steps; ++t) {
            out[static_cast<std::size_t>(t - 1)] = start + slope * static_cast<double>(std::max<Eigen::Index>(0, t - onset));
        }
        return out;
    }
    throw UsageError(where + " must be a number, an array, {constant} or {ramp}");
}

} // namespace detail

inline SimConfig sim_config_from_json(const json& j, const std::filesystem::path& base_dir = ".") {
    const std::string where = "sim config";
    detail::reject_unknown(j, {"dim", "steps", "success_count", "seed", "noise", "reference", "field", "drift",
                               "coefficients"},
                           where);
    SimConfig cfg;
    cfg.dim = detail::get_or<Eigen::Index>(j, "dim", cfg.dim, where);
    cfg.steps = detail::get_or<Eigen::Index>(j, "steps", cfg.steps, where);
    cfg.success_count = detail::get_or<std::size_t>(j, "success_count", cfg.success_count, where);
    cfg.seed = detail::get_or<std::uint64_t>(j, "seed", cfg.seed, where);
    cfg.noise = detail::get_or<double>(j, "noise", cfg.noise, where);

    if (j.contains("reference")) {
        const json& r = j["reference"];
        detail::reject_unknown(r, {"start", "target", "start_scale"}, "reference");
        cfg.reference.start_scale = detail::get_or<double>(r, "start_scale", 1.0, "reference");
        if (r.contains("start")) cfg.reference.start = detail::vector_from_json(r["start"], "reference.start");
        if (r.contains("target")) cfg.reference.target = detail::vector_from_json(r["target"], "reference.target");
    }
    if (j.contains("field")) {
        const json& f = j["field"];
        detail::reject_unknown(f, {"mode", "ranks", "weights", "rotate", "overlap_angle", "path"}, "field");
        cfg.field_mode = parse_mode(detail::get_or<std::string>(f, "mode", "disjoint", "field"));
        cfg.field_shape.ranks = detail::per_axis<Eigen::Index>(f.value("ranks", json()), cfg.field_shape.ranks, "field.ranks");
        cfg.field_shape.weights = detail::per_axis<double>(f.value("weights", json()), cfg.field_shape.weights, "field.weights");
        cfg.rotate = detail::get_or<bool>(f, "rotate", true, "field");
        cfg.overlap_angle = detail::get_or<double>(f, "overlap_angle", cfg.overlap_angle, "field");
        if (f.contains("path")) {
            cfg.field = std::make_shared<const AlignmentField>(
                read_field(detail::resolve(base_dir, f["path"].get<std::string>())));
            if (!j.contains("dim")) cfg.dim = cfg.field->dim();
            if (!j.contains("steps")) cfg.steps = cfg.field->steps();
        }
    }
    if (j.contains("drift")) {
        const json& d = j["drift"];
        detail::reject_unknown(d, {"SC", "SA", "KG", "direction_spread"}, "drift");
        cfg.direction_spread = detail::get_or<double>(d, "direction_spread", cfg.direction_spread, "drift");
        for (Axis a : kAxes) {
            const std::string name = axis_name(a);
            if (!d.contains(name)) continue;
            const json& ax = d[name];
            detail::reject_unknown(ax, {"onset", "schedule"}, "drift." + name);
            auto& spec = cfg.drift[index_of(a)];
            spec.onset = detail::get_or<Eigen::Index>(ax, "onset", spec.onset, "drift." + name);
            if (ax.contains("schedule")) {
                spec.schedule = detail::schedule_from_json(ax["schedule"], cfg.steps, spec.onset, "drift." + name + ".schedule");
            }
        }
    }
    if (j.contains("coefficients")) {
        const json& c = j["coefficients"];
        detail::reject_unknown(c, {"lambda", "beta"}, "coefficients");
        cfg.coefficients.lambda_gain = detail::get_or<double>(c, "lambda", 1.0, "coefficients");
        cfg.coefficients.beta = detail::get_or<double>(c, "beta", 0.0, "coefficients");
    }
    cfg.validate();
    return cfg;
}

// ---- controller config -----------------------------------------------------

inline ControllerConfig controller_config_from_json(const json& j, const std::filesystem::path& base_dir = ".") {
    const std::string where = "controller config";
    detail::reject_unknown(j, {"midpoint", "slope", "gains", "enabled", "tau_gating", "kg_bias", "operators",
                               "fixed_scaling"},
                           where);
    ControllerConfig c;
    c.midpoint = detail::get_or<double>(j, "midpoint", c.midpoint, where);
    c.slope = detail::get_or<double>(j, "slope", c.slope, where);
    c.gains = detail::per_axis<double>(j.value("gains", json()), c.gains, "controller.gains");
    c.enabled = detail::per_axis<bool>(j.value("enabled", json()), c.enabled, "controller.enabled");
    c.tau_gating = detail::per_axis<bool>(j.value("tau_gating", json()), c.tau_gating, "controller.tau_gating");
    if (j.contains("kg_bias") && !j["kg_bias"].is_null()) c.kg_bias = detail::vector_from_json(j["kg_bias"], "kg_bias");
    if (j.contains("fixed_scaling") && !j["fixed_scaling"].is_null()) c.fixed_scaling = j["fixed_scaling"].get<double>();
    if (j.contains("operators")) {
        const json& ops = j["operators"];
        detail::reject_unknown(ops, {"SC", "SA", "KG"}, "controller.operators");
        for (Axis a : kAxes) {
            if (!ops.contains(axis_name(a))) continue;
            auto op = read_operator(detail::resolve(base_dir, ops[axis_name(a)].get<std::string>()));
            if (op.axis != a) {
                throw DataError("weights file for " + axis_name(a) + " declares axis " + axis_name(op.axis));
            }
            c.operators[index_of(a)] = std::move(op);
        }
    }
    return c;
}

// ---- run config ------------------------------------------------------------

/// Either a bare simulation config, or {"sim", "controller", "thresholds",
/// "field"} with paths resolved against the config's directory.
struct RunConfig {
    SimConfig sim;
    std::optional<ControllerConfig> controller;
    std::optional<RiskThresholds> thresholds;
    json source;
};

inline RunConfig run_config_from_json(const json& j, const std::filesystem::path& base_dir = ".") {
    RunConfig rc;
    rc.source = j;
    if (!j.is_object()) throw UsageError("config must be a JSON object");
    if (!j.contains("sim")) {
        rc.sim = sim_config_from_json(j, base_dir);
        return rc;
    }
    detail::reject_unknown(j, {"sim", "controller", "thresholds", "field"}, "run config");
    json sim = j["sim"];
    if (j.contains("field")) {
        if (!sim.contains("field")) sim["field"] = json::object();
        sim["field"]["path"] = detail::resolve(base_dir, j["field"].get<std::string>()).string();
    }
    rc.sim = sim_config_from_json(sim, base_dir);
    if (j.contains("controller")) rc.controller = controller_config_from_json(j["controller"], base_dir);
    if (j.contains("thresholds")) {
        const json& t = j["thresholds"];
        detail::reject_unknown(t, {"theta", "delta"}, "thresholds");
        RiskThresholds r;
        r.theta = detail::get_or<double>(t, "theta", r.theta, "thresholds");
        r.delta = detail::get_or<double>(t, "delta", r.delta, "thresholds");
        r.validate();
        rc.thresholds = r;
    }
    return rc;
}

inline RunConfig read_run_config(const std::filesystem::path& path) {
    return run_config_from_json(parse_json_file(path), path.parent_path());
}

/// FNV-1a over the canonical (sorted-key) dump.
inline std::string config_hash(const json& j) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : j.dump()) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace arcdrift
