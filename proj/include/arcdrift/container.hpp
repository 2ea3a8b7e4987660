#pragma once

// Binary containers. Every file is framed as
//   magic[4] | version u8 (0x01) | metadata length u32 LE | UTF-8 JSON | payload
// .arct  trajectories, binary32 LE, trajectory-major, step-major, component
// .arcm  success manifold, binary64 LE, per step: mean[d] then Sigma[d*d] row-major
// .arcw  affine correction operator, binary64 LE, W[d*d] row-major then b[d]

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "arcdrift/controller.hpp"
#include "arcdrift/errors.hpp"
#include "arcdrift/manifold.hpp"
#include "arcdrift/sim.hpp"

namespace arcdrift {

using json = nlohmann::json;

inline constexpr std::uint8_t kFormatVersion = 0x01;
inline constexpr std::string_view kTrajectoryMagic = "ARCT";
inline constexpr std::string_view kManifoldMagic = "ARCM";
inline constexpr std::string_view kWeightsMagic = "ARCW";
inline constexpr std::size_t kHeaderBytes = 9;

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

inline void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

inline std::uint32_t get_u32(const std::string& in, std::size_t at) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
    return v;
}

inline std::uint64_t get_u64(const std::string& in, std::size_t at) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
    return v;
}

inline void put_f32(std::string& out, float f) { put_u32(out, std::bit_cast<std::uint32_t>(f)); }
inline void put_f64(std::string& out, double f) { put_u64(out, std::bit_cast<std::uint64_t>(f)); }
inline float get_f32(const std::string& in, std::size_t at) { return std::bit_cast<float>(get_u32(in, at)); }
inline double get_f64(const std::string& in, std::size_t at) { return std::bit_cast<double>(get_u64(in, at)); }

} // namespace detail

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path.string() + "' for reading");
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return bytes;
}

inline void write_file(const std::filesystem::path& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("failed writing '" + path.string() + "'");
}

struct Framed {
    json metadata;
    std::size_t payload_offset = 0;
};

inline std::string frame(std::string_view magic, const json& metadata) {
    const std::string meta = metadata.dump();
    std::string out(magic);
    out.push_back(static_cast<char>(kFormatVersion));
    detail::put_u32(out, static_cast<std::uint32_t>(meta.size()));
    out += meta;
    return out;
}

inline Framed unframe(const std::string& bytes, std::string_view magic, const std::string& what) {
    if (bytes.size() < kHeaderBytes) {
        throw DataError(what + ": truncated header, need " + std::to_string(kHeaderBytes) + " bytes, found " +
                        std::to_string(bytes.size()));
    }
    if (std::string_view(bytes.data(), 4) != magic) {
        throw DataError(what + ": bad magic at offset 0, expected '" + std::string(magic) + "'");
    }
    if (static_cast<std::uint8_t>(bytes[4]) != kFormatVersion) {
        throw DataError(what + ": unsupported version " + std::to_string(static_cast<unsigned char>(bytes[4])) +
                        " at offset 4");
    }
    const std::uint32_t len = detail::get_u32(bytes, 5);
    if (kHeaderBytes + static_cast<std::size_t>(len) > bytes.size()) {
        throw DataError(what + ": metadata length " + std::to_string(len) + " at offset 5 runs past end of file (" +
                        std::to_string(bytes.size()) + " bytes)");
    }
    Framed f;
    try {
        f.metadata = json::parse(bytes.begin() + kHeaderBytes, bytes.begin() + kHeaderBytes + len);
    } catch (const json::parse_error& e) {
        throw DataError(what + ": metadata JSON invalid at offset " + std::to_string(kHeaderBytes + e.byte - 1) +
                        ": " + e.what());
    }
    if (!f.metadata.is_object()) throw DataError(what + ": metadata at offset 9 is not a JSON object");
    f.payload_offset = kHeaderBytes + len;
    return f;
}

inline std::int64_t meta_int(const json& m, const char* key, const std::string& what) {
    if (!m.contains(key) || !m[key].is_number_integer()) {
        throw DataError(what + ": metadata field '" + key + "' missing or not an integer");
    }
    const auto v = m[key].get<std::int64_t>();
    if (v < 0) throw DataError(what + ": metadata field '" + key + "' is negative");
    return v;
}

inline void expect_payload(std::size_t have, std::size_t expected, std::size_t offset, const std::string& what,
                           const std::string& formula) {
    if (have != expected) {
        throw DataError(what + ": payload at offset " + std::to_string(offset) + " has " + std::to_string(have) +
                        " bytes, expected " + std::to_string(expected) + " (" + formula + ")");
    }
}

/// Trajectories with their metadata. Structural keys (dim, steps, count,
/// dtype, layout, labels, onsets, indices) are regenerated on write; any
/// other keys in `metadata` are carried through unchanged.
struct TrajectorySet {
    Eigen::Index dim = 0;
    Eigen::Index steps = 0;
    std::vector<LabeledTrajectory> trajectories;
    json metadata = json::object();

    std::vector<Trajectory> states() const { return states_of(trajectories); }
};

inline json label_json(const std::optional<Axis>& a) {
    return a ? json(axis_name(*a)) : json("none");
}

inline std::string encode_trajectories(const TrajectorySet& set) {
    json meta = set.metadata.is_object() ? set.metadata : json::object();
    meta["dim"] = set.dim;
    meta["steps"] = set.steps;
    meta["count"] = set.trajectories.size();
    meta["dtype"] = "f32";
    meta["layout"] = "trajectory,step,component";
    json labels = json::array(), onsets = json::array(), indices = json::array();
    for (const auto& t : set.trajectories) {
        if (t.states.rows() != set.dim || t.states.cols() != set.steps) {
            throw DataError("trajectory " + std::to_string(labels.size()) + " shape differs from set shape");
        }
        labels.push_back(label_json(t.label));
        onsets.push_back(t.onset ? json(*t.onset) : json(nullptr));
        indices.push_back(t.index);
    }
    meta["labels"] = std::move(labels);
    meta["onsets"] = std::move(onsets);
    meta["indices"] = std::move(indices);
    if (!meta.contains("seed") && !set.trajectories.empty()) meta["seed"] = set.trajectories.front().seed;
    if (!meta.contains("prompt_id")) meta["prompt_id"] = "";

    std::string out = frame(kTrajectoryMagic, meta);
    out.reserve(out.size() + set.trajectories.size() * static_cast<std::size_t>(set.dim * set.steps) * 4);
    for (const auto& t : set.trajectories) {
        for (Eigen::Index s = 0; s < set.steps; ++s)
            for (Eigen::Index c = 0; c < set.dim; ++c) detail::put_f32(out, static_cast<float>(t.states(c, s)));
    }
    return out;
}

inline TrajectorySet decode_trajectories(const std::string& bytes, const std::string& what = "trajectory container") {
    const Framed f = unframe(bytes, kTrajectoryMagic, what);
    const json& m = f.metadata;
    TrajectorySet set;
    set.dim = meta_int(m, "dim", what);
    set.steps = meta_int(m, "steps", what);
    const auto count = static_cast<std::size_t>(meta_int(m, "count", what));
    if (m.contains("dtype") && m["dtype"] != "f32") throw DataError(what + ": unsupported dtype " + m["dtype"].dump());
    const std::size_t expected = count * static_cast<std::size_t>(set.dim) * static_cast<std::size_t>(set.steps) * 4;
    expect_payload(bytes.size() - f.payload_offset, expected, f.payload_offset, what,
                   "count*steps*dim*4 = " + std::to_string(count) + "*" + std::to_string(set.steps) + "*" +
                       std::to_string(set.dim) + "*4");
    auto optional_array = [&](const char* key) -> const json* {
        if (!m.contains(key) || m[key].is_null()) return nullptr;
        if (!m[key].is_array() || m[key].size() != count) {
            throw DataError(what + ": metadata '" + key + "' must be an array of " + std::to_string(count) + " entries");
        }
        return &m[key];
    };
    const json* labels = optional_array("labels");
    const json* onsets = optional_array("onsets");
    const json* indices = optional_array("indices");
    const std::uint64_t seed = m.contains("seed") && m["seed"].is_number_unsigned() ? m["seed"].get<std::uint64_t>() : 0;

    set.trajectories.resize(count);
    std::size_t at = f.payload_offset;
    for (std::size_t i = 0; i < count; ++i) {
        auto& t = set.trajectories[i];
        t.seed = seed;
        try {
            t.index = indices ? (*indices)[i].get<std::uint64_t>() : i;
            if (onsets && !(*onsets)[i].is_null()) t.onset = (*onsets)[i].get<Eigen::Index>();
        } catch (const json::exception&) {
            throw DataError(what + ": malformed index or onset for trajectory " + std::to_string(i));
        }
        if (labels) {
            const auto& l = (*labels)[i];
            if (!l.is_null() && l != "none") {
                try {
                    t.label = parse_axis(l.get<std::string>());
                } catch (const std::exception&) {
                    throw DataError(what + ": bad label " + l.dump() + " for trajectory " + std::to_string(i));
                }
            }
        }
        t.states.resize(set.dim, set.steps);
        for (Eigen::Index s = 0; s < set.steps; ++s) {
            for (Eigen::Index c = 0; c < set.dim; ++c) {
                t.states(c, s) = static_cast<double>(detail::get_f32(bytes, at));
                at += 4;
            }
        }
    }
    set.metadata = m;
    return set;
}

inline void write_trajectories(const std::filesystem::path& path, const TrajectorySet& set) {
    write_file(path, encode_trajectories(set));
}

inline TrajectorySet read_trajectories(const std::filesystem::path& path) {
    return decode_trajectories(read_file(path), path.string());
}

inline TrajectorySet make_set(std::vector<LabeledTrajectory> trajectories, Eigen::Index dim, Eigen::Index steps,
                              std::uint64_t seed, std::string prompt_id = "") {
    TrajectorySet set;
    set.dim = dim;
    set.steps = steps;
    set.trajectories = std::move(trajectories);
    set.metadata = json{{"seed", seed}, {"prompt_id", std::move(prompt_id)}};
    return set;
}

inline std::string encode_manifold(const SuccessManifold& m) {
    json meta{{"kind", "manifold"},
              {"dim", m.dim()},
              {"steps", m.steps()},
              {"count", m.count()},
              {"dtype", "f64"},
              {"layout", "step:mean,covariance(row-major)"}};
    meta["epsilon"] = m.epsilon();
    std::string out = frame(kManifoldMagic, meta);
    for (Eigen::Index t = 1; t <= m.steps(); ++t) {
        for (Eigen::Index c = 0; c < m.dim(); ++c) detail::put_f64(out, m.mean(t)[c]);
        const Mat& s = m.covariance(t);
        for (Eigen::Index r = 0; r < m.dim(); ++r)
            for (Eigen::Index c = 0; c < m.dim(); ++c) detail::put_f64(out, s(r, c));
    }
    return out;
}

inline SuccessManifold decode_manifold(const std::string& bytes, const std::string& what = "manifold container") {
    const Framed f = unframe(bytes, kManifoldMagic, what);
    const json& m = f.metadata;
    const auto d = static_cast<Eigen::Index>(meta_int(m, "dim", what));
    const auto steps = static_cast<Eigen::Index>(meta_int(m, "steps", what));
    const auto count = static_cast<std::size_t>(meta_int(m, "count", what));
    if (!m.contains("epsilon") || !m["epsilon"].is_number()) {
        throw DataError(what + ": metadata field 'epsilon' missing");
    }
    const double eps = m["epsilon"].get<double>();
    const std::size_t per_step = static_cast<std::size_t>(d + d * d);
    expect_payload(bytes.size() - f.payload_offset, static_cast<std::size_t>(steps) * per_step * 8, f.payload_offset,
                   what, "steps*(dim+dim*dim)*8");
    Mat means(d, steps);
    std::vector<Mat> covs;
    covs.reserve(static_cast<std::size_t>(steps));
    std::size_t at = f.payload_offset;
    for (Eigen::Index t = 0; t < steps; ++t) {
        for (Eigen::Index c = 0; c < d; ++c, at += 8) means(c, t) = detail::get_f64(bytes, at);
        Mat s(d, d);
        for (Eigen::Index r = 0; r < d; ++r)
            for (Eigen::Index c = 0; c < d; ++c, at += 8) s(r, c) = detail::get_f64(bytes, at);
        covs.push_back(std::move(s));
    }
    return SuccessManifold(std::move(means), std::move(covs), count, eps);
}

inline void write_manifold(const std::filesystem::path& path, const SuccessManifold& m) {
    write_file(path, encode_manifold(m));
}

inline SuccessManifold read_manifold(const std::filesystem::path& path) {
    return decode_manifold(read_file(path), path.string());
}

inline std::string encode_operator(const CorrectionOperator& op) {
    const Eigen::Index d = op.matrix.rows();
    op.validate(d);
    json meta{{"axis", axis_name(op.axis)}, {"d", d}, {"dtype", "f64"}, {"layout", "matrix(row-major),offset"}};
    std::string out = frame(kWeightsMagic, meta);
    for (Eigen::Index r = 0; r < d; ++r)
        for (Eigen::Index c = 0; c < d; ++c) detail::put_f64(out, op.matrix(r, c));
    for (Eigen::Index c = 0; c < d; ++c) detail::put_f64(out, op.offset[c]);
    return out;
}

inline CorrectionOperator decode_operator(const std::string& bytes, const std::string& what = "weights file") {
    const Framed f = unframe(bytes, kWeightsMagic, what);
    const json& m = f.metadata;
    if (!m.contains("axis") || !m["axis"].is_string()) throw DataError(what + ": metadata field 'axis' missing");
    CorrectionOperator op;
    try {
        op.axis = parse_axis(m["axis"].get<std::string>());
    } catch (const UsageError& e) {
        throw DataError(what + ": " + e.what());
    }
    op.kind = OperatorKind::AffineLoaded;
    const auto d = static_cast<Eigen::Index>(meta_int(m, "d", what));
    expect_payload(bytes.size() - f.payload_offset, static_cast<std::size_t>(d * d + d) * 8, f.payload_offset, what,
                   "(d*d+d)*8");
    op.matrix.resize(d, d);
    op.offset.resize(d);
    std::size_t at = f.payload_offset;
    for (Eigen::Index r = 0; r < d; ++r)
        for (Eigen::Index c = 0; c < d; ++c, at += 8) op.matrix(r, c) = detail::get_f64(bytes, at);
    for (Eigen::Index c = 0; c < d; ++c, at += 8) op.offset[c] = detail::get_f64(bytes, at);
    return op;
}

inline void write_operator(const std::filesystem::path& path, const CorrectionOperator& op) {
    write_file(path, encode_operator(op));
}

inline CorrectionOperator read_operator(const std::filesystem::path& path) {
    return decode_operator(read_file(path), path.string());
}

} // namespace arcdrift
