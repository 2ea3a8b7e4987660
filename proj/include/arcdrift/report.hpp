#pragma once

// CSV emission and feature-table ingestion. Output uses '.' decimals via
// std::to_chars, LF line endings, and a leading '#' provenance line.

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "arcdrift/cluster.hpp"
#include "arcdrift/container.hpp"
#include "arcdrift/errors.hpp"
#include "arcdrift/field.hpp"
#include "arcdrift/tension.hpp"

namespace arcdrift {

inline constexpr std::string_view kToolVersion = "0.1.0";

inline std::string format_number(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

struct Provenance {
    std::uint64_t seed = 0;
    std::string config_hash = "none";
};

/// Row-oriented CSV builder; cells are appended as already-formatted text.
class CsvWriter {
public:
    CsvWriter(const Provenance& p, std::vector<std::string> columns) : columns_(columns.size()) {
        out_ << "# arcdrift " << kToolVersion << " seed=" << p.seed << " config=" << p.config_hash << "\n";
        for (std::size_t i = 0; i < columns.size(); ++i) out_ << (i ? "," : "") << columns[i];
        out_ << "\n";
    }

    CsvWriter& cell(const std::string& s) {
        out_ << (used_++ ? "," : "") << s;
        return *this;
    }
    CsvWriter& cell(double v) { return cell(format_number(v)); }
    CsvWriter& cell(std::int64_t v) { return cell(std::to_string(v)); }
    CsvWriter& cell(std::uint64_t v) { return cell(std::to_string(v)); }
    CsvWriter& cell(int v) { return cell(std::to_string(v)); }
    CsvWriter& cell(bool v) { return cell(std::string(v ? "1" : "0")); }
    CsvWriter& empty() { return cell(std::string()); }

    void end_row() {
        if (used_ != columns_) {
            throw std::logic_error("CSV row has " + std::to_string(used_) + " cells, expected " +
                                   std::to_string(columns_));
        }
        out_ << "\n";
        used_ = 0;
        ++rows_;
    }

    std::size_t rows() const { return rows_; }
    std::string str() const { return out_.str(); }
    void save(const std::filesystem::path& path) const { write_file(path, out_.str()); }

private:
    std::ostringstream out_;
    std::size_t columns_;
    std::size_t used_ = 0;
    std::size_t rows_ = 0;
};

/// One row per (trajectory, step) with the tension triple and its summary.
inline CsvWriter arc_series(const AlignmentField& field, const TrajectorySet& set, const Provenance& p,
                            const SummaryOptions& opt = {}) {
    if (set.dim != field.dim() || set.steps != field.steps()) {
        throw DataError("trajectories are " + std::to_string(set.dim) + "x" + std::to_string(set.steps) +
                        " but field is " + std::to_string(field.dim()) + "x" + std::to_string(field.steps()));
    }
    CsvWriter csv(p, {"traj_id", "t", "tau_sc", "tau_sa", "tau_kg", "magnitude", "variance", "skew_sc", "skew_sa",
                      "skew_kg"});
    for (std::size_t i = 0; i < set.trajectories.size(); ++i) {
        const auto& tr = set.trajectories[i].states;
        for (Eigen::Index t = 1; t <= set.steps; ++t) {
            const ArcVector tau = tension(field, tr.col(t - 1), t);
            const TensionSummary s = summarize(tau, opt);
            csv.cell(static_cast<std::uint64_t>(i)).cell(static_cast<std::int64_t>(t));
            csv.cell(tau.sc()).cell(tau.sa()).cell(tau.kg()).cell(s.magnitude).cell(s.variance);
            csv.cell(s.skew[0]).cell(s.skew[1]).cell(s.skew[2]);
            csv.end_row();
        }
    }
    return csv;
}

inline void emit_arc_series(const AlignmentField& field, const TrajectorySet& set, const std::filesystem::path& out,
                            const Provenance& p = {}) {
    arc_series(field, set, p).save(out);
}

/// A parsed CSV table: header names plus string cells. Lines starting with
/// '#' are comments.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::optional<std::size_t> column(const std::string& name) const {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (header[i] == name) return i;
        }
        return std::nullopt;
    }
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            cells.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    cells.push_back(cur);
    return cells;
}

inline CsvTable parse_csv(const std::string& text, const std::string& what = "csv") {
    CsvTable table;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        auto cells = split_csv_line(line);
        if (table.header.empty()) {
            table.header = std::move(cells);
            continue;
        }
        if (cells.size() != table.header.size()) {
            throw DataError(what + ": line " + std::to_string(lineno) + " has " + std::to_string(cells.size()) +
                            " cells, header has " + std::to_string(table.header.size()));
        }
        table.rows.push_back(std::move(cells));
    }
    if (table.header.empty()) throw DataError(what + ": no header row");
    return table;
}

inline double parse_number(const std::string& s, const std::string& where) {
    double v = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    if (first != last && *first == '+') ++first;
    auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc() || res.ptr != last) throw DataError(where + ": '" + s + "' is not a number");
    return v;
}

struct FeatureTable {
    Mat features;                         // n x m
    std::vector<std::string> names;
    std::optional<Partition> truth;
    std::vector<std::string> truth_names; // label text per truth index
};

/// Numeric feature matrix from a CSV. `feature_columns` selects columns by
/// name or by "prefix*"; empty means every column except the label and the
/// bookkeeping columns (traj_id, t, t_b, onset).
inline FeatureTable feature_table(const CsvTable& table, const std::vector<std::string>& feature_columns,
                                  const std::string& label_column = "label", const std::string& what = "features") {
    FeatureTable ft;
    std::vector<std::size_t> picked;
    auto matches = [](const std::string& name, const std::string& pattern) {
        if (!pattern.empty() && pattern.back() == '*') {
            return name.rfind(pattern.substr(0, pattern.size() - 1), 0) == 0;
        }
        return name == pattern;
    };
    if (feature_columns.empty()) {
        for (std::size_t i = 0; i < table.header.size(); ++i) {
            const auto& h = table.header[i];
            if (h == label_column || h == "traj_id" || h == "t" || h == "t_b" || h == "onset") continue;
            picked.push_back(i);
        }
    } else {
        for (const auto& pat : feature_columns) {
            bool any = false;
            for (std::size_t i = 0; i < table.header.size(); ++i) {
                if (matches(table.header[i], pat)) {
                    picked.push_back(i);
                    any = true;
                }
            }
            if (!any) throw UsageError(what + ": no column matches '" + pat + "'");
        }
    }
    if (picked.empty()) throw DataError(what + ": no feature columns");
    ft.features.resize(static_cast<Eigen::Index>(table.rows.size()), static_cast<Eigen::Index>(picked.size()));
    for (std::size_t j = 0; j < picked.size(); ++j) ft.names.push_back(table.header[picked[j]]);
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        for (std::size_t j = 0; j < picked.size(); ++j) {
            ft.features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) =
                parse_number(table.rows[r][picked[j]], what + " row " + std::to_string(r + 1));
        }
    }
    if (const auto lc = table.column(label_column); lc && !table.rows.empty()) {
        std::map<std::string, int> ids;
        for (const auto& row : table.rows) ids.emplace(row[*lc], 0);
        int next = 0;
        for (auto& [name, id] : ids) {
            id = next++;
            ft.truth_names.push_back(name);
        }
        std::vector<int> labels;
        labels.reserve(table.rows.size());
        for (const auto& row : table.rows) labels.push_back(ids.at(row[*lc]));
        ft.truth = Partition(std::move(labels), ids.size());
    }
    return ft;
}

} // namespace arcdrift
