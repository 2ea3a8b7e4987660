#pragma once

// Tri-orthogonal alignment subspaces, reference path and the quadratic
// per-axis potentials A_i(z, t) = 1/2 w_i ||B_i^T (z - z_ref(t))||^2 whose
// gradient norms are the tensions.

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "arcdrift/errors.hpp"
#include "arcdrift/rng.hpp"
#include "arcdrift/tension.hpp"
#include "arcdrift/types.hpp"

namespace arcdrift {

inline constexpr double kOrthonormalTol = 1e-10;

/// A step-indexed path of latent vectors, stored column-per-step (d x T).
/// Steps are 1-based throughout the public API.
class ReferencePath {
public:
    ReferencePath() = default;
    explicit ReferencePath(Mat states) : states_(std::move(states)) {
        if (states_.cols() < 2) throw DataError("reference path needs at least 2 steps");
        if (states_.rows() < 1) throw DataError("reference path needs dimension >= 1");
        if (!states_.allFinite()) throw DataError("reference path has non-finite entries");
    }

    Eigen::Index dim() const { return states_.rows(); }
    Eigen::Index steps() const { return states_.cols(); }
    auto at(Eigen::Index t) const { return states_.col(t - 1); }
    const Mat& states() const { return states_; }

private:
    Mat states_;
};

struct AxisSubspace {
    std::string name;
    double weight = 1.0;
    Mat basis; // d x k, orthonormal columns
};

enum class FieldMode { Disjoint, Overlapping, Custom };

inline std::string mode_name(FieldMode m) {
    switch (m) {
    case FieldMode::Disjoint: return "disjoint";
    case FieldMode::Overlapping: return "overlapping";
    case FieldMode::Custom: return "custom";
    }
    return "custom";
}

inline FieldMode parse_mode(const std::string& s) {
    if (s == "disjoint") return FieldMode::Disjoint;
    if (s == "overlapping") return FieldMode::Overlapping;
    if (s == "custom") return FieldMode::Custom;
    throw UsageError("unknown field mode '" + s + "'");
}

class AlignmentField {
public:
    AlignmentField(std::array<AxisSubspace, 3> axes, ReferencePath reference,
                   FieldMode mode = FieldMode::Custom)
        : axes_(std::move(axes)), reference_(std::move(reference)), mode_(mode) {
        validate();
    }

    Eigen::Index dim() const { return reference_.dim(); }
    Eigen::Index steps() const { return reference_.steps(); }
    const AxisSubspace& axis(Axis a) const { return axes_[index_of(a)]; }
    const std::array<AxisSubspace, 3>& axes() const { return axes_; }
    const ReferencePath& reference() const { return reference_; }
    FieldMode mode() const { return mode_; }

    void check(const VecRef& z, Eigen::Index t) const {
        if (z.size() != dim()) {
            throw DataError("latent has length " + std::to_string(z.size()) + ", field expects " +
                            std::to_string(dim()));
        }
        if (t < 1 || t > steps()) {
            throw DataError("step " + std::to_string(t) + " outside [1, " + std::to_string(steps()) +
                            "]");
        }
    }

    Vec offset(const VecRef& z, Eigen::Index t) const {
        check(z, t);
        return z - reference_.at(t);
    }

private:
    void validate() const {
        Eigen::Index total = 0;
        for (const auto& ax : axes_) {
            if (ax.basis.rows() != dim()) {
                throw DataError("axis '" + ax.name + "' basis has " + std::to_string(ax.basis.rows()) +
                                " rows, expected " + std::to_string(dim()));
            }
            if (ax.basis.cols() < 1) throw DataError("axis '" + ax.name + "' basis is empty");
            if (!(ax.weight > 0.0) || !std::isfinite(ax.weight)) {
                throw DataError("axis '" + ax.name + "' weight must be finite and > 0");
            }
            const Mat gram = ax.basis.transpose() * ax.basis;
            const double err =
                (gram - Mat::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff();
            if (!(err <= kOrthonormalTol)) {
                throw DataError("axis '" + ax.name + "' basis is not orthonormal (max error " +
                                std::to_string(err) + ")");
            }
            total += ax.basis.cols();
        }
        if (total > dim()) throw DataError("sum of subspace ranks exceeds the latent dimension");
        if (mode_ == FieldMode::Disjoint) {
            for (std::size_t i = 0; i < 3; ++i) {
                for (std::size_t j = i + 1; j < 3; ++j) {
                    const double cross =
                        (axes_[i].basis.transpose() * axes_[j].basis).cwiseAbs().maxCoeff();
                    if (cross > kOrthonormalTol) {
                        throw DataError("disjoint field has coupled axes " + axes_[i].name + "/" +
                                        axes_[j].name);
                    }
                }
            }
        }
    }

    std::array<AxisSubspace, 3> axes_;
    ReferencePath reference_;
    FieldMode mode_;
};

/// P_i P_i^T v.
inline Vec project(const AlignmentField& f, Axis a, const VecRef& v) {
    const Mat& b = f.axis(a).basis;
    return b * (b.transpose() * v);
}

inline double potential(const AlignmentField& f, const VecRef& z, Eigen::Index t, Axis a) {
    const Vec dr = f.offset(z, t);
    const auto& ax = f.axis(a);
    return 0.5 * ax.weight * (ax.basis.transpose() * dr).squaredNorm();
}

inline ArcVector tension(const AlignmentField& f, const VecRef& z, Eigen::Index t) {
    const Vec dr = f.offset(z, t);
    std::array<double, 3> tau{};
    for (Axis a : kAxes) {
        const auto& ax = f.axis(a);
        tau[index_of(a)] = ax.weight * (ax.basis.transpose() * dr).norm();
    }
    return {tau[0], tau[1], tau[2]};
}

inline std::array<Vec, 3> tension_gradients(const AlignmentField& f, const VecRef& z,
                                            Eigen::Index t) {
    const Vec dr = f.offset(z, t);
    std::array<Vec, 3> g;
    for (Axis a : kAxes) g[index_of(a)] = f.axis(a).weight * project(f, a, dr);
    return g;
}

/// Unit vector along the axis-i projection of an offset; empty when the
/// projection vanishes.
inline std::optional<Vec> canonical_direction(const AlignmentField& f, Axis a, const VecRef& delta_r) {
    if (delta_r.size() != f.dim()) throw DataError("offset length does not match field dimension");
    Vec p = project(f, a, delta_r);
    const double n = p.norm();
    if (n == 0.0) return std::nullopt;
    return Vec(p / n);
}

struct FieldShape {
    std::array<Eigen::Index, 3> ranks{8, 8, 8};
    std::array<double, 3> weights{1.0, 1.0, 1.0};
};

inline std::array<std::string, 3> default_axis_names() { return {"SC", "SA", "KG"}; }

/// Partition of coordinate axes after a seeded random rotation (identity
/// when rotate is false). Cross-axis columns are exactly orthogonal.
inline AlignmentField make_disjoint_field(ReferencePath reference, const FieldShape& shape,
                                          std::uint64_t seed, bool rotate = true) {
    const Eigen::Index d = reference.dim();
    const Eigen::Index total = shape.ranks[0] + shape.ranks[1] + shape.ranks[2];
    if (total > d) throw UsageError("sum of subspace ranks exceeds the latent dimension");
    Mat q = Mat::Identity(d, d);
    if (rotate) {
        auto rng = make_stream(seed, Stream::Basis);
        q = random_orthogonal(rng, d);
    }
    const auto names = default_axis_names();
    std::array<AxisSubspace, 3> axes;
    Eigen::Index col = 0;
    for (std::size_t i = 0; i < 3; ++i) {
        axes[i] = {names[i], shape.weights[i], q.middleCols(col, shape.ranks[i])};
        col += shape.ranks[i];
    }
    return AlignmentField(std::move(axes), std::move(reference), FieldMode::Disjoint);
}

/// Like the disjoint field, except SA's first column is tilted toward SC's
/// first column so the two subspaces share one principal angle `angle`
/// (radians; pi/2 recovers the disjoint layout). Needs one spare column.
inline AlignmentField make_overlapping_field(ReferencePath reference, const FieldShape& shape,
                                             std::uint64_t seed, double angle, bool rotate = true) {
    const Eigen::Index d = reference.dim();
    const Eigen::Index total = shape.ranks[0] + shape.ranks[1] + shape.ranks[2];
    if (total + 1 > d) throw UsageError("overlapping field needs one spare dimension beyond the ranks");
    Mat q = Mat::Identity(d, d);
    if (rotate) {
        auto rng = make_stream(seed, Stream::Basis);
        q = random_orthogonal(rng, d);
    }
    const auto names = default_axis_names();
    std::array<AxisSubspace, 3> axes;
    Eigen::Index col = 0;
    for (std::size_t i = 0; i < 3; ++i) {
        axes[i] = {names[i], shape.weights[i], q.middleCols(col, shape.ranks[i])};
        col += shape.ranks[i];
    }
    const Vec shared = q.col(0);
    const Vec spare = q.col(total);
    axes[1].basis.col(0) = std::cos(angle) * shared + std::sin(angle) * spare;
    return AlignmentField(std::move(axes), std::move(reference), FieldMode::Overlapping);
}

} // namespace arcdrift
