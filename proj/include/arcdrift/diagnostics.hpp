#pragma once

// Orthogonality diagnostics over the alignment gradients: Gram matrix,
// off-diagonal coupling ratio and the per-axis offset decomposition.

#include <array>
#include <cmath>
#include <optional>

#include <Eigen/Dense>

#include "arcdrift/errors.hpp"
#include "arcdrift/field.hpp"

namespace arcdrift {

inline constexpr double kDefaultDominanceDelta = 0.05;

struct GramReport {
    Eigen::Matrix3d gram = Eigen::Matrix3d::Zero();
    double rho = 0.0;        // sum_{i!=j} |G_ij| / trace(G)
    double rho_signed = 0.0; // sum_{i!=j} G_ij / trace(G)
    bool degenerate = false; // zero trace; rho values are reported as 0
};

inline GramReport gram_from_gradients(const std::array<Vec, 3>& grads) {
    GramReport r;
    for (int i = 0; i < 3; ++i) {
        for (int j = i; j < 3; ++j) {
            const double v = grads[static_cast<std::size_t>(i)].dot(grads[static_cast<std::size_t>(j)]);
            r.gram(i, j) = v;
            r.gram(j, i) = v;
        }
    }
    const double trace = r.gram.trace();
    if (trace == 0.0) {
        r.degenerate = true;
        return r;
    }
    double abs_off = 0.0;
    double signed_off = 0.0;
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            if (i == j) continue;
            abs_off += std::abs(r.gram(i, j));
            signed_off += r.gram(i, j);
        }
    }
    r.rho = abs_off / trace;
    r.rho_signed = signed_off / trace;
    return r;
}

inline GramReport gram_matrix(const AlignmentField& field, const VecRef& z, Eigen::Index t) {
    return gram_from_gradients(tension_gradients(field, z, t));
}

/// rho < delta (strict). A degenerate report has no meaningful ratio.
inline bool check_diagonal_dominance(const GramReport& report, double delta = kDefaultDominanceDelta) {
    if (report.degenerate) throw UsageError("diagonal dominance is undefined for a zero-gradient Gram matrix");
    if (!(delta > 0.0)) throw UsageError("dominance delta must be > 0");
    return report.rho < delta;
}

struct OffsetDecomposition {
    std::array<double, 3> coefficients{};          // ||P_i P_i^T dr||
    std::array<std::optional<Vec>, 3> directions;  // canonical e_i, empty when the projection vanishes
    Vec residual;                                  // dr - sum_i P_i P_i^T dr
    double residual_norm = 0.0;
};

inline OffsetDecomposition decompose_offset(const VecRef& delta_r, const AlignmentField& field, Eigen::Index t) {
    if (delta_r.size() != field.dim()) {
        throw DataError("offset has length " + std::to_string(delta_r.size()) + ", field expects " +
                        std::to_string(field.dim()));
    }
    if (t < 1 || t > field.steps()) throw DataError("step " + std::to_string(t) + " outside field range");
    OffsetDecomposition out;
    out.residual = delta_r;
    for (Axis a : kAxes) {
        const Vec p = project(field, a, delta_r);
        const double n = p.norm();
        out.coefficients[index_of(a)] = n;
        if (n > 0.0) out.directions[index_of(a)] = Vec(p / n);
        out.residual -= p;
    }
    out.residual_norm = out.residual.norm();
    return out;
}

} // namespace arcdrift
