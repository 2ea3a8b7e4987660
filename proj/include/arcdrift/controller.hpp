#pragma once

// Closed-loop tension modulator: z <- z + lambda(|tau|) * sum_i F_i(z, tau_i),
// with lambda a logistic of the ARC magnitude and F_i axis-restoring operators.

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "arcdrift/errors.hpp"
#include "arcdrift/field.hpp"
#include "arcdrift/manifold.hpp"
#include "arcdrift/parallel.hpp"
#include "arcdrift/sim.hpp"
#include "arcdrift/tension.hpp"

namespace arcdrift {

enum class OperatorKind { LinearRestoring, AffineLoaded };

/// F_i. LinearRestoring: -g_i P_i P_i^T (z - z_ref(t)). AffineLoaded:
/// W (z - z_ref(t)) + b with W, b read from a weights file.
struct CorrectionOperator {
    Axis axis = Axis::SC;
    OperatorKind kind = OperatorKind::LinearRestoring;
    Mat matrix;
    Vec offset;

    void validate(Eigen::Index d) const {
        if (kind != OperatorKind::AffineLoaded) return;
        if (matrix.rows() != d || matrix.cols() != d || offset.size() != d) {
            throw DataError(axis_name(axis) + " operator shape does not match latent dimension " +
                            std::to_string(d));
        }
        if (!matrix.allFinite() || !offset.allFinite()) {
            throw DataError(axis_name(axis) + " operator has non-finite weights");
        }
    }
};

struct ControllerConfig {
    double midpoint = 1.0;
    double slope = 0.5;
    std::array<double, 3> gains{0.5, 0.5, 0.5};
    std::array<bool, 3> enabled{true, true, true};
    Vec kg_bias;                                 // empty = zero
    std::array<bool, 3> tau_gating{false, false, false}; // multiply F_i by tau_i
    std::array<std::optional<CorrectionOperator>, 3> operators; // affine overrides
    std::optional<double> fixed_scaling;         // bypasses the logistic when set

    void validate(Eigen::Index d) const {
        if (!(slope > 0.0) || !std::isfinite(slope) || !std::isfinite(midpoint)) {
            throw UsageError("controller slope must be > 0 and midpoint finite");
        }
        for (double g : gains) {
            if (!(g >= 0.0) || !std::isfinite(g)) throw UsageError("controller gains must be finite and >= 0");
        }
        if (kg_bias.size() != 0 && kg_bias.size() != d) {
            throw DataError("kg bias has length " + std::to_string(kg_bias.size()) + ", expected " +
                            std::to_string(d));
        }
        for (const auto& op : operators) {
            if (op) op->validate(d);
        }
    }
};

/// logistic((magnitude - x0) / s), in (0, 1) and strictly increasing.
inline double scaling(double magnitude, const ControllerConfig& cfg) {
    if (!(magnitude >= 0.0)) throw UsageError("tension magnitude must be >= 0");
    return 1.0 / (1.0 + std::exp(-(magnitude - cfg.midpoint) / cfg.slope));
}

struct CorrectionTrace {
    ArcVector tension;
    double scaling = 0.0;
};

inline Vec correct(const VecRef& z, Eigen::Index t, const AlignmentField& field,
                   const ControllerConfig& cfg, CorrectionTrace* trace = nullptr) {
    cfg.validate(field.dim());
    const ArcVector tau = tension(field, z, t);
    const double lambda = cfg.fixed_scaling ? *cfg.fixed_scaling : scaling(magnitude(tau), cfg);
    if (trace) *trace = {tau, lambda};

    const Vec dr = z - field.reference().at(t);
    Vec total = Vec::Zero(field.dim());
    for (Axis a : kAxes) {
        const std::size_t i = index_of(a);
        if (!cfg.enabled[i]) continue;
        Vec f;
        if (const auto& op = cfg.operators[i]; op && op->kind == OperatorKind::AffineLoaded) {
            f = op->matrix * dr + op->offset;
        } else {
            f = -cfg.gains[i] * project(field, a, dr);
        }
        if (a == Axis::KG && cfg.kg_bias.size() != 0) f += tau.kg() * cfg.kg_bias;
        if (cfg.tau_gating[i]) f *= tau[a];
        total += f;
    }
    return z + lambda * total;
}

struct ClosedLoopResult {
    LabeledTrajectory trajectory;
    std::vector<ArcVector> tensions; // sensed before each correction
    std::vector<double> scalings;
};

/// Replays simulate_drift with identical random streams and applies
/// correct() after each drift step.
inline ClosedLoopResult run_closed_loop(const SimConfig& cfg, const AlignmentField& field, Axis axis,
                                        const ControllerConfig& ctrl, std::uint64_t index = 0) {
    cfg.validate();
    ctrl.validate(field.dim());
    ClosedLoopResult out;
    out.tensions.reserve(static_cast<std::size_t>(cfg.steps));
    out.scalings.reserve(static_cast<std::size_t>(cfg.steps));
    out.trajectory = drift_rollout(cfg, field, axis, index, [&](const Vec& z, Eigen::Index t) {
        CorrectionTrace trace;
        Vec next = correct(z, t, field, ctrl, &trace);
        out.tensions.push_back(trace.tension);
        out.scalings.push_back(trace.scaling);
        return next;
    });
    return out;
}

inline ClosedLoopResult run_closed_loop(const SimConfig& cfg, Axis axis, const ControllerConfig& ctrl,
                                        std::uint64_t index = 0) {
    return run_closed_loop(cfg, make_field(cfg), axis, ctrl, index);
}

struct AblationRow {
    std::string mask;
    std::array<bool, 3> enabled{};
    double mean_terminal_distance = 0.0;
    double mean_terminal_tension = 0.0; // ||tau||_2 at the last step
    double exceed_fraction = 0.0;
    std::array<double, 3> own_axis_distance{};  // mean terminal D of trajectories drifting on axis i
    std::array<double, 3> own_axis_tension{};   // mean terminal tau_i of trajectories drifting on axis i
};

/// The four cumulative masks: none, SC, SC+SA, SC+SA+KG.
inline std::vector<std::pair<std::string, std::array<bool, 3>>> ablation_masks() {
    return {{"none", {false, false, false}},
            {"SC", {true, false, false}},
            {"SC+SA", {true, true, false}},
            {"SC+SA+KG", {true, true, true}}};
}

/// Evaluates every mask over `per_axis` drifting trajectories on each axis
/// (trajectory indices 0..per_axis-1), with the manifold built from the
/// config's success set.
inline std::vector<AblationRow> ablation_run(const SimConfig& cfg, const ControllerConfig& ctrl,
                                             std::size_t per_axis = 20,
                                             double threshold = kDefaultBifurcationThreshold) {
    cfg.validate();
    if (per_axis < 1) throw UsageError("ablation needs at least one trajectory per axis");
    const AlignmentField field = make_field(cfg);
    ctrl.validate(field.dim());
    const SuccessManifold manifold = build_manifold(states_of(simulate_success(cfg)));
    const Eigen::Index last = cfg.steps;

    std::vector<AblationRow> rows;
    for (const auto& [name, mask] : ablation_masks()) {
        ControllerConfig c = ctrl;
        c.enabled = mask;
        const std::size_t n = 3 * per_axis;
        std::vector<double> dist(n), mag(n), own(n);
        std::vector<char> exceeded(n);
        parallel_for(n, [&](std::size_t j) {
            const Axis axis = kAxes[j / per_axis];
            const auto res = run_closed_loop(cfg, field, axis, c, j % per_axis);
            const auto report = detect_bifurcation(manifold, res.trajectory.states, threshold);
            const ArcVector tau = tension(field, res.trajectory.states.col(last - 1), last);
            dist[j] = report.distances.back();
            mag[j] = magnitude(tau);
            own[j] = tau[axis];
            exceeded[j] = report.bifurcation.has_value();
        });
        AblationRow row;
        row.mask = name;
        row.enabled = mask;
        for (std::size_t j = 0; j < n; ++j) {
            const std::size_t a = j / per_axis;
            row.mean_terminal_distance += dist[j];
            row.mean_terminal_tension += mag[j];
            row.exceed_fraction += exceeded[j] ? 1.0 : 0.0;
            row.own_axis_distance[a] += dist[j];
            row.own_axis_tension[a] += own[j];
        }
        const double total = static_cast<double>(n);
        row.mean_terminal_distance /= total;
        row.mean_terminal_tension /= total;
        row.exceed_fraction /= total;
        for (std::size_t a = 0; a < 3; ++a) {
            row.own_axis_distance[a] /= static_cast<double>(per_axis);
            row.own_axis_tension[a] /= static_cast<double>(per_axis);
        }
        rows.push_back(row);
    }
    return rows;
}

} // namespace arcdrift
