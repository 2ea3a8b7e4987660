#pragma once

// Seeded synthetic generator: reference path, success trajectories and
// trajectories that drift along one tension axis according to
// Delta = Gamma(tau) * n.

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "arcdrift/errors.hpp"
#include "arcdrift/field.hpp"
#include "arcdrift/manifold.hpp"
#include "arcdrift/parallel.hpp"
#include "arcdrift/rng.hpp"
#include "arcdrift/tension.hpp"

namespace arcdrift {

/// Tension magnitude injected on one axis from `onset` onward. `schedule`
/// is empty (no drift), a single constant, or one value per step.
struct AxisDrift {
    Eigen::Index onset = 1;
    std::vector<double> schedule;

    double at(Eigen::Index t) const {
        if (schedule.empty()) return 0.0;
        if (schedule.size() == 1) return schedule[0];
        return schedule[static_cast<std::size_t>(t - 1)];
    }
};

struct ReferenceSpec {
    std::optional<Vec> start;
    std::optional<Vec> target;
    double start_scale = 1.0; // std-dev of the seeded endpoints when not given
};

struct SimConfig {
    Eigen::Index dim = 64;
    Eigen::Index steps = 50;
    std::size_t success_count = 10;
    std::uint64_t seed = 0;
    double noise = 0.002;

    ReferenceSpec reference;

    FieldMode field_mode = FieldMode::Disjoint;
    FieldShape field_shape;
    bool rotate = true;
    double overlap_angle = std::numbers::pi / 4.0;
    std::shared_ptr<const AlignmentField> field; // replaces the generated field when set

    std::array<AxisDrift, 3> drift{AxisDrift{8, {0.1}}, AxisDrift{15, {0.1}}, AxisDrift{18, {0.1}}};
    double direction_spread = 0.1;
    DriftCoefficients coefficients;

    void validate() const {
        if (dim < 1 || steps < 2) throw UsageError("simulation needs dim >= 1 and steps >= 2");
        if (!(noise >= 0.0) || !std::isfinite(noise)) throw UsageError("noise scale must be >= 0");
        if (!(direction_spread >= 0.0)) throw UsageError("direction spread must be >= 0");
        coefficients.validate();
        for (Axis a : kAxes) {
            const auto& dr = drift[index_of(a)];
            if (dr.onset < 1 || dr.onset > steps) {
                throw UsageError(axis_name(a) + " drift onset must lie in [1, " + std::to_string(steps) + "]");
            }
            if (dr.schedule.size() > 1 && static_cast<Eigen::Index>(dr.schedule.size()) != steps) {
                throw UsageError(axis_name(a) + " schedule must have 1 or " + std::to_string(steps) + " entries");
            }
            for (double v : dr.schedule) {
                if (!std::isfinite(v) || v < 0.0) {
                    throw UsageError(axis_name(a) + " schedule entries must be finite and >= 0");
                }
            }
        }
        for (const auto* v : {&reference.start, &reference.target}) {
            if (*v && (*v)->size() != dim) throw UsageError("reference endpoint length differs from dim");
        }
        if (field && (field->dim() != dim || field->steps() != steps)) {
            throw UsageError("configured field shape differs from dim/steps");
        }
    }
};

/// T=50, N=10 successes, onsets 8/15/18 for SC/SA/KG.
inline SimConfig baseline_config(std::uint64_t seed = 0) {
    SimConfig cfg;
    cfg.seed = seed;
    return cfg;
}

struct LabeledTrajectory {
    Trajectory states;                 // d x T
    std::optional<Axis> label;         // empty for success trajectories
    std::optional<Eigen::Index> onset; // injected onset step
    std::uint64_t seed = 0;
    std::uint64_t index = 0;
    std::vector<double> injected;      // per-step norm of the injected drift displacement
};

/// Linear interpolation from start to target plus a smooth perturbation of
/// amplitude `noise` that vanishes at both endpoints.
inline ReferencePath simulate_reference(const SimConfig& cfg) {
    cfg.validate();
    if (cfg.field) return cfg.field->reference();
    const Eigen::Index d = cfg.dim;
    const Eigen::Index steps = cfg.steps;
    auto endpoint = [&](const std::optional<Vec>& given, std::uint64_t idx) {
        if (given) return *given;
        auto rng = make_stream(cfg.seed, Stream::Reference, idx);
        return gaussian_vector(rng, d, cfg.reference.start_scale);
    };
    const Vec start = endpoint(cfg.reference.start, 0);
    const Vec target = endpoint(cfg.reference.target, 1);
    std::array<Vec, 3> wiggle;
    for (std::size_t j = 0; j < wiggle.size(); ++j) {
        auto rng = make_stream(cfg.seed, Stream::Reference, 2 + j);
        wiggle[j] = gaussian_vector(rng, d);
    }
    Mat states(d, steps);
    for (Eigen::Index t = 0; t < steps; ++t) {
        const double s = static_cast<double>(t) / static_cast<double>(steps - 1);
        Vec z = (1.0 - s) * start + s * target;
        if (cfg.noise > 0.0) {
            const double envelope = 4.0 * s * (1.0 - s);
            for (std::size_t j = 0; j < wiggle.size(); ++j) {
                const double k = static_cast<double>(j + 1);
                z += (cfg.noise * envelope * std::sin(k * std::numbers::pi * s) / k) * wiggle[j];
            }
        }
        states.col(t) = z;
    }
    return ReferencePath(std::move(states));
}

inline AlignmentField make_field(const SimConfig& cfg) {
    cfg.validate();
    if (cfg.field) return *cfg.field;
    ReferencePath ref = simulate_reference(cfg);
    switch (cfg.field_mode) {
    case FieldMode::Disjoint:
        return make_disjoint_field(std::move(ref), cfg.field_shape, cfg.seed, cfg.rotate);
    case FieldMode::Overlapping:
        return make_overlapping_field(std::move(ref), cfg.field_shape, cfg.seed, cfg.overlap_angle,
                                      cfg.rotate);
    case FieldMode::Custom:
        break;
    }
    throw UsageError("a custom field must be supplied explicitly");
}

namespace detail {
inline std::uint64_t drift_key(Axis a, std::uint64_t index) {
    return (static_cast<std::uint64_t>(index_of(a)) << 40) | index;
}
} // namespace detail

inline LabeledTrajectory simulate_success_one(const SimConfig& cfg, const ReferencePath& ref,
                                              std::uint64_t index) {
    LabeledTrajectory out;
    out.seed = cfg.seed;
    out.index = index;
    out.states.resize(cfg.dim, cfg.steps);
    out.injected.assign(static_cast<std::size_t>(cfg.steps), 0.0);
    for (Eigen::Index t = 1; t <= cfg.steps; ++t) {
        auto rng = make_stream(cfg.seed, Stream::SuccessNoise, index, static_cast<std::uint64_t>(t));
        out.states.col(t - 1) = ref.at(t) + gaussian_vector(rng, cfg.dim, cfg.noise);
    }
    return out;
}

/// N drift-free trajectories, each the reference plus i.i.d. per-step noise.
inline std::vector<LabeledTrajectory> simulate_success(const SimConfig& cfg) {
    cfg.validate();
    if (cfg.success_count < 2) throw UsageError("success set needs N >= 2");
    const ReferencePath ref = simulate_reference(cfg);
    std::vector<LabeledTrajectory> out(cfg.success_count);
    parallel_for(out.size(), [&](std::size_t i) { out[i] = simulate_success_one(cfg, ref, i); });
    return out;
}

inline std::vector<Trajectory> states_of(const std::vector<LabeledTrajectory>& ts) {
    std::vector<Trajectory> out;
    out.reserve(ts.size());
    for (const auto& t : ts) out.push_back(t.states);
    return out;
}

/// Unit drift direction inside the axis subspace: the axis's first basis
/// column perturbed by seeded Gaussian jitter of scale `direction_spread`.
inline Vec drift_direction(const SimConfig& cfg, const AlignmentField& field, Axis axis,
                           std::uint64_t index) {
    const Mat& basis = field.axis(axis).basis;
    auto rng = make_stream(cfg.seed, Stream::DriftDirection, detail::drift_key(axis, index));
    Vec coeff = gaussian_vector(rng, basis.cols(), cfg.direction_spread);
    coeff[0] += 1.0;
    Vec n = basis * coeff;
    const double norm = n.norm();
    if (norm == 0.0) throw NumericError("degenerate drift direction");
    return n / norm;
}

/// Maps (state before correction, step) to the corrected state.
using StepCorrector = std::function<Vec(const Vec&, Eigen::Index)>;

/// Drift rollout with an optional per-step correction applied after the
/// drift increment. The correction is folded into the persistent displacement
/// so it carries into later steps.
inline LabeledTrajectory drift_rollout(const SimConfig& cfg, const AlignmentField& field, Axis axis,
                                       std::uint64_t index, const StepCorrector& corrector = {}) {
    const auto& spec = cfg.drift[index_of(axis)];
    const std::uint64_t key = detail::drift_key(axis, index);
    const Vec direction = drift_direction(cfg, field, axis, index);

    LabeledTrajectory out;
    out.seed = cfg.seed;
    out.index = index;
    out.label = axis;
    out.onset = spec.onset;
    out.states.resize(cfg.dim, cfg.steps);
    out.injected.assign(static_cast<std::size_t>(cfg.steps), 0.0);

    Vec displacement = Vec::Zero(cfg.dim);
    for (Eigen::Index t = 1; t <= cfg.steps; ++t) {
        auto rng = make_stream(cfg.seed, Stream::DriftNoise, key, static_cast<std::uint64_t>(t));
        const Vec noise = gaussian_vector(rng, cfg.dim, cfg.noise);
        if (t >= spec.onset) {
            std::array<double, 3> tau{0.0, 0.0, 0.0};
            tau[index_of(axis)] = spec.at(t);
            const double gamma = drift_coefficient(ArcVector(tau[0], tau[1], tau[2]), cfg.coefficients);
            const Vec step = gamma * direction;
            displacement += step;
            out.injected[static_cast<std::size_t>(t - 1)] = step.norm();
        }
        Vec z = field.reference().at(t) + noise + displacement;
        if (corrector) {
            Vec corrected = corrector(z, t);
            displacement += corrected - z;
            z = std::move(corrected);
        }
        out.states.col(t - 1) = z;
    }
    return out;
}

inline LabeledTrajectory simulate_drift(const SimConfig& cfg, const AlignmentField& field, Axis axis,
                                        std::uint64_t index = 0) {
    cfg.validate();
    if (field.dim() != cfg.dim || field.steps() != cfg.steps) {
        throw DataError("field shape does not match the simulation config");
    }
    return drift_rollout(cfg, field, axis, index);
}

inline LabeledTrajectory simulate_drift(const SimConfig& cfg, Axis axis, std::uint64_t index = 0) {
    return simulate_drift(cfg, make_field(cfg), axis, index);
}

struct BifurcationSample {
    std::size_t traj_id = 0;
    Axis label = Axis::SC;
    Eigen::Index onset = 0;
    Eigen::Index bifurcation = 0;
    Vec offset;      // z_{t_b} - z_ref(t_b)
    ArcVector arc;   // field tension at t_b
};

struct UndetectedTrajectory {
    std::size_t traj_id = 0;
    Axis label = Axis::SC;
};

struct BifurcationDataset {
    std::vector<BifurcationSample> samples;
    std::vector<UndetectedTrajectory> undetected;
    std::vector<DeviationReport> reports; // one per drifting trajectory, traj_id order
};

/// Drifts counts[i] trajectories on each axis (axis-major traj_id order),
/// detects their bifurcation against `manifold`, and records the offset and
/// ARC vector at t_b. Trajectories that never cross are listed separately.
inline BifurcationDataset bifurcation_dataset(const SimConfig& cfg, const AlignmentField& field,
                                              const SuccessManifold& manifold,
                                              const std::array<std::size_t, 3>& counts,
                                              double threshold = kDefaultBifurcationThreshold) {
    cfg.validate();
    struct Job {
        Axis axis;
        std::uint64_t index;
    };
    std::vector<Job> jobs;
    for (Axis a : kAxes) {
        for (std::size_t i = 0; i < counts[index_of(a)]; ++i) jobs.push_back({a, i});
    }
    std::vector<DeviationReport> reports(jobs.size());
    std::vector<std::optional<BifurcationSample>> found(jobs.size());
    parallel_for(jobs.size(), [&](std::size_t j) {
        const auto tr = drift_rollout(cfg, field, jobs[j].axis, jobs[j].index);
        reports[j] = detect_bifurcation(manifold, tr.states, threshold);
        if (const auto tb = reports[j].bifurcation) {
            const Vec z = tr.states.col(*tb - 1);
            found[j] = BifurcationSample{j, jobs[j].axis, *tr.onset, *tb, field.offset(z, *tb),
                                         tension(field, z, *tb)};
        }
    });
    BifurcationDataset ds;
    for (std::size_t j = 0; j < jobs.size(); ++j) {
        if (found[j]) {
            ds.samples.push_back(std::move(*found[j]));
        } else {
            ds.undetected.push_back({j, jobs[j].axis});
        }
    }
    ds.reports = std::move(reports);
    return ds;
}

/// Convenience overload: field and manifold derived from the config.
inline BifurcationDataset bifurcation_dataset(const SimConfig& cfg, const std::array<std::size_t, 3>& counts,
                                              double threshold = kDefaultBifurcationThreshold,
                                              const ManifoldOptions& mopt = {}) {
    if (counts[0] + counts[1] + counts[2] == 0) {
        throw UsageError("bifurcation_dataset needs at least one requested axis");
    }
    const AlignmentField field = make_field(cfg);
    const auto success = states_of(simulate_success(cfg));
    const SuccessManifold manifold = build_manifold(success, mopt);
    return bifurcation_dataset(cfg, field, manifold, counts, threshold);
}

} // namespace arcdrift
