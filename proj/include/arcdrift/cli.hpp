#pragma once

// Command-line surface. run_cli() is the whole tool minus main(), so tests can
// drive it in-process with captured streams.

#include <array>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "arcdrift/cluster.hpp"
#include "arcdrift/config.hpp"
#include "arcdrift/container.hpp"
#include "arcdrift/controller.hpp"
#include "arcdrift/diagnostics.hpp"
#include "arcdrift/errors.hpp"
#include "arcdrift/field.hpp"
#include "arcdrift/manifold.hpp"
#include "arcdrift/report.hpp"
#include "arcdrift/sim.hpp"
#include "arcdrift/tension.hpp"

namespace arcdrift {

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitNumeric = 3 };

namespace cli {

struct Streams {
    std::ostream& out;
    std::ostream& err;
};

/// Writes to `path`, or to the output stream when the path is empty or "-".
inline void emit(const Streams& io, const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        io.out << text;
    } else {
        write_file(path, text);
    }
}

inline Provenance provenance(std::uint64_t seed, const json& params) { return {seed, config_hash(params)}; }

inline RunConfig load_run(const std::string& path, std::optional<std::uint64_t> seed) {
    RunConfig rc;
    if (path.empty()) {
        rc.sim = baseline_config();
        rc.source = json::object();
    } else {
        rc = read_run_config(path);
    }
    if (seed) rc.sim.seed = *seed;
    return rc;
}

inline std::vector<Axis> axes_from(const std::string& s) {
    if (s.empty() || s == "all") return {kAxes.begin(), kAxes.end()};
    return {parse_axis(s)};
}

// ---- simulate ----------------------------------------------------------------

struct SimulateArgs {
    std::string config, out, set = "mixed", axis = "all", field_out, prompt_id = "sim";
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> count;
};

inline int simulate(const SimulateArgs& a, const Streams& io) {
    const RunConfig rc = load_run(a.config, a.seed);
    const SimConfig& cfg = rc.sim;
    const AlignmentField field = make_field(cfg);
    std::vector<LabeledTrajectory> out;
    if (a.set == "reference") {
        LabeledTrajectory ref;
        ref.states = field.reference().states();
        ref.seed = cfg.seed;
        ref.injected.assign(static_cast<std::size_t>(cfg.steps), 0.0);
        out.push_back(std::move(ref));
    } else {
        if (a.set == "success" || a.set == "mixed") {
            SimConfig c = cfg;
            if (a.count && a.set == "success") c.success_count = *a.count;
            auto s = simulate_success(c);
            out.insert(out.end(), s.begin(), s.end());
        }
        if (a.set == "drift" || a.set == "mixed") {
            const std::size_t n = a.count.value_or(1);
            const auto axes = axes_from(a.axis);
            std::vector<LabeledTrajectory> drift(axes.size() * n);
            parallel_for(drift.size(), [&](std::size_t j) {
                drift[j] = simulate_drift(cfg, field, axes[j / n], j % n);
            });
            out.insert(out.end(), drift.begin(), drift.end());
        }
        if (a.set != "success" && a.set != "drift" && a.set != "mixed") {
            throw UsageError("--set must be success, drift, mixed or reference");
        }
    }
    TrajectorySet set = make_set(std::move(out), cfg.dim, cfg.steps, cfg.seed, a.prompt_id);
    if (a.out.empty()) throw UsageError("simulate needs --out");
    write_trajectories(a.out, set);
    if (!a.field_out.empty()) write_field(a.field_out, field);
    io.out << "wrote " << set.trajectories.size() << " trajectories\n";
    return kExitOk;
}

// ---- manifold / detect ---------------------------------------------------------

struct ManifoldArgs {
    std::string in, out;
    double epsilon = kDefaultLoading;
    double shrinkage = 0.0;
    bool success_only = true;
};

inline int manifold(const ManifoldArgs& a, const Streams& io) {
    const TrajectorySet set = read_trajectories(a.in);
    std::vector<Trajectory> states;
    for (const auto& t : set.trajectories) {
        if (!a.success_only || !t.label) states.push_back(t.states);
    }
    const SuccessManifold m = build_manifold(states, ManifoldOptions{a.epsilon, a.shrinkage});
    write_manifold(a.out, m);
    io.out << "manifold from " << states.size() << " trajectories\n";
    return kExitOk;
}

struct DetectArgs {
    std::string manifold, in, out, distances_out;
    double threshold = kDefaultBifurcationThreshold;
};

inline int detect(const DetectArgs& a, const Streams& io) {
    const SuccessManifold m = read_manifold(a.manifold);
    const TrajectorySet set = read_trajectories(a.in);
    std::vector<DeviationReport> reports(set.trajectories.size());
    parallel_for(reports.size(), [&](std::size_t i) {
        reports[i] = detect_bifurcation(m, set.trajectories[i].states, a.threshold);
    });
    const Provenance p = provenance(set.metadata.value("seed", std::uint64_t{0}),
                                    json{{"command", "detect"}, {"threshold", a.threshold}});
    CsvWriter csv(p, {"traj_id", "label", "onset", "t_b", "max_distance"});
    for (std::size_t i = 0; i < reports.size(); ++i) {
        const auto& tr = set.trajectories[i];
        double peak = 0.0;
        for (double d : reports[i].distances) peak = std::max(peak, d);
        csv.cell(static_cast<std::uint64_t>(i)).cell(tr.label ? axis_name(*tr.label) : std::string("none"));
        if (tr.onset) {
            csv.cell(static_cast<std::int64_t>(*tr.onset));
        } else {
            csv.empty();
        }
        if (reports[i].bifurcation) {
            csv.cell(static_cast<std::int64_t>(*reports[i].bifurcation));
        } else {
            csv.empty();
        }
        csv.cell(peak).end_row();
    }
    emit(io, a.out, csv.str());
    if (!a.distances_out.empty()) {
        CsvWriter d(p, {"traj_id", "t", "distance"});
        for (std::size_t i = 0; i < reports.size(); ++i) {
            for (std::size_t t = 0; t < reports[i].distances.size(); ++t) {
                d.cell(static_cast<std::uint64_t>(i)).cell(static_cast<std::uint64_t>(t + 1));
                d.cell(reports[i].distances[t]).end_row();
            }
        }
        d.save(a.distances_out);
    }
    return kExitOk;
}

// ---- arc / calibrate-theta / diagnose ------------------------------------------

struct ArcArgs {
    std::string field, in, out;
    std::optional<double> theta;
    double delta = RiskThresholds{}.delta;
};

inline int arc(const ArcArgs& a, const Streams& io) {
    const AlignmentField field = read_field(a.field);
    const TrajectorySet set = read_trajectories(a.in);
    json params{{"command", "arc"}, {"delta", a.delta}};
    if (a.theta) params["theta"] = *a.theta;
    const Provenance p = provenance(set.metadata.value("seed", std::uint64_t{0}), params);
    if (!a.theta) {
        emit(io, a.out, arc_series(field, set, p).str());
        return kExitOk;
    }
    const RiskThresholds risk{*a.theta, a.delta};
    risk.validate();
    if (set.dim != field.dim() || set.steps != field.steps()) {
        throw DataError("trajectories do not match the field shape");
    }
    CsvWriter csv(p, {"traj_id", "t", "tau_sc", "tau_sa", "tau_kg", "magnitude", "variance", "skew_sc", "skew_sa",
                      "skew_kg", "risk"});
    for (std::size_t i = 0; i < set.trajectories.size(); ++i) {
        for (Eigen::Index t = 1; t <= set.steps; ++t) {
            const ArcVector tau = tension(field, set.trajectories[i].states.col(t - 1), t);
            const TensionSummary s = summarize(tau);
            csv.cell(static_cast<std::uint64_t>(i)).cell(static_cast<std::int64_t>(t));
            csv.cell(tau.sc()).cell(tau.sa()).cell(tau.kg()).cell(s.magnitude).cell(s.variance);
            csv.cell(s.skew[0]).cell(s.skew[1]).cell(s.skew[2]).cell(risk_name(risk_flag(s, risk)));
            csv.end_row();
        }
    }
    emit(io, a.out, csv.str());
    return kExitOk;
}

struct CalibrateArgs {
    std::string field, in;
    double percentile = 95.0;
    bool success_only = true;
};

inline int calibrate(const CalibrateArgs& a, const Streams& io) {
    const AlignmentField field = read_field(a.field);
    const TrajectorySet set = read_trajectories(a.in);
    std::vector<double> mags;
    for (const auto& tr : set.trajectories) {
        if (a.success_only && tr.label) continue;
        for (Eigen::Index t = 1; t <= set.steps; ++t) mags.push_back(magnitude(tension(field, tr.states.col(t - 1), t)));
    }
    io.out << format_number(calibrate_theta(mags, a.percentile)) << "\n";
    return kExitOk;
}

struct DiagnoseArgs {
    std::string field, in, out;
    double delta = kDefaultDominanceDelta;
};

inline int diagnose(const DiagnoseArgs& a, const Streams& io) {
    const AlignmentField field = read_field(a.field);
    const TrajectorySet set = read_trajectories(a.in);
    if (set.dim != field.dim() || set.steps != field.steps()) {
        throw DataError("trajectories do not match the field shape");
    }
    const Provenance p = provenance(set.metadata.value("seed", std::uint64_t{0}),
                                    json{{"command", "diagnose"}, {"delta", a.delta}});
    std::vector<std::string> cols{"traj_id", "t"};
    for (Axis r : kAxes) {
        for (Axis c : kAxes) cols.push_back("g_" + axis_name(r) + "_" + axis_name(c));
    }
    for (const char* c : {"rho", "rho_signed", "dominant", "degenerate"}) cols.emplace_back(c);
    CsvWriter csv(p, cols);
    for (std::size_t i = 0; i < set.trajectories.size(); ++i) {
        for (Eigen::Index t = 1; t <= set.steps; ++t) {
            const GramReport g = gram_matrix(field, set.trajectories[i].states.col(t - 1), t);
            csv.cell(static_cast<std::uint64_t>(i)).cell(static_cast<std::int64_t>(t));
            for (int r = 0; r < 3; ++r) {
                for (int c = 0; c < 3; ++c) csv.cell(g.gram(r, c));
            }
            if (g.degenerate) {
                csv.empty().empty().empty().cell(true);
            } else {
                csv.cell(g.rho).cell(g.rho_signed).cell(check_diagonal_dominance(g, a.delta)).cell(false);
            }
            csv.end_row();
        }
    }
    emit(io, a.out, csv.str());
    return kExitOk;
}

// ---- control / ablate ------------------------------------------------------------

struct ControlArgs {
    std::string config, ctrl, axis = "all", out, series, summary;
    std::optional<std::uint64_t> seed;
    std::size_t count = 1;
    double threshold = kDefaultBifurcationThreshold;
};

inline ControllerConfig load_controller(const RunConfig& rc, const std::string& path) {
    if (!path.empty()) return controller_config_from_json(parse_json_file(path), std::filesystem::path(path).parent_path());
    return rc.controller.value_or(ControllerConfig{});
}

inline json run_params(const RunConfig& rc, const std::string& ctrl_path, json extra) {
    extra["config"] = rc.source;
    if (!ctrl_path.empty()) extra["controller"] = parse_json_file(ctrl_path);
    return extra;
}

inline int control(const ControlArgs& a, const Streams& io) {
    const RunConfig rc = load_run(a.config, a.seed);
    const SimConfig& cfg = rc.sim;
    const ControllerConfig ctrl = load_controller(rc, a.ctrl);
    if (a.count < 1) throw UsageError("--count must be >= 1");
    const AlignmentField field = make_field(cfg);
    const SuccessManifold m = build_manifold(states_of(simulate_success(cfg)));
    const auto axes = axes_from(a.axis);
    const std::size_t n = axes.size() * a.count;

    std::vector<ClosedLoopResult> closed(n);
    std::vector<double> open_d(n), closed_d(n);
    parallel_for(n, [&](std::size_t j) {
        const Axis axis = axes[j / a.count];
        const std::uint64_t idx = j % a.count;
        closed[j] = run_closed_loop(cfg, field, axis, ctrl, idx);
        const auto open = drift_rollout(cfg, field, axis, idx);
        open_d[j] = mahalanobis(m, open.states.col(cfg.steps - 1), cfg.steps);
        closed_d[j] = mahalanobis(m, closed[j].trajectory.states.col(cfg.steps - 1), cfg.steps);
    });

    const Provenance p = provenance(cfg.seed, run_params(rc, a.ctrl, {{"command", "control"}, {"axis", a.axis},
                                                                       {"count", a.count}}));
    if (!a.out.empty()) {
        std::vector<LabeledTrajectory> trajs;
        for (const auto& c : closed) trajs.push_back(c.trajectory);
        TrajectorySet set = make_set(std::move(trajs), cfg.dim, cfg.steps, cfg.seed, "closed-loop");
        write_trajectories(a.out, set);
    }
    if (!a.series.empty()) {
        CsvWriter csv(p, {"traj_id", "t", "tau_sc", "tau_sa", "tau_kg", "magnitude", "scaling"});
        for (std::size_t j = 0; j < n; ++j) {
            for (std::size_t t = 0; t < closed[j].tensions.size(); ++t) {
                const ArcVector& tau = closed[j].tensions[t];
                csv.cell(static_cast<std::uint64_t>(j)).cell(static_cast<std::uint64_t>(t + 1));
                csv.cell(tau.sc()).cell(tau.sa()).cell(tau.kg()).cell(magnitude(tau)).cell(closed[j].scalings[t]);
                csv.end_row();
            }
        }
        csv.save(a.series);
    }
    CsvWriter sum(p, {"traj_id", "axis", "open_distance", "closed_distance", "reduction"});
    for (std::size_t j = 0; j < n; ++j) {
        const double red = open_d[j] > 0.0 ? 1.0 - closed_d[j] / open_d[j] : 0.0;
        sum.cell(static_cast<std::uint64_t>(j)).cell(axis_name(axes[j / a.count]));
        sum.cell(open_d[j]).cell(closed_d[j]).cell(red).end_row();
    }
    emit(io, a.summary, sum.str());
    return kExitOk;
}

struct AblateArgs {
    std::string config, ctrl, out;
    std::optional<std::uint64_t> seed;
    std::size_t per_axis = 20;
    double threshold = kDefaultBifurcationThreshold;
};

inline int ablate(const AblateArgs& a, const Streams& io) {
    const RunConfig rc = load_run(a.config, a.seed);
    const ControllerConfig ctrl = load_controller(rc, a.ctrl);
    const auto rows = ablation_run(rc.sim, ctrl, a.per_axis, a.threshold);
    const Provenance p = provenance(rc.sim.seed, run_params(rc, a.ctrl, {{"command", "ablate"},
                                                                          {"per_axis", a.per_axis},
                                                                          {"threshold", a.threshold}}));
    CsvWriter csv(p, {"mask", "mean_terminal_distance", "mean_terminal_tension", "exceed_fraction", "own_distance_sc",
                      "own_distance_sa", "own_distance_kg", "own_tension_sc", "own_tension_sa", "own_tension_kg"});
    for (const auto& r : rows) {
        csv.cell(r.mask).cell(r.mean_terminal_distance).cell(r.mean_terminal_tension).cell(r.exceed_fraction);
        for (double v : r.own_axis_distance) csv.cell(v);
        for (double v : r.own_axis_tension) csv.cell(v);
        csv.end_row();
    }
    emit(io, a.out, csv.str());
    return kExitOk;
}

// ---- cluster -------------------------------------------------------------------

struct ClusterArgs {
    std::string in, out, assignments, label = "label";
    std::vector<std::string> features;
    std::size_t k = 3;
    std::size_t restarts = 20;
    std::uint64_t seed = 0;
    std::size_t max_iterations = 300;
    std::optional<Eigen::Index> pca_dims;
};

inline int cluster(const ClusterArgs& a, const Streams& io) {
    const FeatureTable ft = feature_table(parse_csv(read_file(a.in), a.in), a.features, a.label, a.in);
    Mat data = ft.features;
    if (a.pca_dims) data = pca(data, *a.pca_dims).projected;
    const ClusterRun run = kmeans(data, static_cast<Eigen::Index>(a.k), KMeansOptions{a.restarts, a.seed, a.max_iterations});
    const Partition& pred = run.assignment;

    json params{{"command", "cluster"}, {"k", a.k}, {"restarts", a.restarts}, {"features", a.features},
                {"label", a.label}, {"max_iterations", a.max_iterations}};
    if (a.pca_dims) params["pca"] = *a.pca_dims;
    const Provenance p = provenance(a.seed, params);
    CsvWriter csv(p, {"n", "k", "ari", "nmi", "acc", "silhouette", "inertia", "best_restart"});
    csv.cell(static_cast<std::uint64_t>(data.rows())).cell(static_cast<std::uint64_t>(a.k));
    if (ft.truth) {
        csv.cell(ari(pred, *ft.truth)).cell(nmi(pred, *ft.truth));
        if (std::max(pred.k(), ft.truth->k()) <= kMaxMatchedClusters) {
            csv.cell(hungarian_accuracy(pred, *ft.truth));
        } else {
            csv.empty();
        }
    } else {
        csv.empty().empty().empty();
    }
    try {
        csv.cell(silhouette(data, pred));
    } catch (const UsageError&) {
        csv.empty();
    }
    csv.cell(run.inertia).cell(static_cast<std::uint64_t>(run.best_restart)).end_row();
    emit(io, a.out, csv.str());

    if (!a.assignments.empty()) {
        CsvWriter as(p, {"row", "cluster", "label"});
        for (std::size_t i = 0; i < pred.size(); ++i) {
            as.cell(static_cast<std::uint64_t>(i)).cell(pred[i]);
            if (ft.truth) {
                as.cell(ft.truth_names[static_cast<std::size_t>((*ft.truth)[i])]);
            } else {
                as.empty();
            }
            as.end_row();
        }
        as.save(a.assignments);
    }
    return kExitOk;
}

// ---- report --------------------------------------------------------------------

struct ReportArgs {
    std::string config, out, summary;
    std::optional<std::uint64_t> seed;
    std::size_t per_axis = 100;
    double threshold = kDefaultBifurcationThreshold;
};

/// Bifurcation dataset as a feature CSV (offset and ARC vector at t_b) plus a
/// deviation summary over all drifting trajectories.
inline int report(const ReportArgs& a, const Streams& io) {
    const RunConfig rc = load_run(a.config, a.seed);
    const SimConfig& cfg = rc.sim;
    const AlignmentField field = make_field(cfg);
    const SuccessManifold m = build_manifold(states_of(simulate_success(cfg)));
    const auto ds = bifurcation_dataset(cfg, field, m, {a.per_axis, a.per_axis, a.per_axis}, a.threshold);
    const Provenance p = provenance(cfg.seed, run_params(rc, "", {{"command", "report"}, {"per_axis", a.per_axis},
                                                                  {"threshold", a.threshold}}));
    std::vector<std::string> cols{"traj_id", "label", "onset", "t_b", "tau_sc", "tau_sa", "tau_kg"};
    for (Eigen::Index i = 0; i < cfg.dim; ++i) cols.push_back("dr_" + std::to_string(i));
    CsvWriter csv(p, cols);
    for (const auto& s : ds.samples) {
        csv.cell(static_cast<std::uint64_t>(s.traj_id)).cell(axis_name(s.label));
        csv.cell(static_cast<std::int64_t>(s.onset)).cell(static_cast<std::int64_t>(s.bifurcation));
        csv.cell(s.arc.sc()).cell(s.arc.sa()).cell(s.arc.kg());
        for (Eigen::Index i = 0; i < s.offset.size(); ++i) csv.cell(s.offset[i]);
        csv.end_row();
    }
    emit(io, a.out, csv.str());

    const DeviationStats st = deviation_stats(ds.reports);
    CsvWriter sum(p, {"total", "exceeded", "exceed_fraction", "mean_tb", "std_tb", "undetected"});
    sum.cell(static_cast<std::uint64_t>(st.total)).cell(static_cast<std::uint64_t>(st.exceeded)).cell(st.exceed_fraction);
    if (st.mean_tb) {
        sum.cell(*st.mean_tb).cell(*st.std_tb);
    } else {
        sum.empty().empty();
    }
    sum.cell(static_cast<std::uint64_t>(ds.undetected.size())).end_row();
    if (!a.summary.empty()) {
        sum.save(a.summary);
    } else if (!a.out.empty()) {
        io.out << sum.str();
    }
    return kExitOk;
}

} // namespace cli

/// Parses `args` (without the program name) and runs one subcommand.
inline int run_cli(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    const cli::Streams io{out, err};
    CLI::App app{"Trajectory drift toolkit: simulate, detect, measure tension, control and cluster.", "arcdrift"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kToolVersion));

    cli::SimulateArgs sim;
    auto* s = app.add_subcommand("simulate", "Generate seeded trajectories into an .arct file");
    s->add_option("--config", sim.config, "run or simulation config JSON");
    s->add_option("--out", sim.out, "output .arct")->required();
    s->add_option("--seed", sim.seed, "override the config seed");
    s->add_option("--set", sim.set, "success | drift | mixed | reference")->capture_default_str();
    s->add_option("--axis", sim.axis, "SC | SA | KG | all (drift sets)")->capture_default_str();
    s->add_option("--count", sim.count, "trajectories per axis (drift) or success count");
    s->add_option("--field-out", sim.field_out, "also write the alignment field JSON");
    s->add_option("--prompt-id", sim.prompt_id, "metadata prompt_id")->capture_default_str();

    cli::ManifoldArgs man;
    auto* m = app.add_subcommand("manifold", "Build per-step success statistics into an .arcm file");
    m->add_option("--in", man.in, "success .arct")->required();
    m->add_option("--out", man.out, "output .arcm")->required();
    m->add_option("--epsilon", man.epsilon, "diagonal loading")->capture_default_str();
    m->add_option("--shrinkage", man.shrinkage, "shrink toward the diagonal, in [0,1]")->capture_default_str();
    m->add_flag("!--all-trajectories", man.success_only, "include labeled drift trajectories too");

    cli::DetectArgs det;
    auto* d = app.add_subcommand("detect", "First step where the Mahalanobis distance exceeds the threshold");
    d->add_option("--manifold", det.manifold, ".arcm file")->required();
    d->add_option("--in", det.in, "trajectories .arct")->required();
    d->add_option("--threshold", det.threshold, "distance threshold")->capture_default_str();
    d->add_option("--out", det.out, "CSV of t_b per trajectory (default stdout)");
    d->add_option("--distances-out", det.distances_out, "CSV of every D_t");

    cli::ArcArgs arcs;
    auto* ar = app.add_subcommand("arc", "Per-step tension vectors and summaries");
    ar->add_option("--field", arcs.field, "field JSON")->required();
    ar->add_option("--in", arcs.in, "trajectories .arct")->required();
    ar->add_option("--out", arcs.out, "CSV (default stdout)");
    ar->add_option("--theta", arcs.theta, "magnitude threshold; adds a risk column");
    ar->add_option("--delta", arcs.delta, "variance threshold for the risk column")->capture_default_str();

    cli::ControlArgs ctl;
    auto* c = app.add_subcommand("control", "Closed-loop runs against their open-loop twins");
    c->add_option("--config", ctl.config, "run config JSON");
    c->add_option("--ctrl", ctl.ctrl, "controller JSON (overrides the run config)");
    c->add_option("--seed", ctl.seed, "override the config seed");
    c->add_option("--axis", ctl.axis, "SC | SA | KG | all")->capture_default_str();
    c->add_option("--count", ctl.count, "trajectories per axis")->capture_default_str();
    c->add_option("--out", ctl.out, "closed-loop trajectories .arct");
    c->add_option("--series", ctl.series, "CSV of sensed tension and scaling per step");
    c->add_option("--summary", ctl.summary, "terminal distance CSV (default stdout)");

    cli::AblateArgs abl;
    auto* ab = app.add_subcommand("ablate", "Cumulative submodule ablation table");
    ab->add_option("--config", abl.config, "run config JSON");
    ab->add_option("--ctrl", abl.ctrl, "controller JSON");
    ab->add_option("--seed", abl.seed, "override the config seed");
    ab->add_option("--per-axis", abl.per_axis, "trajectories per drift axis")->capture_default_str();
    ab->add_option("--threshold", abl.threshold, "distance threshold")->capture_default_str();
    ab->add_option("--out", abl.out, "CSV (default stdout)");

    cli::ClusterArgs clu;
    auto* cl = app.add_subcommand("cluster", "k-means over a feature CSV with external and internal scores");
    cl->add_option("--in", clu.in, "feature CSV with a header row")->required();
    cl->add_option("--k", clu.k, "cluster count")->capture_default_str();
    cl->add_option("--restarts", clu.restarts, "k-means++ restarts")->capture_default_str();
    cl->add_option("--seed", clu.seed, "restart seed")->capture_default_str();
    cl->add_option("--max-iterations", clu.max_iterations, "Lloyd iteration cap")->capture_default_str();
    cl->add_option("--features", clu.features, "column names or prefix* patterns")->delimiter(',');
    cl->add_option("--label", clu.label, "ground-truth column")->capture_default_str();
    cl->add_option("--pca", clu.pca_dims, "project onto this many components first");
    cl->add_option("--out", clu.out, "metrics CSV (default stdout)");
    cl->add_option("--assignments", clu.assignments, "per-row cluster CSV");

    cli::DiagnoseArgs dia;
    auto* dg = app.add_subcommand("diagnose", "Gram matrix of tension gradients per step");
    dg->add_option("--field", dia.field, "field JSON")->required();
    dg->add_option("--in", dia.in, "trajectories .arct")->required();
    dg->add_option("--delta", dia.delta, "dominance bound on rho")->capture_default_str();
    dg->add_option("--out", dia.out, "CSV (default stdout)");

    cli::CalibrateArgs cal;
    auto* ca = app.add_subcommand("calibrate-theta", "Percentile of tension magnitude over success trajectories");
    ca->add_option("--field", cal.field, "field JSON")->required();
    ca->add_option("--in", cal.in, "trajectories .arct")->required();
    ca->add_option("--percentile", cal.percentile, "percentile in [0,100]")->capture_default_str();
    ca->add_flag("!--all-trajectories", cal.success_only, "include labeled drift trajectories too");

    cli::ReportArgs rep;
    auto* r = app.add_subcommand("report", "Bifurcation feature dataset and deviation summary");
    r->add_option("--config", rep.config, "run config JSON");
    r->add_option("--seed", rep.seed, "override the config seed");
    r->add_option("--per-axis", rep.per_axis, "drifting trajectories per axis")->capture_default_str();
    r->add_option("--threshold", rep.threshold, "distance threshold")->capture_default_str();
    r->add_option("--out", rep.out, "dataset CSV (default stdout)");
    r->add_option("--summary", rep.summary, "deviation summary CSV");

    std::vector<std::string> argv(args.rbegin(), args.rend());
    try {
        app.parse(argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::CallForVersion&) {
        out << kToolVersion << "\n";
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n";
        err << app.help();
        return kExitUsage;
    }

    try {
        if (*s) return cli::simulate(sim, io);
        if (*m) return cli::manifold(man, io);
        if (*d) return cli::detect(det, io);
        if (*ar) return cli::arc(arcs, io);
        if (*c) return cli::control(ctl, io);
        if (*ab) return cli::ablate(abl, io);
        if (*cl) return cli::cluster(clu, io);
        if (*dg) return cli::diagnose(dia, io);
        if (*ca) return cli::calibrate(cal, io);
        if (*r) return cli::report(rep, io);
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const DataError& e) {
        err << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const NumericError& e) {
        err << "numeric error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitNumeric;
    }
    return kExitUsage;
}

} // namespace arcdrift
