#pragma once

// Per-step Gaussian success manifolds, Mahalanobis deviation series and
// first-crossing bifurcation detection.

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>
#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "arcdrift/errors.hpp"
#include "arcdrift/field.hpp"

namespace arcdrift {

inline constexpr double kDefaultLoading = 1e-4;
inline constexpr double kDefaultBifurcationThreshold = 3.0;

/// Per-step mean and loaded covariance of a success set. Immutable once
/// built; the Cholesky factors are computed at construction.
class SuccessManifold {
public:
    SuccessManifold(Mat means, std::vector<Mat> covariances, std::size_t count, double epsilon)
        : means_(std::move(means)), covs_(std::move(covariances)), count_(count), epsilon_(epsilon) {
        if (count_ < 2) throw UsageError("success manifold needs N >= 2 trajectories");
        if (!(epsilon_ > 0.0)) throw UsageError("diagonal loading epsilon must be > 0");
        if (static_cast<std::size_t>(means_.cols()) != covs_.size()) {
            throw DataError("manifold mean/covariance step counts differ");
        }
        factors_.reserve(covs_.size());
        for (std::size_t t = 0; t < covs_.size(); ++t) {
            const Mat& s = covs_[t];
            if (s.rows() != dim() || s.cols() != dim()) {
                throw DataError("covariance at step " + std::to_string(t + 1) + " has wrong shape");
            }
            if ((s - s.transpose()).cwiseAbs().maxCoeff() > 1e-10) {
                throw NumericError("covariance at step " + std::to_string(t + 1) + " is not symmetric");
            }
            Eigen::LLT<Mat> llt(s);
            if (llt.info() != Eigen::Success) {
                throw NumericError("covariance at step " + std::to_string(t + 1) +
                                   " is not positive definite");
            }
            factors_.push_back(std::move(llt));
        }
    }

    Eigen::Index dim() const { return means_.rows(); }
    Eigen::Index steps() const { return means_.cols(); }
    std::size_t count() const { return count_; }
    double epsilon() const { return epsilon_; }
    auto mean(Eigen::Index t) const { return means_.col(t - 1); }
    const Mat& covariance(Eigen::Index t) const { return covs_[static_cast<std::size_t>(t - 1)]; }
    const Eigen::LLT<Mat>& factor(Eigen::Index t) const {
        return factors_[static_cast<std::size_t>(t - 1)];
    }
    const Mat& means() const { return means_; }

private:
    Mat means_;
    std::vector<Mat> covs_;
    std::vector<Eigen::LLT<Mat>> factors_;
    std::size_t count_;
    double epsilon_;
};

struct ManifoldOptions {
    double epsilon = kDefaultLoading;
    // Convex blend toward the diagonal before loading; 0 disables.
    double shrinkage = 0.0;
};

/// Mean and biased (divisor N) covariance per step, then Sigma + eps*I.
inline SuccessManifold build_manifold(std::span<const Trajectory> trajectories,
                                      const ManifoldOptions& opt = {}) {
    const std::size_t n = trajectories.size();
    if (n < 2) throw UsageError("success manifold needs N >= 2 trajectories, got " + std::to_string(n));
    if (!(opt.epsilon > 0.0)) throw UsageError("diagonal loading epsilon must be > 0");
    if (!(opt.shrinkage >= 0.0 && opt.shrinkage <= 1.0)) throw UsageError("shrinkage must lie in [0, 1]");
    const Eigen::Index d = trajectories[0].rows();
    const Eigen::Index steps = trajectories[0].cols();
    for (std::size_t i = 1; i < n; ++i) {
        if (trajectories[i].rows() != d || trajectories[i].cols() != steps) {
            throw DataError("trajectory " + std::to_string(i) + " is " +
                            std::to_string(trajectories[i].rows()) + "x" +
                            std::to_string(trajectories[i].cols()) + ", expected " + std::to_string(d) +
                            "x" + std::to_string(steps));
        }
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    // Shifted by the first trajectory so identical inputs reproduce it exactly.
    const Trajectory& pivot = trajectories[0];
    Mat means = Mat::Zero(d, steps);
    for (const auto& tr : trajectories) means += tr - pivot;
    means = pivot + means * inv_n;

    std::vector<Mat> covs;
    covs.reserve(static_cast<std::size_t>(steps));
    Mat centered(d, static_cast<Eigen::Index>(n));
    for (Eigen::Index t = 0; t < steps; ++t) {
        for (std::size_t i = 0; i < n; ++i) {
            centered.col(static_cast<Eigen::Index>(i)) = trajectories[i].col(t) - means.col(t);
        }
        Mat s = centered * centered.transpose() * inv_n;
        s = 0.5 * (s + s.transpose()).eval();
        if (opt.shrinkage > 0.0) {
            const Vec diag = s.diagonal();
            s *= (1.0 - opt.shrinkage);
            s.diagonal() += opt.shrinkage * diag;
        }
        s.diagonal().array() += opt.epsilon;
        covs.push_back(std::move(s));
    }
    return SuccessManifold(std::move(means), std::move(covs), n, opt.epsilon);
}

/// sqrt((z - mu_t)^T Sigma_t^{-1} (z - mu_t)) through the Cholesky factor.
inline double mahalanobis(const SuccessManifold& m, const VecRef& z, Eigen::Index t) {
    if (z.size() != m.dim()) {
        throw DataError("latent has length " + std::to_string(z.size()) + ", manifold expects " +
                        std::to_string(m.dim()));
    }
    if (t < 1 || t > m.steps()) throw DataError("step " + std::to_string(t) + " outside manifold range");
    const Vec diff = z - m.mean(t);
    const Vec y = m.factor(t).matrixL().solve(diff);
    return y.norm();
}

struct DeviationReport {
    std::vector<double> distances;                // D_1..D_T
    std::optional<Eigen::Index> bifurcation;      // 1-based first step with D_t > threshold
    double threshold = kDefaultBifurcationThreshold;
};

inline DeviationReport detect_bifurcation(const SuccessManifold& m, const Trajectory& traj,
                                          double threshold = kDefaultBifurcationThreshold) {
    if (!(threshold > 0.0)) throw UsageError("bifurcation threshold must be > 0");
    if (traj.rows() != m.dim() || traj.cols() != m.steps()) {
        throw DataError("trajectory is " + std::to_string(traj.rows()) + "x" +
                        std::to_string(traj.cols()) + ", manifold is " + std::to_string(m.dim()) + "x" +
                        std::to_string(m.steps()));
    }
    DeviationReport r;
    r.threshold = threshold;
    r.distances.reserve(static_cast<std::size_t>(m.steps()));
    for (Eigen::Index t = 1; t <= m.steps(); ++t) {
        const double d = mahalanobis(m, traj.col(t - 1), t);
        r.distances.push_back(d);
        if (!r.bifurcation && d > threshold) r.bifurcation = t;
    }
    return r;
}

struct DeviationStats {
    std::size_t total = 0;
    std::size_t exceeded = 0;
    double exceed_fraction = 0.0;
    std::optional<double> mean_tb;
    std::optional<double> std_tb; // divisor n over the present t_b values
};

inline DeviationStats deviation_stats(std::span<const DeviationReport> reports) {
    if (reports.empty()) throw UsageError("deviation_stats needs at least one report");
    DeviationStats s;
    s.total = reports.size();
    double sum = 0.0;
    for (const auto& r : reports) {
        if (r.bifurcation) {
            ++s.exceeded;
            sum += static_cast<double>(*r.bifurcation);
        }
    }
    s.exceed_fraction = static_cast<double>(s.exceeded) / static_cast<double>(s.total);
    if (s.exceeded > 0) {
        const double mean = sum / static_cast<double>(s.exceeded);
        double sq = 0.0;
        for (const auto& r : reports) {
            if (r.bifurcation) {
                const double dv = static_cast<double>(*r.bifurcation) - mean;
                sq += dv * dv;
            }
        }
        s.mean_tb = mean;
        s.std_tb = std::sqrt(sq / static_cast<double>(s.exceeded));
    }
    return s;
}

/// Distance threshold q with P(chi2_d <= q^2) = confidence. The fixed 3.0
/// rule matches 99.73% only in one dimension; this picks a d-consistent q.
inline double chi_threshold(Eigen::Index dim, double confidence) {
    if (dim < 1) throw UsageError("dimension must be >= 1");
    if (!(confidence > 0.0 && confidence < 1.0)) throw UsageError("confidence must lie in (0, 1)");
    boost::math::chi_squared dist(static_cast<double>(dim));
    return std::sqrt(boost::math::quantile(dist, confidence));
}

} // namespace arcdrift
