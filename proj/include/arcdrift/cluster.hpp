#pragma once

// PCA, k-means and the clustering agreement metrics (ARI, NMI, matched
// accuracy, silhouette). Data matrices are n x m with one sample per row.

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "arcdrift/errors.hpp"
#include "arcdrift/parallel.hpp"
#include "arcdrift/rng.hpp"
#include "arcdrift/types.hpp"

namespace arcdrift {

/// Cluster or class assignment with labels in [0, k).
class Partition {
public:
    Partition() = default;
    explicit Partition(std::vector<int> labels) : labels_(std::move(labels)) {
        if (labels_.empty()) throw UsageError("partition must have at least one element");
        int hi = 0;
        for (int l : labels_) {
            if (l < 0) throw UsageError("partition labels must be >= 0");
            hi = std::max(hi, l);
        }
        k_ = static_cast<std::size_t>(hi) + 1;
    }
    Partition(std::vector<int> labels, std::size_t k) : labels_(std::move(labels)), k_(k) {
        if (labels_.empty()) throw UsageError("partition must have at least one element");
        for (int l : labels_) {
            if (l < 0 || static_cast<std::size_t>(l) >= k_) {
                throw UsageError("partition label " + std::to_string(l) + " outside [0, " +
                                 std::to_string(k_) + ")");
            }
        }
    }

    std::size_t size() const { return labels_.size(); }
    std::size_t k() const { return k_; }
    int operator[](std::size_t i) const { return labels_[i]; }
    const std::vector<int>& labels() const { return labels_; }

    friend bool operator==(const Partition&, const Partition&) = default;

private:
    std::vector<int> labels_;
    std::size_t k_ = 0;
};

struct PcaResult {
    Mat projected;              // n x q
    Mat components;             // m x q, unit columns
    Vec mean;                   // length m
    Vec explained_ratio;        // all m ratios, nonincreasing
};

/// Mean-centered PCA from the sample covariance (divisor n-1). Component
/// signs are fixed so each component's largest-magnitude entry is positive.
inline PcaResult pca(const Mat& data, Eigen::Index q) {
    const Eigen::Index n = data.rows();
    const Eigen::Index m = data.cols();
    if (n < 2) throw UsageError("pca needs at least 2 samples");
    if (q < 1 || q > std::min(n, m)) {
        throw UsageError("pca components must lie in [1, " + std::to_string(std::min(n, m)) + "]");
    }
    PcaResult r;
    r.mean = data.colwise().mean().transpose();
    const Mat centered = data.rowwise() - r.mean.transpose();
    const Mat cov = (centered.transpose() * centered) / static_cast<double>(n - 1);
    Eigen::SelfAdjointEigenSolver<Mat> eig(cov);
    if (eig.info() != Eigen::Success) throw NumericError("pca eigendecomposition failed");
    Vec values = eig.eigenvalues().reverse().cwiseMax(0.0);
    Mat vectors = eig.eigenvectors().rowwise().reverse();
    const double total = values.sum();
    r.explained_ratio = total > 0.0 ? Vec(values / total) : Vec(Vec::Constant(m, 1.0 / static_cast<double>(m)));
    r.components = vectors.leftCols(q);
    for (Eigen::Index j = 0; j < q; ++j) {
        Eigen::Index arg = 0;
        r.components.col(j).cwiseAbs().maxCoeff(&arg);
        if (r.components(arg, j) < 0.0) r.components.col(j) = -r.components.col(j);
    }
    r.projected = centered * r.components;
    return r;
}

struct ClusterRun {
    Partition assignment;
    Mat centroids;              // k x m
    double inertia = 0.0;
    std::size_t restarts = 0;
    std::size_t best_restart = 0;
    std::uint64_t seed = 0;
};

struct KMeansOptions {
    std::size_t restarts = 20;
    std::uint64_t seed = 0;
    std::size_t max_iterations = 300;
};

inline double assignment_cost(const Mat& data, const std::vector<int>& labels, const Mat& centroids) {
    double cost = 0.0;
    for (Eigen::Index i = 0; i < data.rows(); ++i) {
        cost += (data.row(i) - centroids.row(labels[static_cast<std::size_t>(i)])).squaredNorm();
    }
    return cost;
}

namespace detail {

inline int nearest(const Mat& data, Eigen::Index i, const Mat& centroids) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
        const double d = (data.row(i) - centroids.row(c)).squaredNorm();
        if (d < best_d) {
            best_d = d;
            best = static_cast<int>(c);
        }
    }
    return best;
}

inline Mat kmeanspp_seed(const Mat& data, Eigen::Index k, std::mt19937_64& rng) {
    const Eigen::Index n = data.rows();
    Mat centroids(k, data.cols());
    std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
    centroids.row(0) = data.row(pick(rng));
    std::vector<double> d2(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
    for (Eigen::Index c = 1; c < k; ++c) {
        double total = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            auto& v = d2[static_cast<std::size_t>(i)];
            v = std::min(v, (data.row(i) - centroids.row(c - 1)).squaredNorm());
            total += v;
        }
        Eigen::Index chosen = 0;
        if (total > 0.0) {
            std::discrete_distribution<Eigen::Index> dist(d2.begin(), d2.end());
            chosen = dist(rng);
        } else {
            chosen = pick(rng);
        }
        centroids.row(c) = data.row(chosen);
    }
    return centroids;
}

struct LloydResult {
    std::vector<int> labels;
    Mat centroids;
    double inertia = 0.0;
};

inline LloydResult lloyd(const Mat& data, Eigen::Index k, Mat centroids, std::size_t max_iterations) {
    const Eigen::Index n = data.rows();
    std::vector<int> labels(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) labels[static_cast<std::size_t>(i)] = nearest(data, i, centroids);
#ifndef NDEBUG
    double previous = assignment_cost(data, labels, centroids);
#endif
    for (std::size_t iter = 0; iter < max_iterations; ++iter) {
        // Empty clusters take the point farthest from its centroid.
        std::vector<int> sizes(static_cast<std::size_t>(k), 0);
        for (int l : labels) ++sizes[static_cast<std::size_t>(l)];
        for (Eigen::Index c = 0; c < k; ++c) {
            if (sizes[static_cast<std::size_t>(c)] > 0) continue;
            Eigen::Index far = -1;
            double far_d = -1.0;
            for (Eigen::Index i = 0; i < n; ++i) {
                const int l = labels[static_cast<std::size_t>(i)];
                if (sizes[static_cast<std::size_t>(l)] < 2) continue;
                const double d = (data.row(i) - centroids.row(l)).squaredNorm();
                if (d > far_d) {
                    far_d = d;
                    far = i;
                }
            }
            if (far < 0) break;
            --sizes[static_cast<std::size_t>(labels[static_cast<std::size_t>(far)])];
            labels[static_cast<std::size_t>(far)] = static_cast<int>(c);
            sizes[static_cast<std::size_t>(c)] = 1;
        }
        Mat sums = Mat::Zero(k, data.cols());
        for (Eigen::Index i = 0; i < n; ++i) sums.row(labels[static_cast<std::size_t>(i)]) += data.row(i);
        for (Eigen::Index c = 0; c < k; ++c) {
            if (sizes[static_cast<std::size_t>(c)] > 0) {
                centroids.row(c) = sums.row(c) / static_cast<double>(sizes[static_cast<std::size_t>(c)]);
            }
        }
        bool changed = false;
        for (Eigen::Index i = 0; i < n; ++i) {
            const int l = nearest(data, i, centroids);
            if (l != labels[static_cast<std::size_t>(i)]) {
                labels[static_cast<std::size_t>(i)] = l;
                changed = true;
            }
        }
#ifndef NDEBUG
        const double current = assignment_cost(data, labels, centroids);
        assert(current <= previous * (1.0 + 1e-12) + 1e-12 && "k-means inertia increased");
        previous = current;
#endif
        if (!changed) break;
    }
    LloydResult r{std::move(labels), std::move(centroids), 0.0};
    r.inertia = assignment_cost(data, r.labels, r.centroids);
    return r;
}

} // namespace detail

/// k-means++ seeding and Lloyd iterations per restart; the lowest-inertia
/// restart wins, ties to the lowest restart index.
inline ClusterRun kmeans(const Mat& data, Eigen::Index k, const KMeansOptions& opt = {}) {
    const Eigen::Index n = data.rows();
    if (k < 1) throw UsageError("k must be >= 1");
    if (k > n) throw UsageError("k = " + std::to_string(k) + " exceeds sample count " + std::to_string(n));
    if (opt.restarts < 1) throw UsageError("k-means needs at least one restart");
    if (!data.allFinite()) throw DataError("k-means input has non-finite entries");

    std::vector<detail::LloydResult> runs(opt.restarts);
    parallel_for(opt.restarts, [&](std::size_t r) {
        auto rng = make_stream(opt.seed, Stream::KMeans, r);
        runs[r] = detail::lloyd(data, k, detail::kmeanspp_seed(data, k, rng), opt.max_iterations);
    });
    std::size_t best = 0;
    for (std::size_t r = 1; r < runs.size(); ++r) {
        if (runs[r].inertia < runs[best].inertia) best = r;
    }
    ClusterRun out;
    out.assignment = Partition(runs[best].labels, static_cast<std::size_t>(k));
    out.centroids = std::move(runs[best].centroids);
    out.inertia = runs[best].inertia;
    out.restarts = opt.restarts;
    out.best_restart = best;
    out.seed = opt.seed;
    return out;
}

namespace detail {

inline void require_same_length(const Partition& a, const Partition& b) {
    if (a.size() != b.size()) {
        throw UsageError("partitions differ in length (" + std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()) + ")");
    }
}

inline Mat contingency(const Partition& a, const Partition& b) {
    Mat table = Mat::Zero(static_cast<Eigen::Index>(a.k()), static_cast<Eigen::Index>(b.k()));
    for (std::size_t i = 0; i < a.size(); ++i) table(a[i], b[i]) += 1.0;
    return table;
}

inline double choose2(double x) { return 0.5 * x * (x - 1.0); }

} // namespace detail

/// Adjusted Rand index from the contingency table. Returns 1 when the
/// chance-corrected denominator vanishes, which happens only when both
/// partitions are all-singletons or both a single cluster.
inline double ari(const Partition& a, const Partition& b) {
    detail::require_same_length(a, b);
    const Mat table = detail::contingency(a, b);
    double index = 0.0;
    for (Eigen::Index i = 0; i < table.rows(); ++i)
        for (Eigen::Index j = 0; j < table.cols(); ++j) index += detail::choose2(table(i, j));
    double sum_a = 0.0;
    double sum_b = 0.0;
    const Vec rows = table.rowwise().sum();
    const Vec cols = table.colwise().sum().transpose();
    for (double r : rows) sum_a += detail::choose2(r);
    for (double c : cols) sum_b += detail::choose2(c);
    const double pairs = detail::choose2(static_cast<double>(a.size()));
    const double expected = pairs > 0.0 ? sum_a * sum_b / pairs : 0.0;
    const double max_index = 0.5 * (sum_a + sum_b);
    const double denom = max_index - expected;
    if (denom == 0.0) return 1.0;
    return (index - expected) / denom;
}

/// 2 I(C;Y) / (H(C) + H(Y)) with natural logs; 1 when both entropies are 0.
inline double nmi(const Partition& a, const Partition& b) {
    detail::require_same_length(a, b);
    const Mat table = detail::contingency(a, b);
    const double n = static_cast<double>(a.size());
    const Vec rows = table.rowwise().sum();
    const Vec cols = table.colwise().sum().transpose();
    auto entropy = [n](const Vec& counts) {
        double h = 0.0;
        for (double c : counts) {
            if (c > 0.0) h -= (c / n) * std::log(c / n);
        }
        return h;
    };
    const double ha = entropy(rows);
    const double hb = entropy(cols);
    if (ha + hb == 0.0) return 1.0;
    // Terms are summed in sorted order so nmi(a, b) == nmi(b, a) bit for bit.
    std::vector<double> terms;
    for (Eigen::Index i = 0; i < table.rows(); ++i) {
        for (Eigen::Index j = 0; j < table.cols(); ++j) {
            const double c = table(i, j);
            if (c > 0.0) terms.push_back((c / n) * std::log(c * n / (rows[i] * cols[j])));
        }
    }
    std::sort(terms.begin(), terms.end());
    double mi = 0.0;
    for (double v : terms) mi += v;
    return std::clamp(2.0 * mi / (ha + hb), 0.0, 1.0);
}

inline constexpr std::size_t kMaxMatchedClusters = 8;

/// Maximum-weight one-to-one label matching on a square count matrix
/// (Kuhn-Munkres with potentials). Returns the matched column per row.
inline std::vector<int> max_weight_matching(const Mat& weights) {
    const Eigen::Index k = weights.rows();
    const double top = k > 0 ? weights.maxCoeff() : 0.0;
    // 1-based arrays, cost = top - weight, minimized.
    std::vector<double> u(static_cast<std::size_t>(k + 1), 0.0), v(static_cast<std::size_t>(k + 1), 0.0);
    std::vector<Eigen::Index> p(static_cast<std::size_t>(k + 1), 0), way(static_cast<std::size_t>(k + 1), 0);
    const double inf = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 1; i <= k; ++i) {
        p[0] = i;
        Eigen::Index j0 = 0;
        std::vector<double> minv(static_cast<std::size_t>(k + 1), inf);
        std::vector<char> used(static_cast<std::size_t>(k + 1), 0);
        do {
            used[static_cast<std::size_t>(j0)] = 1;
            const Eigen::Index i0 = p[static_cast<std::size_t>(j0)];
            double delta = inf;
            Eigen::Index j1 = 0;
            for (Eigen::Index j = 1; j <= k; ++j) {
                const auto js = static_cast<std::size_t>(j);
                if (used[js]) continue;
                const double cur = (top - weights(i0 - 1, j - 1)) - u[static_cast<std::size_t>(i0)] - v[js];
                if (cur < minv[js]) {
                    minv[js] = cur;
                    way[js] = j0;
                }
                if (minv[js] < delta) {
                    delta = minv[js];
                    j1 = j;
                }
            }
            for (Eigen::Index j = 0; j <= k; ++j) {
                const auto js = static_cast<std::size_t>(j);
                if (used[js]) {
                    u[static_cast<std::size_t>(p[js])] += delta;
                    v[js] -= delta;
                } else {
                    minv[js] -= delta;
                }
            }
            j0 = j1;
        } while (p[static_cast<std::size_t>(j0)] != 0);
        do {
            const Eigen::Index j1 = way[static_cast<std::size_t>(j0)];
            p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<int> match(static_cast<std::size_t>(k), -1);
    for (Eigen::Index j = 1; j <= k; ++j) {
        match[static_cast<std::size_t>(p[static_cast<std::size_t>(j)] - 1)] = static_cast<int>(j - 1);
    }
    return match;
}

/// Fraction of samples whose predicted cluster maps onto the true class
/// under the best one-to-one relabeling. Limited to k <= 8 labels.
inline double hungarian_accuracy(const Partition& pred, const Partition& truth) {
    detail::require_same_length(pred, truth);
    const std::size_t k = std::max(pred.k(), truth.k());
    if (k > kMaxMatchedClusters) {
        throw UsageError("matched accuracy supports at most " + std::to_string(kMaxMatchedClusters) +
                         " labels, got " + std::to_string(k));
    }
    Mat counts = Mat::Zero(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
    for (std::size_t i = 0; i < pred.size(); ++i) counts(pred[i], truth[i]) += 1.0;
    const auto match = max_weight_matching(counts);
    double hit = 0.0;
    for (std::size_t c = 0; c < k; ++c) hit += counts(static_cast<Eigen::Index>(c), match[c]);
    return hit / static_cast<double>(pred.size());
}

/// Mean silhouette with Euclidean distances. Singleton clusters and points
/// with a = b = 0 contribute 0.
inline double silhouette(const Mat& data, const Partition& labels) {
    const Eigen::Index n = data.rows();
    if (static_cast<std::size_t>(n) != labels.size()) {
        throw UsageError("silhouette: data has " + std::to_string(n) + " rows but partition has " +
                         std::to_string(labels.size()));
    }
    const std::size_t k = labels.k();
    if (k < 2) throw UsageError("silhouette needs at least 2 clusters");
    std::vector<std::size_t> sizes(k, 0);
    for (int l : labels.labels()) ++sizes[static_cast<std::size_t>(l)];
    for (std::size_t c = 0; c < k; ++c) {
        if (sizes[c] == 0) throw UsageError("silhouette: cluster " + std::to_string(c) + " is empty");
    }
    double total = 0.0;
    std::vector<double> sums(k);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto own = static_cast<std::size_t>(labels[static_cast<std::size_t>(i)]);
        if (sizes[own] == 1) continue;
        std::fill(sums.begin(), sums.end(), 0.0);
        for (Eigen::Index j = 0; j < n; ++j) {
            if (j == i) continue;
            sums[static_cast<std::size_t>(labels[static_cast<std::size_t>(j)])] += (data.row(i) - data.row(j)).norm();
        }
        const double a = sums[own] / static_cast<double>(sizes[own] - 1);
        double b = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < k; ++c) {
            if (c != own) b = std::min(b, sums[c] / static_cast<double>(sizes[c]));
        }
        const double denom = std::max(a, b);
        if (denom > 0.0) total += (b - a) / denom;
    }
    return total / static_cast<double>(n);
}

} // namespace arcdrift
