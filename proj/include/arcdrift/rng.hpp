#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace arcdrift {

/// Purpose tags for derived random streams. Every stream is keyed by
/// (master seed, purpose, index, step) so generation order never matters.
enum class Stream : std::uint32_t {
    Reference = 1,
    Basis = 2,
    SuccessNoise = 3,
    DriftNoise = 4,
    DriftDirection = 5,
    KMeans = 6,
    Generic = 7,
};

inline std::mt19937_64 make_stream(std::uint64_t seed, Stream purpose, std::uint64_t index = 0,
                                   std::uint64_t step = 0) {
    auto lo = [](std::uint64_t x) { return static_cast<std::uint32_t>(x & 0xffffffffu); };
    auto hi = [](std::uint64_t x) { return static_cast<std::uint32_t>(x >> 32); };
    std::seed_seq seq{lo(seed), hi(seed), static_cast<std::uint32_t>(purpose),
                      lo(index), hi(index), lo(step), hi(step)};
    return std::mt19937_64(seq);
}

inline Eigen::VectorXd gaussian_vector(std::mt19937_64& rng, Eigen::Index n, double scale = 1.0) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = scale * normal(rng);
    return v;
}

inline Eigen::MatrixXd gaussian_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = normal(rng);
    return m;
}

/// Haar-ish random orthogonal matrix: QR of a Gaussian matrix with the sign
/// of R's diagonal folded into Q.
inline Eigen::MatrixXd random_orthogonal(std::mt19937_64& rng, Eigen::Index n) {
    const Eigen::MatrixXd g = gaussian_matrix(rng, n, n);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
    const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (Eigen::Index j = 0; j < n; ++j) {
        if (r(j, j) < 0.0) q.col(j) = -q.col(j);
    }
    return q;
}

} // namespace arcdrift
