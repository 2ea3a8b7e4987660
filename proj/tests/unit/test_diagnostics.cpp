#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "arcdrift/diagnostics.hpp"
#include "arcdrift/errors.hpp"
#include "arcdrift/rng.hpp"

using namespace arcdrift;

namespace {

ReferencePath reference(std::uint64_t seed, Eigen::Index d) {
    auto rng = make_stream(seed, Stream::Generic, 3);
    return ReferencePath(gaussian_matrix(rng, d, 4));
}

} // namespace

TEST(Gram, DisjointFieldIsDiagonal) {
    const auto f = make_disjoint_field(reference(1, 64), FieldShape{}, 1);
    std::mt19937_64 rng(1);
    for (int rep = 0; rep < 200; ++rep) {
        const Vec z = f.reference().at(2) + gaussian_vector(rng, 64, 3.0);
        const auto g = gram_matrix(f, z, 2);
        EXPECT_FALSE(g.degenerate);
        EXPECT_LE(g.rho, 1e-9);
        for (int i = 0; i < 3; ++i) {
            EXPECT_GE(g.gram(i, i), 0.0);
            for (int j = 0; j < 3; ++j) {
                if (i != j) {
                    EXPECT_LE(std::abs(g.gram(i, j)), 1e-9);
                }
                EXPECT_LE(std::abs(g.gram(i, j) - g.gram(j, i)), 1e-10);
            }
        }
        EXPECT_TRUE(check_diagonal_dominance(g, 0.05));
    }
}

TEST(Gram, OnReferenceIsDegenerate) {
    const auto f = make_disjoint_field(reference(2, 16), FieldShape{{4, 4, 4}, {1, 1, 1}}, 2);
    const auto g = gram_matrix(f, f.reference().at(1), 1);
    EXPECT_TRUE(g.degenerate);
    EXPECT_EQ(g.gram, Eigen::Matrix3d::Zero());
    EXPECT_THROW(check_diagonal_dominance(g), UsageError);
}

TEST(Gram, OverlappingFieldAnalyticOffDiagonal) {
    // Offset a*q along SC's first column. The SA gradient is w_SA cos(theta) a
    // times SA's tilted column, so G_SC,SA = w_SC w_SA a^2 cos^2(theta).
    const FieldShape shape{{3, 3, 3}, {1.3, 0.6, 1.0}};
    for (double theta : {0.2, 0.7, 1.2}) {
        const auto f = make_overlapping_field(reference(3, 16), shape, 3, theta);
        const double a = 1.9;
        const Vec z = f.reference().at(3) + a * f.axis(Axis::SC).basis.col(0);
        const auto g = gram_matrix(f, z, 3);
        const double c = std::cos(theta);
        EXPECT_NEAR(g.gram(0, 1), 1.3 * 0.6 * a * a * c * c, 1e-6);
        EXPECT_NEAR(g.gram(0, 0), 1.3 * 1.3 * a * a, 1e-6);
        EXPECT_NEAR(g.gram(1, 1), 0.6 * 0.6 * a * a * c * c, 1e-6);
        EXPECT_NEAR(g.gram(0, 2), 0.0, 1e-9);
    }
}

TEST(Dominance, StrictBoundary) {
    GramReport r;
    r.gram = Eigen::Matrix3d::Identity();
    r.rho = 0.05;
    EXPECT_FALSE(check_diagonal_dominance(r, 0.05));
    r.rho = 0.0499999;
    EXPECT_TRUE(check_diagonal_dominance(r, 0.05));
}

TEST(Dominance, OverlapTunedToPointTwo) {
    // Equal weights, offset along SC's first column: rho = 2 c^2 / (1 + c^2).
    // Choosing c^2 = 1/9 gives rho = 0.2.
    const double theta = std::acos(1.0 / 3.0);
    const auto f = make_overlapping_field(reference(4, 16), FieldShape{{3, 3, 3}, {1, 1, 1}}, 4, theta);
    const Vec z = f.reference().at(2) + 0.8 * f.axis(Axis::SC).basis.col(0);
    const auto g = gram_matrix(f, z, 2);
    EXPECT_NEAR(g.rho, 0.2, 1e-9);
    EXPECT_NEAR(g.rho_signed, 0.2, 1e-9);
    EXPECT_FALSE(check_diagonal_dominance(g, 0.05));
}

TEST(Gram, SignedVariantCanCancel) {
    std::array<Vec, 3> grads{Vec(Eigen::Vector2d(1, 0)), Vec(Eigen::Vector2d(1, 1)), Vec(Eigen::Vector2d(-1, 1))};
    const auto g = gram_from_gradients(grads);
    // Off-diagonals: 1, -1, 0 (each twice); trace 1 + 2 + 2.
    EXPECT_NEAR(g.rho, 4.0 / 5.0, 1e-15);
    EXPECT_NEAR(g.rho_signed, 0.0, 1e-15);
}

TEST(Decompose, Examples) {
    const auto f = make_disjoint_field(reference(5, 8), FieldShape{{2, 3, 2}, {1, 2, 1}}, 5);
    const auto zero = decompose_offset(Vec::Zero(8), f, 1);
    for (double c : zero.coefficients) EXPECT_EQ(c, 0.0);
    EXPECT_EQ(zero.residual_norm, 0.0);
    for (const auto& d : zero.directions) EXPECT_FALSE(d.has_value());

    const double a = 1.4;
    for (Axis ax : kAxes) {
        const auto r = decompose_offset(a * f.axis(ax).basis.col(0), f, 1);
        for (Axis o : kAxes) EXPECT_NEAR(r.coefficients[index_of(o)], o == ax ? a : 0.0, 1e-14);
        EXPECT_LE(r.residual_norm, 1e-14);
    }
}

TEST(Decompose, Pythagoras) {
    const auto f = make_disjoint_field(reference(6, 8), FieldShape{{2, 3, 2}, {1, 1, 1}}, 6);
    std::mt19937_64 rng(6);
    for (int rep = 0; rep < 500; ++rep) {
        const Vec dr = gaussian_vector(rng, 8, 2.0);
        const auto r = decompose_offset(dr, f, 2);
        double sum = r.residual_norm * r.residual_norm;
        Vec rebuilt = r.residual;
        for (Axis a : kAxes) {
            const std::size_t i = index_of(a);
            sum += r.coefficients[i] * r.coefficients[i];
            if (r.directions[i]) rebuilt += r.coefficients[i] * *r.directions[i];
        }
        EXPECT_NEAR(sum, dr.squaredNorm(), 1e-10);
        EXPECT_LE((rebuilt - dr).cwiseAbs().maxCoeff(), 1e-10);
    }
    EXPECT_THROW(decompose_offset(Vec::Zero(7), f, 1), DataError);
}
