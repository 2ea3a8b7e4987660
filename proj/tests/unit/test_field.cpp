#include <array>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "arcdrift/errors.hpp"
#include "arcdrift/field.hpp"
#include "arcdrift/rng.hpp"
#include "oracles.hpp"

using namespace arcdrift;

namespace {

ReferencePath random_reference(std::uint64_t seed, Eigen::Index d, Eigen::Index steps) {
    auto rng = make_stream(seed, Stream::Generic, 99);
    return ReferencePath(gaussian_matrix(rng, d, steps));
}

AlignmentField small_field(std::uint64_t seed, FieldShape shape = {{2, 3, 2}, {1.0, 0.7, 2.5}}) {
    return make_disjoint_field(random_reference(seed, 8, 5), shape, seed);
}

} // namespace

TEST(ReferencePath, Validation) {
    EXPECT_THROW(ReferencePath(Mat::Zero(3, 1)), DataError);
    Mat bad = Mat::Zero(3, 4);
    bad(1, 2) = NAN;
    EXPECT_THROW(ReferencePath{bad}, DataError);
}

TEST(AlignmentField, RejectsBadBases) {
    const auto ref = random_reference(1, 6, 3);
    std::array<AxisSubspace, 3> axes{AxisSubspace{"SC", 1.0, Mat::Identity(6, 2)},
                                     AxisSubspace{"SA", 1.0, Mat::Identity(6, 6).middleCols(2, 2)},
                                     AxisSubspace{"KG", 1.0, Mat::Identity(6, 6).middleCols(4, 2)}};
    EXPECT_NO_THROW(AlignmentField(axes, ref, FieldMode::Disjoint));

    auto scaled = axes;
    scaled[0].basis *= 1.0 + 1e-8;
    EXPECT_THROW(AlignmentField(scaled, ref), DataError);

    auto overlap = axes;
    overlap[1].basis = Mat::Identity(6, 2);
    EXPECT_THROW(AlignmentField(overlap, ref, FieldMode::Disjoint), DataError);

    auto heavy = axes;
    heavy[2].weight = 0.0;
    EXPECT_THROW(AlignmentField(heavy, ref), DataError);

    auto wide = axes;
    wide[2].basis = Mat::Identity(6, 3);
    EXPECT_THROW(AlignmentField(wide, ref), DataError);
}

TEST(AlignmentField, DisjointConstructionInvariants) {
    for (std::uint64_t seed : {0u, 1u, 2u}) {
        const auto f = make_disjoint_field(random_reference(seed, 64, 4), FieldShape{}, seed);
        for (const auto& ax : f.axes()) {
            const Mat g = ax.basis.transpose() * ax.basis;
            EXPECT_LE((g - Mat::Identity(g.rows(), g.cols())).cwiseAbs().maxCoeff(), 1e-10);
        }
        for (std::size_t i = 0; i < 3; ++i)
            for (std::size_t j = i + 1; j < 3; ++j)
                EXPECT_LE((f.axes()[i].basis.transpose() * f.axes()[j].basis).cwiseAbs().maxCoeff(), 1e-10);
    }
    EXPECT_THROW(make_disjoint_field(random_reference(0, 10, 3), FieldShape{}, 0), UsageError);
}

TEST(Potential, OnReferenceIsZero) {
    const auto f = small_field(3);
    for (Eigen::Index t = 1; t <= f.steps(); ++t)
        for (Axis a : kAxes) EXPECT_EQ(potential(f, f.reference().at(t), t, a), 0.0);
}

TEST(Potential, UnitColumnOffset) {
    const auto f = small_field(4);
    const double a = 1.7;
    for (Axis ax : kAxes) {
        const Vec b = f.axis(ax).basis.col(0);
        const Vec z = f.reference().at(2) + a * b;
        for (Axis other : kAxes) {
            const double expect = other == ax ? 0.5 * f.axis(ax).weight * a * a : 0.0;
            EXPECT_NEAR(potential(f, z, 2, other), expect, 1e-12);
        }
    }
}

TEST(Potential, MatchesDenseProjector) {
    std::mt19937_64 rng(5);
    for (int rep = 0; rep < 200; ++rep) {
        const auto f = small_field(static_cast<std::uint64_t>(rep));
        const Vec z = gaussian_vector(rng, 8, 2.0);
        const Eigen::Index t = 1 + rep % f.steps();
        for (Axis a : kAxes) {
            const double p = potential(f, z, t, a);
            EXPECT_NEAR(p, oracle::dense_potential(f, z, t, a), 1e-12 * (1 + p));
        }
    }
}

TEST(Tension, Examples) {
    const auto f = small_field(6);
    const auto zero = tension(f, f.reference().at(3), 3);
    for (double v : zero.values()) EXPECT_EQ(v, 0.0);

    const double a = 0.8;
    const Vec z = f.reference().at(3) + a * f.axis(Axis::SA).basis.col(1);
    const auto tau = tension(f, z, 3);
    EXPECT_NEAR(tau.sc(), 0.0, 1e-14);
    EXPECT_NEAR(tau.sa(), f.axis(Axis::SA).weight * a, 1e-14);
    EXPECT_NEAR(tau.kg(), 0.0, 1e-14);
}

TEST(Tension, MatchesFiniteDifferenceGradientNorm) {
    std::mt19937_64 rng(7);
    for (int rep = 0; rep < 200; ++rep) {
        const auto f = small_field(100 + static_cast<std::uint64_t>(rep));
        const Eigen::Index t = 1 + rep % f.steps();
        const Vec z = f.reference().at(t) + gaussian_vector(rng, 8);
        const auto tau = tension(f, z, t);
        for (Axis a : kAxes) {
            const double fd = oracle::fd_gradient(f, z, t, a).norm();
            EXPECT_LT(std::abs(tau[a] - fd), 1e-4 * fd);
        }
    }
}

TEST(TensionGradients, Examples) {
    const auto f = small_field(8);
    for (const auto& g : tension_gradients(f, f.reference().at(1), 1)) EXPECT_EQ(g.norm(), 0.0);

    const double a = -1.3;
    for (Axis ax : kAxes) {
        const Vec b = f.axis(ax).basis.col(0);
        const auto grads = tension_gradients(f, f.reference().at(1) + a * b, 1);
        for (Axis other : kAxes) {
            const Vec expect = other == ax ? Vec(f.axis(ax).weight * a * b) : Vec(Vec::Zero(8));
            EXPECT_LE((grads[index_of(other)] - expect).cwiseAbs().maxCoeff(), 1e-14);
        }
    }
}

TEST(TensionGradients, MatchFiniteDifferencesComponentwise) {
    std::mt19937_64 rng(9);
    for (int rep = 0; rep < 200; ++rep) {
        const auto f = small_field(300 + static_cast<std::uint64_t>(rep));
        const Eigen::Index t = 1 + rep % f.steps();
        const Vec z = f.reference().at(t) + gaussian_vector(rng, 8);
        const auto grads = tension_gradients(f, z, t);
        const auto tau = tension(f, z, t);
        for (Axis a : kAxes) {
            EXPECT_LT((grads[index_of(a)] - oracle::fd_gradient(f, z, t, a)).cwiseAbs().maxCoeff(), 1e-6);
            EXPECT_LE(std::abs(tau[a] - grads[index_of(a)].norm()), 1e-10);
        }
    }
}

TEST(TensionGradients, DisjointAxesOrthogonal) {
    std::mt19937_64 rng(10);
    const auto f = make_disjoint_field(random_reference(10, 64, 3), FieldShape{}, 10);
    for (int rep = 0; rep < 100; ++rep) {
        const Vec z = gaussian_vector(rng, 64, 5.0);
        const auto g = tension_gradients(f, z, 2);
        EXPECT_LE(std::abs(g[0].dot(g[1])), 1e-9);
        EXPECT_LE(std::abs(g[0].dot(g[2])), 1e-9);
        EXPECT_LE(std::abs(g[1].dot(g[2])), 1e-9);
    }
}

TEST(Tension, TranslationCovariance) {
    std::mt19937_64 rng(11);
    const auto f = small_field(11);
    const Vec shift = gaussian_vector(rng, 8, 10.0);
    Mat moved = f.reference().states();
    moved.colwise() += shift;
    const AlignmentField g(f.axes(), ReferencePath(moved), f.mode());
    for (int rep = 0; rep < 50; ++rep) {
        const Vec z = gaussian_vector(rng, 8);
        const auto a = tension(f, z, 2);
        const auto b = tension(g, z + shift, 2);
        for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(a[i], b[i], 1e-12 * (1 + a[i]));
    }
}

TEST(Field, ShapeErrors) {
    const auto f = small_field(12);
    EXPECT_THROW(tension(f, Vec::Zero(7), 1), DataError);
    EXPECT_THROW(tension(f, Vec::Zero(8), 0), DataError);
    EXPECT_THROW(tension(f, Vec::Zero(8), f.steps() + 1), DataError);
}

TEST(CanonicalDirection, UnitAlongProjection) {
    const auto f = small_field(13);
    EXPECT_FALSE(canonical_direction(f, Axis::SC, Vec::Zero(8)).has_value());
    const Vec b = f.axis(Axis::KG).basis.col(1);
    const auto e = canonical_direction(f, Axis::KG, 3.0 * b);
    ASSERT_TRUE(e.has_value());
    EXPECT_LE((*e - b).norm(), 1e-14);
}

TEST(OverlappingField, PrincipalAngle) {
    const double theta = 0.6;
    const auto f = make_overlapping_field(random_reference(14, 12, 3), FieldShape{{2, 2, 2}, {1, 1, 1}}, 14, theta);
    const Mat c = f.axis(Axis::SC).basis.transpose() * f.axis(Axis::SA).basis;
    Eigen::JacobiSVD<Mat> svd(c);
    EXPECT_NEAR(svd.singularValues()[0], std::cos(theta), 1e-12);
    EXPECT_NEAR(svd.singularValues()[1], 0.0, 1e-12);
    EXPECT_THROW(make_overlapping_field(random_reference(14, 6, 3), FieldShape{{2, 2, 2}, {1, 1, 1}}, 14, theta),
                 UsageError);
}

TEST(DisjointField, IdentityBasisWithoutRotation) {
    const auto f = make_disjoint_field(random_reference(15, 8, 3), {{2, 3, 2}, {1, 1, 1}}, 15, false);
    EXPECT_EQ(f.axis(Axis::SA).basis, Mat::Identity(8, 8).middleCols(2, 3));
}
