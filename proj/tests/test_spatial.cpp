#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include "rbdkit/spatial.hpp"

namespace rbdkit::spatial {
namespace {

SpatialVec random_vec(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> d(-2.0, 2.0);
    SpatialVec v;
    for (double& x : v.c) x = d(rng);
    return v;
}

JointSpec random_joint(std::mt19937_64& rng, JointKind kind) {
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    JointSpec j;
    j.kind = kind;
    j.position_index = 0;
    Vec3d axis{d(rng), d(rng), d(rng)};
    const double n = std::sqrt(axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]);
    for (double& a : axis) a /= n;
    j.axis = axis;
    j.origin_rotation = rpy_to_rotation({d(rng), d(rng), d(rng)});
    j.origin_translation = {d(rng), d(rng), d(rng)};
    return j;
}

SpatialTransform random_transform(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> d(-3.0, 3.0);
    return xform_from_joint(random_joint(rng, JointKind::revolute), d(rng));
}

LinkInertia random_inertia(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> d(0.01, 1.0), c(-0.3, 0.3);
    LinkInertia in;
    in.mass = 1.0 + d(rng);
    in.com = {c(rng), c(rng), c(rng)};
    const double a = d(rng), b = d(rng);
    in.inertia_about_com = {{{a + b, 0.01, 0.0}, {0.01, a + 0.5 * b, 0.0}, {0.0, 0.0, b + 0.5 * a}}};
    return in;
}

double max_diff(const SpatialVec& a, const SpatialVec& b) {
    double m = 0.0;
    for (int k = 0; k < 6; ++k) m = std::max(m, std::abs(a[k] - b[k]));
    return m;
}

TEST(Spatial, CrmZeroVector) {
    const Matrix6<double> m = crm(SpatialVec{});
    for (int r = 0; r < 6; ++r)
        for (int c = 0; c < 6; ++c) EXPECT_EQ(m[r][c], 0.0);
}

TEST(Spatial, CrmUnitAngularX) {
    const Matrix6<double> m = crm(SpatialVec{{1.0, 0.0, 0.0, 0.0, 0.0, 0.0}});
    for (int r = 0; r < 6; ++r) {
        for (int c = 0; c < 6; ++c) {
            double expected = 0.0;
            if ((r == 1 && c == 2) || (r == 4 && c == 5)) expected = -1.0;
            if ((r == 2 && c == 1) || (r == 5 && c == 4)) expected = 1.0;
            EXPECT_EQ(m[r][c], expected) << r << "," << c;
        }
    }
}

TEST(Spatial, CrmLayoutEntryByEntry) {
    std::mt19937_64 rng(1);
    const SpatialVec v = random_vec(rng);
    const double w0 = v[0], w1 = v[1], w2 = v[2], v0 = v[3], v1 = v[4], v2 = v[5];
    const double expected[6][6] = {
        {0, -w2, w1, 0, 0, 0},   {w2, 0, -w0, 0, 0, 0},   {-w1, w0, 0, 0, 0, 0},
        {0, -v2, v1, 0, -w2, w1}, {v2, 0, -v0, w2, 0, -w0}, {-v1, v0, 0, -w1, w0, 0},
    };
    const Matrix6<double> m = crm(v);
    for (int r = 0; r < 6; ++r)
        for (int c = 0; c < 6; ++c) EXPECT_EQ(m[r][c], expected[r][c]) << r << "," << c;
}

TEST(Spatial, CrmAnnihilatesPureRotation) {
    std::mt19937_64 rng(2);
    for (int t = 0; t < 100; ++t) {
        SpatialVec v = random_vec(rng);
        v[3] = v[4] = v[5] = 0.0;
        EXPECT_LT(max_diff(cross_motion(v, v), SpatialVec{}), 1e-15);
    }
}

TEST(Spatial, CrfIsNegatedCrmTranspose) {
    std::mt19937_64 rng(3);
    for (int t = 0; t < 1000; ++t) {
        const SpatialVec v = random_vec(rng);
        const Matrix6<double> m = crm(v), f = crf(v);
        for (int r = 0; r < 6; ++r)
            for (int c = 0; c < 6; ++c) ASSERT_EQ(f[r][c] + m[c][r], 0.0);
    }
    // v = e_z: crm(v)(1,0) = +1, so crf(v)(0,1) = -crm(v)(1,0) = -1.
    const SpatialVec ez{{0.0, 0.0, 1.0, 0.0, 0.0, 0.0}};
    const Matrix6<double> f = crf(ez);
    EXPECT_EQ(crm(ez)[1][0], 1.0);
    EXPECT_EQ(f[0][1], -crm(ez)[1][0]);
    EXPECT_EQ(f[0][1], -1.0);
    const Matrix6<double> z = crf(SpatialVec{});
    for (int r = 0; r < 6; ++r)
        for (int c = 0; c < 6; ++c) EXPECT_EQ(z[r][c], 0.0);
}

TEST(Spatial, CrossProductsMatchDenseOperators) {
    std::mt19937_64 rng(4);
    for (int t = 0; t < 200; ++t) {
        const SpatialVec v = random_vec(rng), w = random_vec(rng);
        EXPECT_LT((to_eigen(cross_motion(v, w)) - to_eigen(crm(v)) * to_eigen(w)).cwiseAbs().maxCoeff(), 1e-14);
        EXPECT_LT((to_eigen(cross_force(v, w)) - to_eigen(crf(v)) * to_eigen(w)).cwiseAbs().maxCoeff(), 1e-14);
    }
}

TEST(Spatial, IdentityTransformLeavesOperandsUnchanged) {
    std::mt19937_64 rng(5);
    const SpatialTransform I = identity_transform();
    const SpatialVec v = random_vec(rng);
    EXPECT_EQ(max_diff(apply_motion(I, v), v), 0.0);
    EXPECT_EQ(max_diff(apply_force(I, v), v), 0.0);
    const SpatialInertia in = spatial_inertia(random_inertia(rng));
    const SpatialInertia out = inertia_to_parent(I, in);
    for (int r = 0; r < 6; ++r)
        for (int c = 0; c < 6; ++c) EXPECT_EQ(out[r][c], in[r][c]);
}

TEST(Spatial, CompactApplicationMatchesDensePlucker) {
    std::mt19937_64 rng(6);
    for (int t = 0; t < 500; ++t) {
        const SpatialTransform X = random_transform(rng);
        const SpatialVec v = random_vec(rng);
        const Matrix6d M = dense_motion_matrix(X);
        const Matrix6d F = dense_force_matrix(X);
        EXPECT_LT((to_eigen(apply_motion(X, v)) - M * to_eigen(v)).cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_LT((to_eigen(apply_force(X, v)) - F * to_eigen(v)).cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_LT((to_eigen(apply_motion_inverse(X, v)) - M.inverse() * to_eigen(v)).cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_LT((to_eigen(apply_transpose(X, v)) - M.transpose() * to_eigen(v)).cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_LT((F - M.inverse().transpose()).cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_LT(max_diff(apply_motion_inverse(X, apply_motion(X, v)), v), 1e-12);
        EXPECT_LT(max_diff(apply_motion(inverse(X), v), apply_motion_inverse(X, v)), 1e-12);
    }
}

TEST(Spatial, CompositionMatchesSequentialApplication) {
    std::mt19937_64 rng(7);
    for (int t = 0; t < 100; ++t) {
        const SpatialTransform a = random_transform(rng), b = random_transform(rng);
        const SpatialVec v = random_vec(rng);
        EXPECT_LT(max_diff(apply_motion(compose(a, b), v), apply_motion(a, apply_motion(b, v))), 1e-12);
    }
}

TEST(Spatial, InertiaTransformsStaySymmetricPsd) {
    std::mt19937_64 rng(8);
    for (int t = 0; t < 200; ++t) {
        const SpatialTransform X = random_transform(rng);
        const SpatialInertia I = spatial_inertia(random_inertia(rng));
        for (const Matrix6d m : {to_eigen(inertia_to_parent(X, I)), to_eigen(inertia_to_child(X, I))}) {
            EXPECT_LT((m - m.transpose()).cwiseAbs().maxCoeff(), 1e-10);
            Eigen::SelfAdjointEigenSolver<Matrix6d> eig(0.5 * (m + m.transpose()));
            EXPECT_GT(eig.eigenvalues().minCoeff(), -1e-10);
        }
        const Matrix6d M = dense_motion_matrix(X);
        EXPECT_LT((to_eigen(inertia_to_parent(X, I)) - M.transpose() * to_eigen(I) * M).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(Spatial, RevoluteZeroAngleIsIdentity) {
    JointSpec j;
    j.position_index = 0;
    const SpatialTransform X = xform_from_joint(j, 0.0);
    for (int r = 0; r < 3; ++r) {
        EXPECT_EQ(X.r[r], 0.0);
        for (int c = 0; c < 3; ++c) EXPECT_NEAR(X.E[r][c], r == c ? 1.0 : 0.0, 1e-15);
    }
}

TEST(Spatial, RevoluteQuarterTurnMatchesRotationOracle) {
    JointSpec j;
    j.position_index = 0;
    const SpatialTransform X = xform_from_joint(j, std::numbers::pi / 2);
    // E maps parent coordinates to child coordinates, so E^T = Rz(pi/2) takes x to y.
    const Vec3d x_in_parent = rotate_transpose(X.E, Vec3d{1.0, 0.0, 0.0});
    EXPECT_NEAR(x_in_parent[0], 0.0, 1e-15);
    EXPECT_NEAR(x_in_parent[1], 1.0, 1e-15);
    EXPECT_NEAR(x_in_parent[2], 0.0, 1e-15);

    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> d(-3.0, 3.0);
    for (int t = 0; t < 100; ++t) {
        const JointSpec spec = random_joint(rng, JointKind::revolute);
        const double q = d(rng);
        // Oracle: R = R0 * AngleAxis(axis, q); E = R^T.
        Eigen::Matrix3d R0;
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) R0(r, c) = spec.origin_rotation[r][c];
        const Eigen::Matrix3d R =
            R0 * Eigen::AngleAxisd(q, Eigen::Vector3d(spec.axis[0], spec.axis[1], spec.axis[2])).toRotationMatrix();
        const SpatialTransform Y = xform_from_joint(spec, q);
        for (int r = 0; r < 3; ++r) {
            EXPECT_EQ(Y.r[r], spec.origin_translation[r]);
            for (int c = 0; c < 3; ++c) EXPECT_NEAR(Y.E[r][c], R(c, r), 1e-12);
        }
    }
}

TEST(Spatial, PrismaticIsPureTranslation) {
    JointSpec j;
    j.kind = JointKind::prismatic;
    j.axis = {1.0, 0.0, 0.0};
    j.position_index = 0;
    const SpatialTransform X = xform_from_joint(j, 0.5);
    EXPECT_EQ(X.r[0], 0.5);
    EXPECT_EQ(X.r[1], 0.0);
    EXPECT_EQ(X.r[2], 0.0);
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) EXPECT_EQ(X.E[r][c], r == c ? 1.0 : 0.0);
}

TEST(Spatial, MotionSubspace) {
    JointSpec rz;
    EXPECT_EQ(motion_subspace(rz).c, (std::array<double, 6>{0, 0, 1, 0, 0, 0}));
    JointSpec px;
    px.kind = JointKind::prismatic;
    px.axis = {1.0, 0.0, 0.0};
    EXPECT_EQ(motion_subspace(px).c, (std::array<double, 6>{0, 0, 0, 1, 0, 0}));
    JointSpec ry;
    ry.axis = {0.0, 1.0, 0.0};
    EXPECT_EQ(motion_subspace(ry).c, (std::array<double, 6>{0, 1, 0, 0, 0, 0}));
}

TEST(Spatial, SpatialInertiaOfPointMass) {
    LinkInertia in;
    in.mass = 2.0;
    in.com = {1.0, 0.0, 0.0};
    const Matrix6d I = to_eigen(spatial_inertia(in));
    // Rotational inertia about the origin: m * (|c|^2 1 - c c^T).
    EXPECT_DOUBLE_EQ(I(0, 0), 0.0);
    EXPECT_DOUBLE_EQ(I(1, 1), 2.0);
    EXPECT_DOUBLE_EQ(I(2, 2), 2.0);
    EXPECT_DOUBLE_EQ(I(3, 3), 2.0);
    EXPECT_LT((I - I.transpose()).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Spatial, RevoluteTransformDerivativeMatchesCrossProduct) {
    // d/dq (X v) = -S x (X v) for a joint transform X(q) with subspace S.
    std::mt19937_64 rng(10);
    std::uniform_real_distribution<double> d(-3.0, 3.0);
    for (int t = 0; t < 50; ++t) {
        const JointSpec spec = random_joint(rng, t % 2 ? JointKind::revolute : JointKind::prismatic);
        const double q = d(rng), h = 1e-6;
        const SpatialVec v = random_vec(rng);
        const SpatialVec fd = scale(apply_motion(xform_from_joint(spec, q + h), v) -
                                        apply_motion(xform_from_joint(spec, q - h), v),
                                    0.5 / h);
        const SpatialVec an = scale(cross_motion(motion_subspace(spec), apply_motion(xform_from_joint(spec, q), v)), -1.0);
        EXPECT_LT(max_diff(fd, an), 1e-8);
    }
}

}  // namespace
}  // namespace rbdkit::spatial
