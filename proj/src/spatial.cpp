#include "rbdkit/spatial.hpp"

#include <stdexcept>

namespace rbdkit::spatial {

namespace {

Mat3d skew(const Vec3d& a) { return {{{0.0, -a[2], a[1]}, {a[2], 0.0, -a[0]}, {-a[1], a[0], 0.0}}}; }

Mat3d matmul(const Mat3d& a, const Mat3d& b) {
    Mat3d out{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k) out[i][j] += a[i][k] * b[k][j];
    return out;
}

Mat3d transpose(const Mat3d& a) {
    Mat3d out{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) out[i][j] = a[j][i];
    return out;
}

Eigen::Matrix3d to_eigen3(const Mat3d& m) {
    Eigen::Matrix3d out;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) out(i, j) = m[i][j];
    return out;
}

}  // namespace

RevoluteRotation revolute_rotation(const JointSpec& spec) {
    // Rot(a,q)^T = a a^T + cos(q) (I - a a^T) - sin(q) [a]x, then E = Rot^T R0^T.
    const Vec3d& a = spec.axis;
    Mat3d aat{}, rest{};
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            aat[i][j] = a[i] * a[j];
            rest[i][j] = (i == j ? 1.0 : 0.0) - aat[i][j];
        }
    }
    Mat3d neg_skew = skew(a);
    for (auto& row : neg_skew)
        for (auto& x : row) x = -x;
    const Mat3d r0t = transpose(spec.origin_rotation);
    RevoluteRotation out;
    out.C = matmul(aat, r0t);
    out.A = matmul(rest, r0t);
    out.B = matmul(neg_skew, r0t);
    return out;
}

SpatialTransform xform_from_joint(const JointSpec& spec, double q) {
    if (spec.kind == JointKind::fixed) throw std::invalid_argument("xform_from_joint: fixed joints carry no position");
    return xform_from_joint<double>(spec, q, std::sin(q), std::cos(q));
}

SpatialVec motion_subspace(const JointSpec& spec) {
    SpatialVec s;
    switch (spec.kind) {
        case JointKind::revolute:
            s = SpatialVec::from_parts(spec.axis, {0.0, 0.0, 0.0});
            break;
        case JointKind::prismatic:
            s = SpatialVec::from_parts({0.0, 0.0, 0.0}, spec.axis);
            break;
        case JointKind::fixed:
            throw std::invalid_argument("motion_subspace: joint '" + spec.name + "' is fixed");
    }
    return s;
}

SpatialInertia spatial_inertia(const LinkInertia& inertia) {
    const double m = inertia.mass;
    const Mat3d cx = skew(inertia.com);
    const Mat3d cxcxt = matmul(cx, transpose(cx));
    SpatialInertia out;
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            out[i][j] = inertia.inertia_about_com[i][j] + m * cxcxt[i][j];
            out[i][j + 3] = m * cx[i][j];
            out[i + 3][j] = m * cx[j][i];
            out[i + 3][j + 3] = i == j ? m : 0.0;
        }
    }
    return out;
}

SpatialTransform identity_transform() {
    SpatialTransform X;
    X.E = {{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
    X.r = {0, 0, 0};
    return X;
}

SpatialTransform inverse(const SpatialTransform& X) {
    // child->parent: E' = E^T, r' = -E r
    SpatialTransform out;
    out.E = transpose(X.E);
    const Vec3d er = rotate(X.E, X.r);
    out.r = {-er[0], -er[1], -er[2]};
    return out;
}

SpatialTransform compose(const SpatialTransform& a, const SpatialTransform& b) {
    // b: frame0 -> frame1, a: frame1 -> frame2. Origin of frame2 in frame0 is
    // r_b + E_b^T r_a.
    SpatialTransform out;
    out.E = matmul(a.E, b.E);
    out.r = add3(b.r, rotate_transpose(b.E, a.r));
    return out;
}

Matrix6d to_eigen(const Matrix6<double>& m) {
    Matrix6d out;
    for (int r = 0; r < 6; ++r)
        for (int c = 0; c < 6; ++c) out(r, c) = m[r][c];
    return out;
}

Vector6d to_eigen(const SpatialVec& v) {
    Vector6d out;
    for (int k = 0; k < 6; ++k) out(k) = v[k];
    return out;
}

SpatialVec from_eigen(const Vector6d& v) {
    SpatialVec out;
    for (int k = 0; k < 6; ++k) out[k] = v(k);
    return out;
}

Matrix6<double> from_eigen(const Matrix6d& m) {
    Matrix6<double> out;
    for (int r = 0; r < 6; ++r)
        for (int c = 0; c < 6; ++c) out[r][c] = m(r, c);
    return out;
}

Matrix6d dense_motion_matrix(const SpatialTransform& X) {
    const Eigen::Matrix3d E = to_eigen3(X.E);
    const Eigen::Matrix3d rx = to_eigen3(skew(X.r));
    Matrix6d out = Matrix6d::Zero();
    out.topLeftCorner<3, 3>() = E;
    out.bottomLeftCorner<3, 3>() = -E * rx;
    out.bottomRightCorner<3, 3>() = E;
    return out;
}

Matrix6d dense_force_matrix(const SpatialTransform& X) {
    const Eigen::Matrix3d E = to_eigen3(X.E);
    const Eigen::Matrix3d rx = to_eigen3(skew(X.r));
    Matrix6d out = Matrix6d::Zero();
    out.topLeftCorner<3, 3>() = E;
    out.topRightCorner<3, 3>() = -E * rx;
    out.bottomRightCorner<3, 3>() = E;
    return out;
}

}  // namespace rbdkit::spatial
