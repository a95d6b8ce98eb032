#pragma once

// Spatial (6-D) algebra.
//
// Vectors are ordered [angular; linear]. A transform X = (E, r) maps motion
// vectors from a parent frame to a child frame, where E rotates parent
// coordinates into child coordinates and r is the child origin expressed in
// the parent frame:
//
//     X = [ E        0 ]        X* = X^-T = [ E   -E rx ]
//         [ -E rx    E ]                    [ 0    E    ]
//
// Everything below is templated on the scalar so the same arithmetic, in the
// same order, runs on doubles and on the code generator's symbolic values.
// Structural zeros are skipped explicitly; the symbolic scalar additionally
// folds multiplications by 0 and 1, which leaves results bit-identical.

#include <array>
#include <cmath>

#include <Eigen/Core>

#include "rbdkit/urdf_model.hpp"

namespace rbdkit::spatial {

template <class S>
using Vec3 = std::array<S, 3>;

template <class S>
using Mat3 = std::array<std::array<S, 3>, 3>;

template <class S>
struct SpatialVector {
    std::array<S, 6> c{};

    S& operator[](int k) { return c[k]; }
    const S& operator[](int k) const { return c[k]; }
    Vec3<S> angular() const { return {c[0], c[1], c[2]}; }
    Vec3<S> linear() const { return {c[3], c[4], c[5]}; }

    static SpatialVector from_parts(const Vec3<S>& ang, const Vec3<S>& lin) {
        return {{ang[0], ang[1], ang[2], lin[0], lin[1], lin[2]}};
    }
};

/// Dense 6x6 operator (row-major).
template <class S>
struct Matrix6 {
    std::array<std::array<S, 6>, 6> m{};

    std::array<S, 6>& operator[](int r) { return m[r]; }
    const std::array<S, 6>& operator[](int r) const { return m[r]; }
};

template <class S>
struct Transform {
    Mat3<S> E{};
    Vec3<S> r{};
};

using SpatialVec = SpatialVector<double>;
using SpatialTransform = Transform<double>;
using SpatialInertia = Matrix6<double>;
using Matrix6d = Eigen::Matrix<double, 6, 6>;
using Vector6d = Eigen::Matrix<double, 6, 1>;

inline double recip(double x) { return 1.0 / x; }

// ---------------------------------------------------------------------------
// 3-D helpers
// ---------------------------------------------------------------------------

template <class S>
Vec3<S> cross3(const Vec3<S>& a, const Vec3<S>& b) {
    return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

template <class S>
Vec3<S> add3(const Vec3<S>& a, const Vec3<S>& b) {
    return {a[0] + b[0], a[1] + b[1], a[2] + b[2]};
}

template <class S>
Vec3<S> sub3(const Vec3<S>& a, const Vec3<S>& b) {
    return {a[0] - b[0], a[1] - b[1], a[2] - b[2]};
}

/// E * x
template <class S>
Vec3<S> rotate(const Mat3<S>& E, const Vec3<S>& x) {
    Vec3<S> out;
    for (int i = 0; i < 3; ++i) out[i] = E[i][0] * x[0] + E[i][1] * x[1] + E[i][2] * x[2];
    return out;
}

/// E^T * x
template <class S>
Vec3<S> rotate_transpose(const Mat3<S>& E, const Vec3<S>& x) {
    Vec3<S> out;
    for (int i = 0; i < 3; ++i) out[i] = E[0][i] * x[0] + E[1][i] * x[1] + E[2][i] * x[2];
    return out;
}

// ---------------------------------------------------------------------------
// Vector arithmetic
// ---------------------------------------------------------------------------

template <class S>
SpatialVector<S> operator+(const SpatialVector<S>& a, const SpatialVector<S>& b) {
    SpatialVector<S> out;
    for (int k = 0; k < 6; ++k) out[k] = a[k] + b[k];
    return out;
}

template <class S>
SpatialVector<S> operator-(const SpatialVector<S>& a, const SpatialVector<S>& b) {
    SpatialVector<S> out;
    for (int k = 0; k < 6; ++k) out[k] = a[k] - b[k];
    return out;
}

/// Componentwise a[k] * s.
template <class S, class T>
SpatialVector<S> scale(const SpatialVector<T>& a, const S& s) {
    SpatialVector<S> out;
    for (int k = 0; k < 6; ++k) out[k] = S(a[k]) * s;
    return out;
}

template <class S>
S dot(const SpatialVector<S>& a, const SpatialVector<S>& b) {
    S acc = a[0] * b[0];
    for (int k = 1; k < 6; ++k) acc = acc + a[k] * b[k];
    return acc;
}

template <class S, class T>
SpatialVector<S> convert(const SpatialVector<T>& a) {
    SpatialVector<S> out;
    for (int k = 0; k < 6; ++k) out[k] = S(a[k]);
    return out;
}

template <class S, class T>
Matrix6<S> convert(const Matrix6<T>& a) {
    Matrix6<S> out;
    for (int r = 0; r < 6; ++r)
        for (int c = 0; c < 6; ++c) out[r][c] = S(a[r][c]);
    return out;
}

/// Row-ordered product M * x. For the symbolic scalar, constant-zero entries
/// drop out; for doubles they contribute an exact zero.
template <class S>
SpatialVector<S> mul(const Matrix6<S>& M, const SpatialVector<S>& x) {
    SpatialVector<S> out;
    for (int r = 0; r < 6; ++r) {
        S acc = M[r][0] * x[0];
        for (int c = 1; c < 6; ++c) acc = acc + M[r][c] * x[c];
        out[r] = acc;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Spatial cross products
// ---------------------------------------------------------------------------

/// Structural nonzero pattern of the motion cross operator v x.
constexpr std::array<std::array<bool, 6>, 6> kMotionCrossPattern{{
    {false, true, true, false, false, false},
    {true, false, true, false, false, false},
    {true, true, false, false, false, false},
    {false, true, true, false, true, true},
    {true, false, true, true, false, true},
    {true, true, false, true, true, false},
}};

/// Entries of v x (zeros on structurally-zero positions).
template <class S>
Matrix6<S> crm(const SpatialVector<S>& v) {
    Matrix6<S> m;
    for (auto& row : m.m) row.fill(S(0.0));
    m[0][1] = -v[2]; m[0][2] = v[1];
    m[1][0] = v[2];  m[1][2] = -v[0];
    m[2][0] = -v[1]; m[2][1] = v[0];
    m[3][1] = -v[5]; m[3][2] = v[4]; m[3][4] = -v[2]; m[3][5] = v[1];
    m[4][0] = v[5];  m[4][2] = -v[3]; m[4][3] = v[2]; m[4][5] = -v[0];
    m[5][0] = -v[4]; m[5][1] = v[3]; m[5][3] = -v[1]; m[5][4] = v[0];
    return m;
}

/// Entries of v x* = -(v x)^T.
template <class S>
Matrix6<S> crf(const SpatialVector<S>& v) {
    const Matrix6<S> m = crm(v);
    Matrix6<S> out;
    for (int r = 0; r < 6; ++r)
        for (int c = 0; c < 6; ++c) out[r][c] = kMotionCrossPattern[c][r] ? S(-m[c][r]) : S(0.0);
    return out;
}

/// M * x over the nonzero positions of a pattern, in column order.
template <class S, class Pattern>
SpatialVector<S> pattern_mul(const Matrix6<S>& M, const Pattern& nonzero, const SpatialVector<S>& x) {
    SpatialVector<S> out;
    for (int r = 0; r < 6; ++r) {
        bool first = true;
        S acc{};
        for (int c = 0; c < 6; ++c) {
            if (!nonzero(r, c)) continue;
            if (first) {
                acc = M[r][c] * x[c];
                first = false;
            } else {
                acc = acc + M[r][c] * x[c];
            }
        }
        out[r] = first ? S(0.0) : acc;
    }
    return out;
}

inline bool motion_cross_nonzero(int r, int c) { return kMotionCrossPattern[r][c]; }
inline bool force_cross_nonzero(int r, int c) { return kMotionCrossPattern[c][r]; }

/// (v x) w evaluated from a matrix of crm entries (materialized or fresh).
template <class S>
SpatialVector<S> crm_mul(const Matrix6<S>& crm_entries, const SpatialVector<S>& w) {
    return pattern_mul(crm_entries, motion_cross_nonzero, w);
}

/// (v x*) f evaluated from a matrix of crm entries: uses -(crm)^T.
template <class S>
SpatialVector<S> crf_mul(const Matrix6<S>& crm_entries, const SpatialVector<S>& f) {
    SpatialVector<S> out;
    for (int r = 0; r < 6; ++r) {
        bool first = true;
        S acc{};
        for (int c = 0; c < 6; ++c) {
            if (!kMotionCrossPattern[c][r]) continue;
            const S term = S(-crm_entries[c][r]) * f[c];
            if (first) {
                acc = term;
                first = false;
            } else {
                acc = acc + term;
            }
        }
        out[r] = first ? S(0.0) : acc;
    }
    return out;
}

/// v x w
template <class S>
SpatialVector<S> cross_motion(const SpatialVector<S>& v, const SpatialVector<S>& w) {
    return crm_mul(crm(v), w);
}

/// v x* f
template <class S>
SpatialVector<S> cross_force(const SpatialVector<S>& v, const SpatialVector<S>& f) {
    return crf_mul(crm(v), f);
}

// ---------------------------------------------------------------------------
// Transforms
// ---------------------------------------------------------------------------

/// X v (parent motion -> child motion).
template <class S>
SpatialVector<S> apply_motion(const Transform<S>& X, const SpatialVector<S>& v) {
    const Vec3<S> w = v.angular();
    const Vec3<S> lin = sub3(v.linear(), cross3(X.r, w));
    return SpatialVector<S>::from_parts(rotate(X.E, w), rotate(X.E, lin));
}

/// X^-1 v (child motion -> parent motion).
template <class S>
SpatialVector<S> apply_motion_inverse(const Transform<S>& X, const SpatialVector<S>& v) {
    const Vec3<S> w = rotate_transpose(X.E, v.angular());
    const Vec3<S> lin = add3(rotate_transpose(X.E, v.linear()), cross3(X.r, w));
    return SpatialVector<S>::from_parts(w, lin);
}

/// X* f (parent force -> child force).
template <class S>
SpatialVector<S> apply_force(const Transform<S>& X, const SpatialVector<S>& f) {
    const Vec3<S> fl = f.linear();
    const Vec3<S> n = sub3(f.angular(), cross3(X.r, fl));
    return SpatialVector<S>::from_parts(rotate(X.E, n), rotate(X.E, fl));
}

/// X^T f (child force -> parent force).
template <class S>
SpatialVector<S> apply_transpose(const Transform<S>& X, const SpatialVector<S>& f) {
    const Vec3<S> fl = rotate_transpose(X.E, f.linear());
    const Vec3<S> n = add3(rotate_transpose(X.E, f.angular()), cross3(X.r, fl));
    return SpatialVector<S>::from_parts(n, fl);
}

/// X^T I X: a child-frame inertia expressed in the parent frame.
template <class S>
Matrix6<S> inertia_to_parent(const Transform<S>& X, const Matrix6<S>& I) {
    Matrix6<S> out;
    for (int c = 0; c < 6; ++c) {
        SpatialVector<S> e;
        e.c.fill(S(0.0));
        e[c] = S(1.0);
        const SpatialVector<S> col = apply_transpose(X, mul(I, apply_motion(X, e)));
        for (int r = 0; r < 6; ++r) out[r][c] = col[r];
    }
    return out;
}

/// X^-T I X^-1: a parent-frame inertia expressed in the child frame.
template <class S>
Matrix6<S> inertia_to_child(const Transform<S>& X, const Matrix6<S>& I) {
    Matrix6<S> out;
    for (int c = 0; c < 6; ++c) {
        SpatialVector<S> e;
        e.c.fill(S(0.0));
        e[c] = S(1.0);
        const SpatialVector<S> col = apply_force(X, mul(I, apply_motion_inverse(X, e)));
        for (int r = 0; r < 6; ++r) out[r][c] = col[r];
    }
    return out;
}

// ---------------------------------------------------------------------------
// Joint models
// ---------------------------------------------------------------------------

/// Constant pieces of a revolute joint's rotation: E(q) = C + cos(q) A + sin(q) B.
struct RevoluteRotation {
    Mat3d C{}, A{}, B{};
};

RevoluteRotation revolute_rotation(const JointSpec& spec);

/// Joint transform from the joint's sin/cos (revolute) or position (prismatic).
template <class S>
Transform<S> xform_from_joint(const JointSpec& spec, const S& q, const S& sin_q, const S& cos_q) {
    Transform<S> X;
    if (spec.kind == JointKind::revolute) {
        const RevoluteRotation rot = revolute_rotation(spec);
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) {
                X.E[i][j] = S(rot.C[i][j]) + S(rot.A[i][j]) * cos_q + S(rot.B[i][j]) * sin_q;
            }
        }
        for (int k = 0; k < 3; ++k) X.r[k] = S(spec.origin_translation[k]);
    } else {
        // E = R0^T; r = p + (R0 axis) q
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) X.E[i][j] = S(spec.origin_rotation[j][i]);
        for (int k = 0; k < 3; ++k) {
            double d = 0.0;
            for (int m = 0; m < 3; ++m) d += spec.origin_rotation[k][m] * spec.axis[m];
            X.r[k] = S(spec.origin_translation[k]) + S(d) * q;
        }
    }
    return X;
}

SpatialTransform xform_from_joint(const JointSpec& spec, double q);

/// S_i in the joint (child) frame: [axis; 0] or [0; axis].
SpatialVec motion_subspace(const JointSpec& spec);

/// 6x6 spatial inertia about the link origin.
SpatialInertia spatial_inertia(const LinkInertia& inertia);

SpatialTransform identity_transform();
SpatialTransform inverse(const SpatialTransform& X);
/// Composition: (a * b) v == a (b v).
SpatialTransform compose(const SpatialTransform& a, const SpatialTransform& b);

// ---------------------------------------------------------------------------
// Dense materializations (oracles and tests)
// ---------------------------------------------------------------------------

Matrix6d to_eigen(const Matrix6<double>& m);
Vector6d to_eigen(const SpatialVec& v);
SpatialVec from_eigen(const Vector6d& v);
Matrix6<double> from_eigen(const Matrix6d& m);

/// Plucker motion matrix of X.
Matrix6d dense_motion_matrix(const SpatialTransform& X);
/// Plucker force matrix of X (= motion matrix inverse-transposed).
Matrix6d dense_force_matrix(const SpatialTransform& X);

}  // namespace rbdkit::spatial
