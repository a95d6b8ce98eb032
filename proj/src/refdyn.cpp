#include "rbdkit/refdyn.hpp"

#include <stdexcept>
#include <string>

namespace rbdkit {

using spatial::Matrix6;
using spatial::SpatialTransform;
using spatial::SpatialVec;

namespace {

void check_vector(const RobotModel& model, const VectorXd& x, const char* what) {
    if (x.size() != model.n_dof) {
        throw std::invalid_argument(std::string(what) + " has length " + std::to_string(x.size()) + ", expected " +
                                    std::to_string(model.n_dof));
    }
}

void check_forces(const RobotModel& model, const ExternalForces* f_ext) {
    if (f_ext && static_cast<int>(f_ext->size()) != model.n_frames) {
        throw std::invalid_argument("f_ext has " + std::to_string(f_ext->size()) + " entries, expected " +
                                    std::to_string(model.n_frames));
    }
}

std::vector<SpatialTransform> joint_transforms(const RobotModel& model, const VectorXd& q) {
    std::vector<SpatialTransform> X(static_cast<size_t>(model.n_frames));
    for (int i = 0; i < model.n_frames; ++i) X[i] = spatial::xform_from_joint(model.joints[i], q(i));
    return X;
}

SpatialVec zero_vec() { return SpatialVec{}; }

}  // namespace

std::vector<int> subtree(const RobotModel& model, int frame) {
    std::vector<int> out;
    for (int k = frame; k < model.n_frames; ++k) {
        if (model.is_ancestor_or_self(frame, k)) out.push_back(k);
    }
    return out;
}

SpatialVec gravity_acceleration(const RobotModel& model) {
    return SpatialVec::from_parts({0.0, 0.0, 0.0}, {-model.gravity[0], -model.gravity[1], -model.gravity[2]});
}

RneaSweep rnea_forward(const RobotModel& model, const VectorXd& q, const VectorXd& qd, const VectorXd& qdd,
                       const ExternalForces* f_ext, std::span<const int> order) {
    check_vector(model, q, "q");
    check_vector(model, qd, "qd");
    check_vector(model, qdd, "qdd");
    check_forces(model, f_ext);
    if (static_cast<int>(order.size()) != model.n_frames) throw std::invalid_argument("order must list every frame");

    const auto n = static_cast<size_t>(model.n_frames);
    RneaSweep sweep;
    sweep.X = joint_transforms(model, q);
    sweep.v.assign(n, zero_vec());
    sweep.a.assign(n, zero_vec());
    sweep.f.assign(n, zero_vec());
    std::vector<bool> done(n, false);
    const SpatialVec a0 = gravity_acceleration(model);

    for (int i : order) {
        const int parent = model.parent[i];
        if (parent >= 0 && !done[parent]) throw std::invalid_argument("order visits a frame before its parent");
        const SpatialTransform& X = sweep.X[i];
        const SpatialVec S = spatial::motion_subspace(model.joints[i]);
        const auto I = spatial::spatial_inertia(model.inertias[i]);

        const SpatialVec s_qd = spatial::scale(S, qd(i));
        const SpatialVec v = parent < 0 ? s_qd : spatial::apply_motion(X, sweep.v[parent]) + s_qd;
        const SpatialVec xa = spatial::apply_motion(X, parent < 0 ? a0 : sweep.a[parent]);
        const SpatialVec a = xa + spatial::scale(S, qdd(i)) + spatial::cross_motion(v, s_qd);
        SpatialVec f = spatial::mul(I, a) + spatial::cross_force(v, spatial::mul(I, v));
        if (f_ext) f = f - (*f_ext)[i];

        sweep.v[i] = v;
        sweep.a[i] = a;
        sweep.f[i] = f;
        done[i] = true;
    }
    return sweep;
}

RneaSweep rnea_sweep(const RobotModel& model, const VectorXd& q, const VectorXd& qd, const VectorXd& qdd,
                     const ExternalForces* f_ext) {
    std::vector<int> order(static_cast<size_t>(model.n_frames));
    for (int i = 0; i < model.n_frames; ++i) order[i] = i;
    RneaSweep sweep = rnea_forward(model, q, qd, qdd, f_ext, order);
    for (int i = model.n_frames - 1; i >= 0; --i) {
        const int parent = model.parent[i];
        if (parent >= 0) sweep.f[parent] = sweep.f[parent] + spatial::apply_transpose(sweep.X[i], sweep.f[i]);
    }
    return sweep;
}

VectorXd rnea(const RobotModel& model, const VectorXd& q, const VectorXd& qd, const VectorXd& qdd,
              const ExternalForces* f_ext) {
    const RneaSweep sweep = rnea_sweep(model, q, qd, qdd, f_ext);
    VectorXd tau(model.n_dof);
    for (int i = 0; i < model.n_frames; ++i) {
        tau(i) = spatial::dot(spatial::motion_subspace(model.joints[i]), sweep.f[i]);
    }
    return tau;
}

VectorXd bias_force(const RobotModel& model, const VectorXd& q, const VectorXd& qd, const ExternalForces* f_ext) {
    return rnea(model, q, qd, VectorXd::Zero(model.n_dof), f_ext);
}

MatrixXd crba_mass_matrix(const RobotModel& model, const VectorXd& q) {
    check_vector(model, q, "q");
    const int n = model.n_frames;
    std::vector<spatial::Matrix6d> Xd(static_cast<size_t>(n)), Ic(static_cast<size_t>(n));
    std::vector<spatial::Vector6d> S(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        Xd[i] = spatial::dense_motion_matrix(spatial::xform_from_joint(model.joints[i], q(i)));
        Ic[i] = spatial::to_eigen(spatial::spatial_inertia(model.inertias[i]));
        S[i] = spatial::to_eigen(spatial::motion_subspace(model.joints[i]));
    }
    for (int i = n - 1; i >= 0; --i) {
        const int p = model.parent[i];
        if (p >= 0) Ic[p] += Xd[i].transpose() * Ic[i] * Xd[i];
    }
    MatrixXd M = MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        spatial::Vector6d F = Ic[i] * S[i];
        M(i, i) = S[i].dot(F);
        for (int j = i; model.parent[j] >= 0;) {
            F = Xd[j].transpose() * F;
            j = model.parent[j];
            M(i, j) = M(j, i) = S[j].dot(F);
        }
    }
    return M;
}

MatrixXd mass_matrix_by_columns(const RobotModel& model, const VectorXd& q) {
    RobotModel no_gravity = model;
    no_gravity.gravity = {0.0, 0.0, 0.0};
    const int n = model.n_dof;
    MatrixXd M(n, n);
    const VectorXd zero = VectorXd::Zero(n);
    for (int j = 0; j < n; ++j) M.col(j) = rnea(no_gravity, q, zero, VectorXd::Unit(n, j));
    return M;
}

MatrixXd minv_direct(const RobotModel& model, const VectorXd& q, MinvTemporaries* temporaries) {
    check_vector(model, q, "q");
    const int n = model.n_frames;
    const auto nn = static_cast<size_t>(n);
    const std::vector<SpatialTransform> X = joint_transforms(model, q);

    std::vector<Matrix6<double>> IA(nn);
    for (int i = 0; i < n; ++i) IA[i] = spatial::spatial_inertia(model.inertias[i]);
    std::vector<SpatialVec> U(nn);
    std::vector<double> Dinv(nn, 0.0);
    std::vector<std::vector<SpatialVec>> F(nn, std::vector<SpatialVec>(nn, zero_vec()));
    MatrixXd Minv = MatrixXd::Zero(n, n);

    // Backward: articulated inertias and unit-torque bias forces.
    for (int i = n - 1; i >= 0; --i) {
        const SpatialVec S = spatial::motion_subspace(model.joints[i]);
        const int parent = model.parent[i];
        U[i] = spatial::mul(IA[i], S);
        Dinv[i] = spatial::recip(spatial::dot(S, U[i]));
        const std::vector<int> sub = subtree(model, i);
        for (int j : sub) {
            const double unit = j == i ? 1.0 : 0.0;
            Minv(i, j) = Dinv[i] * (unit - spatial::dot(S, F[i][j]));
            if (parent >= 0) F[i][j] = F[i][j] + spatial::scale(U[i], Minv(i, j));
        }
        if (parent < 0) continue;
        Matrix6<double> Ia;
        for (int r = 0; r < 6; ++r) {
            for (int c = 0; c < 6; ++c) Ia[r][c] = IA[i][r][c] - U[i][r] * (Dinv[i] * U[i][c]);
        }
        const Matrix6<double> up = spatial::inertia_to_parent(X[i], Ia);
        for (int r = 0; r < 6; ++r)
            for (int c = 0; c < 6; ++c) IA[parent][r][c] = IA[parent][r][c] + up[r][c];
        for (int j : sub) F[parent][j] = F[parent][j] + spatial::apply_transpose(X[i], F[i][j]);
    }
    if (temporaries) temporaries->F = F;

    // Forward: propagate unit-torque accelerations; upper triangle only.
    std::vector<std::vector<SpatialVec>> A(nn, std::vector<SpatialVec>(nn, zero_vec()));
    for (int i = 0; i < n; ++i) {
        const SpatialVec S = spatial::motion_subspace(model.joints[i]);
        const int parent = model.parent[i];
        for (int j = i; j < n; ++j) {
            SpatialVec t;
            if (parent >= 0) {
                t = spatial::apply_motion(X[i], A[parent][j]);
                Minv(i, j) = Minv(i, j) - Dinv[i] * spatial::dot(U[i], t);
            }
            if (j > i) A[i][j] = parent >= 0 ? spatial::scale(S, Minv(i, j)) + t : spatial::scale(S, Minv(i, j));
        }
    }
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) Minv(j, i) = Minv(i, j);
    return Minv;
}

VectorXd forward_dynamics(const RobotModel& model, const VectorXd& q, const VectorXd& qd, const VectorXd& tau,
                          const ExternalForces* f_ext) {
    check_vector(model, tau, "tau");
    const VectorXd c = bias_force(model, q, qd, f_ext);
    const MatrixXd Minv = minv_direct(model, q);
    const int n = model.n_dof;
    VectorXd u(n);
    for (int j = 0; j < n; ++j) u(j) = tau(j) - c(j);
    VectorXd qdd(n);
    for (int i = 0; i < n; ++i) {
        double acc = Minv(i, 0) * u(0);
        for (int j = 1; j < n; ++j) acc = acc + Minv(i, j) * u(j);
        qdd(i) = acc;
    }
    return qdd;
}

DynamicsGradients rnea_grad(const RobotModel& model, const VectorXd& q, const VectorXd& qd, const VectorXd& qdd,
                            const ExternalForces* f_ext, GradientTemporaries* temporaries) {
    const RneaSweep sweep = rnea_sweep(model, q, qd, qdd, f_ext);
    const int n = model.n_frames;
    const auto nn = static_cast<size_t>(n);
    const SpatialVec a0 = gravity_acceleration(model);
    using Columns = std::vector<std::vector<SpatialVec>>;

    DynamicsGradients out{MatrixXd::Zero(n, n), MatrixXd::Zero(n, n)};
    GradientTemporaries local;
    GradientTemporaries& tmp = temporaries ? *temporaries : local;

    for (int wrt_q = 1; wrt_q >= 0; --wrt_q) {
        Columns dv(nn, std::vector<SpatialVec>(nn, zero_vec()));
        Columns da = dv, df = dv;

        for (int i = 0; i < n; ++i) {
            const int parent = model.parent[i];
            const SpatialTransform& X = sweep.X[i];
            const SpatialVec S = spatial::motion_subspace(model.joints[i]);
            const auto I = spatial::spatial_inertia(model.inertias[i]);
            const SpatialVec& v = sweep.v[i];
            const SpatialVec s_qd = spatial::scale(S, qd(i));
            const SpatialVec Iv = spatial::mul(I, v);
            for (int j = 0; j < n; ++j) {
                SpatialVec dvj = parent >= 0 ? spatial::apply_motion(X, dv[parent][j]) : zero_vec();
                if (j == i) {
                    if (wrt_q) {
                        if (parent >= 0) dvj = dvj + spatial::cross_motion(spatial::apply_motion(X, sweep.v[parent]), S);
                    } else {
                        dvj = dvj + S;
                    }
                }
                SpatialVec daj = parent >= 0 ? spatial::apply_motion(X, da[parent][j]) : zero_vec();
                daj = daj + spatial::cross_motion(dvj, s_qd);
                if (j == i) {
                    if (wrt_q) {
                        daj = daj + spatial::cross_motion(spatial::apply_motion(X, parent >= 0 ? sweep.a[parent] : a0), S);
                    } else {
                        daj = daj + spatial::cross_motion(v, S);
                    }
                }
                dv[i][j] = dvj;
                da[i][j] = daj;
                df[i][j] = spatial::mul(I, daj) + spatial::cross_force(dvj, Iv) +
                           spatial::cross_force(v, spatial::mul(I, dvj));
            }
        }

        for (int i = n - 1; i >= 0; --i) {
            const int parent = model.parent[i];
            if (parent < 0) continue;
            const SpatialTransform& X = sweep.X[i];
            for (int j = 0; j < n; ++j) df[parent][j] = df[parent][j] + spatial::apply_transpose(X, df[i][j]);
            if (wrt_q) {
                const SpatialVec S = spatial::motion_subspace(model.joints[i]);
                df[parent][i] = df[parent][i] + spatial::apply_transpose(X, spatial::cross_force(S, sweep.f[i]));
            }
        }

        MatrixXd& d = wrt_q ? out.dq : out.dqd;
        for (int i = 0; i < n; ++i) {
            const SpatialVec S = spatial::motion_subspace(model.joints[i]);
            for (int j = 0; j < n; ++j) d(i, j) = spatial::dot(S, df[i][j]);
        }
        if (wrt_q) {
            tmp.dv_dq = std::move(dv);
            tmp.da_dq = std::move(da);
            tmp.df_dq = std::move(df);
        } else {
            tmp.dv_dqd = std::move(dv);
            tmp.da_dqd = std::move(da);
            tmp.df_dqd = std::move(df);
        }
    }
    return out;
}

DynamicsGradients fd_grad(const RobotModel& model, const VectorXd& q, const VectorXd& qd, const VectorXd& tau,
                          const ExternalForces* f_ext) {
    const VectorXd qdd = forward_dynamics(model, q, qd, tau, f_ext);
    const DynamicsGradients dtau = rnea_grad(model, q, qd, qdd, f_ext);
    const MatrixXd Minv = minv_direct(model, q);
    const int n = model.n_dof;
    DynamicsGradients out{MatrixXd(n, n), MatrixXd(n, n)};
    for (int which = 0; which < 2; ++which) {
        const MatrixXd& src = which == 0 ? dtau.dq : dtau.dqd;
        MatrixXd& dst = which == 0 ? out.dq : out.dqd;
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                double acc = Minv(i, 0) * src(0, j);
                for (int k = 1; k < n; ++k) acc = acc + Minv(i, k) * src(k, j);
                dst(i, j) = -acc;
            }
        }
    }
    return out;
}

MatrixXd finite_diff_oracle(const std::function<VectorXd(const VectorXd&)>& fn, const VectorXd& x, double h) {
    if (!(h > 0.0)) throw std::invalid_argument("finite_diff_oracle: step must be positive");
    const VectorXd f0 = fn(x);
    MatrixXd J(f0.size(), x.size());
    for (int j = 0; j < x.size(); ++j) {
        VectorXd xp = x, xm = x;
        xp(j) += h;
        xm(j) -= h;
        // Divide by the step actually taken; x +/- h is rounded.
        J.col(j) = (fn(xp) - fn(xm)) / (xp(j) - xm(j));
    }
    return J;
}

}  // namespace rbdkit
