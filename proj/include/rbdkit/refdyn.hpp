#pragma once

// Reference rigid body dynamics: clarity-first implementations that serve as
// ground truth for generated kernels, plus independent oracles (composite
// rigid body mass matrix, finite differences).
//
// Conventions:
//   - tau = M(q) qdd + C(q,qd) qd + G(q) - J^T F, fully actuated (B = I).
//   - External forces are per-frame spatial forces in the link's own frame
//     at the link origin.
//   - Gravity enters as a fictitious base acceleration a0 = [0; -g].

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "rbdkit/spatial.hpp"
#include "rbdkit/urdf_model.hpp"

namespace rbdkit {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using ExternalForces = std::vector<spatial::SpatialVec>;

/// q, qd and either qdd or tau depending on the algorithm.
struct JointState {
    VectorXd q;
    VectorXd qd;
    VectorXd u;
    std::optional<ExternalForces> f_ext;
};

struct DynamicsGradients {
    MatrixXd dq;   ///< d out / d q
    MatrixXd dqd;  ///< d out / d qd
};

/// Per-frame sweep quantities of one inverse dynamics evaluation.
struct RneaSweep {
    std::vector<spatial::SpatialTransform> X;
    std::vector<spatial::SpatialVec> v, a, f;
};

/// Dense copies of the per-frame gradient temporaries, indexed [frame][column].
struct GradientTemporaries {
    std::vector<std::vector<spatial::SpatialVec>> dv_dq, da_dq, df_dq;
    std::vector<std::vector<spatial::SpatialVec>> dv_dqd, da_dqd, df_dqd;
};

/// Dense copy of the backward-pass force columns of the direct inverse.
struct MinvTemporaries {
    std::vector<std::vector<spatial::SpatialVec>> F;
};

/// Spatial base acceleration standing in for gravity.
spatial::SpatialVec gravity_acceleration(const RobotModel& model);

/// Forward sweep (v, a, f before force accumulation) visiting frames in
/// `order`, which must list every frame after its parent.
RneaSweep rnea_forward(const RobotModel& model, const VectorXd& q, const VectorXd& qd, const VectorXd& qdd,
                       const ExternalForces* f_ext, std::span<const int> order);

/// Full sweep: forward in index order, then force accumulation toward the base.
RneaSweep rnea_sweep(const RobotModel& model, const VectorXd& q, const VectorXd& qd, const VectorXd& qdd,
                     const ExternalForces* f_ext = nullptr);

VectorXd rnea(const RobotModel& model, const VectorXd& q, const VectorXd& qd, const VectorXd& qdd,
              const ExternalForces* f_ext = nullptr);

/// rnea(q, qd, 0): Coriolis, centrifugal, gravity and external terms.
VectorXd bias_force(const RobotModel& model, const VectorXd& q, const VectorXd& qd,
                    const ExternalForces* f_ext = nullptr);

/// Composite rigid body mass matrix using dense Plucker matrices (oracle).
MatrixXd crba_mass_matrix(const RobotModel& model, const VectorXd& q);

/// Mass matrix assembled column-wise as rnea(q, 0, e_j) without gravity.
MatrixXd mass_matrix_by_columns(const RobotModel& model, const VectorXd& q);

/// Inverse mass matrix by the recursive articulated-body factorization.
MatrixXd minv_direct(const RobotModel& model, const VectorXd& q, MinvTemporaries* temporaries = nullptr);

/// qdd = M^-1 (tau - bias_force).
VectorXd forward_dynamics(const RobotModel& model, const VectorXd& q, const VectorXd& qd, const VectorXd& tau,
                          const ExternalForces* f_ext = nullptr);

/// Analytical d tau / d q and d tau / d qd.
DynamicsGradients rnea_grad(const RobotModel& model, const VectorXd& q, const VectorXd& qd, const VectorXd& qdd,
                            const ExternalForces* f_ext = nullptr, GradientTemporaries* temporaries = nullptr);

/// d qdd / d u = -M^-1 d tau / d u evaluated at qdd = forward_dynamics(q, qd, tau).
DynamicsGradients fd_grad(const RobotModel& model, const VectorXd& q, const VectorXd& qd, const VectorXd& tau,
                          const ExternalForces* f_ext = nullptr);

/// Central differences (fn(x + h e_j) - fn(x - h e_j)) / 2h, column-wise.
MatrixXd finite_diff_oracle(const std::function<VectorXd(const VectorXd&)>& fn, const VectorXd& x, double h);

/// Frames whose ancestor-or-self set contains `frame`, ascending.
std::vector<int> subtree(const RobotModel& model, int frame);

}  // namespace rbdkit
