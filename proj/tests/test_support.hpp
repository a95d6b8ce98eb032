#pragma once

// Shared test helpers: URDF writers, matrix comparisons and a tip-force Jacobian oracle.

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "rbdkit/refdyn.hpp"
#include "rbdkit/urdf_model.hpp"

namespace rbdkit::test {

struct LinkXml {
    std::string name;
    double mass = 0.0;
    Vec3d com{0.0, 0.0, 0.0};
    /// Diagonal of the rotational inertia about the center of mass.
    Vec3d inertia{0.0, 0.0, 0.0};
};

struct JointXml {
    std::string name;
    std::string type = "revolute";
    std::string parent;
    std::string child;
    Vec3d xyz{0.0, 0.0, 0.0};
    Vec3d rpy{0.0, 0.0, 0.0};
    Vec3d axis{0.0, 0.0, 1.0};
};

inline std::string triple(const Vec3d& v) {
    std::ostringstream out;
    out.precision(17);
    out << v[0] << " " << v[1] << " " << v[2];
    return out.str();
}

inline std::string urdf_text(const std::string& name, const std::vector<LinkXml>& links,
                             const std::vector<JointXml>& joints) {
    std::ostringstream out;
    out.precision(17);
    out << "<?xml version=\"1.0\"?>\n<robot name=\"" << name << "\">\n";
    for (const auto& l : links) {
        if (l.mass == 0.0 && l.inertia == Vec3d{0.0, 0.0, 0.0}) {
            out << "  <link name=\"" << l.name << "\"/>\n";
            continue;
        }
        out << "  <link name=\"" << l.name << "\">\n    <inertial>\n"
            << "      <origin xyz=\"" << triple(l.com) << "\" rpy=\"0 0 0\"/>\n"
            << "      <mass value=\"" << l.mass << "\"/>\n"
            << "      <inertia ixx=\"" << l.inertia[0] << "\" ixy=\"0\" ixz=\"0\" iyy=\"" << l.inertia[1]
            << "\" iyz=\"0\" izz=\"" << l.inertia[2] << "\"/>\n"
            << "    </inertial>\n  </link>\n";
    }
    for (const auto& j : joints) {
        out << "  <joint name=\"" << j.name << "\" type=\"" << j.type << "\">\n"
            << "    <parent link=\"" << j.parent << "\"/>\n    <child link=\"" << j.child << "\"/>\n"
            << "    <origin xyz=\"" << triple(j.xyz) << "\" rpy=\"" << triple(j.rpy) << "\"/>\n"
            << "    <axis xyz=\"" << triple(j.axis) << "\"/>\n  </joint>\n";
    }
    out << "</robot>\n";
    return out.str();
}

/// One revolute-z link with a point mass `mass` at distance `length` along x.
inline std::string point_mass_link_urdf(double mass = 1.0, double length = 1.0) {
    return urdf_text("link", {{"base"}, {"arm", mass, {length, 0.0, 0.0}, {0.0, 0.0, 0.0}}},
                     {{"j", "revolute", "base", "arm"}});
}

inline double max_abs(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    return (a - b).cwiseAbs().maxCoeff();
}

/// max |a - b| / max(1, |b|) elementwise.
inline double max_rel(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < a.size(); ++i)
        worst = std::max(worst, std::abs(a(i) - b(i)) / std::max(1.0, std::abs(b(i))));
    return worst;
}

inline Eigen::MatrixXd flat(const std::vector<double>& v, int rows, int cols) {
    Eigen::MatrixXd m(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) m(r, c) = v[static_cast<size_t>(r * cols + c)];
    return m;
}

/// World-frame pose of every frame, from dense rotation matrices.
struct WorldKinematics {
    std::vector<Eigen::Matrix3d> R;  ///< frame to world
    std::vector<Eigen::Vector3d> p;  ///< frame origin in world
};

inline WorldKinematics world_kinematics(const RobotModel& m, const Eigen::VectorXd& q) {
    WorldKinematics k;
    for (int i = 0; i < m.n_frames; ++i) {
        const JointSpec& j = m.joints[i];
        Eigen::Matrix3d R0;
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) R0(r, c) = j.origin_rotation[r][c];
        const Eigen::Vector3d axis(j.axis[0], j.axis[1], j.axis[2]);
        Eigen::Vector3d offset(j.origin_translation[0], j.origin_translation[1], j.origin_translation[2]);
        Eigen::Matrix3d Rj = R0;
        if (j.kind == JointKind::revolute) Rj = R0 * Eigen::AngleAxisd(q[i], axis).toRotationMatrix();
        if (j.kind == JointKind::prismatic) offset += R0 * axis * q[i];
        const int p = m.parent[i];
        k.R.push_back(p < 0 ? Rj : Eigen::Matrix3d(k.R[p] * Rj));
        k.p.push_back(p < 0 ? offset : Eigen::Vector3d(k.p[p] + k.R[p] * offset));
    }
    return k;
}

struct TipForce {
    /// The world force as a per-frame spatial force (link frame, link origin).
    ExternalForces f_ext;
    /// -J^T F with J the geometric linear Jacobian of the tip point.
    Eigen::VectorXd expected_delta_tau;
};

/// World-frame force `F` applied at `tip_local` (coordinates of frame `tip`).
inline TipForce tip_force(const RobotModel& m, const Eigen::VectorXd& q, int tip, const Eigen::Vector3d& tip_local,
                          const Eigen::Vector3d& F) {
    const WorldKinematics k = world_kinematics(m, q);
    const Eigen::Vector3d p_tip = k.p[tip] + k.R[tip] * tip_local;
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(3, m.n_dof);
    for (int j = 0; j < m.n_frames; ++j) {
        if (!m.is_ancestor_or_self(j, tip)) continue;
        const Eigen::Vector3d a = k.R[j] * Eigen::Vector3d(m.joints[j].axis[0], m.joints[j].axis[1], m.joints[j].axis[2]);
        J.col(j) = m.joints[j].kind == JointKind::revolute ? Eigen::Vector3d(a.cross(p_tip - k.p[j])) : a;
    }
    TipForce out;
    out.f_ext.resize(static_cast<size_t>(m.n_frames));
    const Eigen::Vector3d f_local = k.R[tip].transpose() * F;
    const Eigen::Vector3d n_local = tip_local.cross(f_local);
    out.f_ext[tip] = spatial::SpatialVec{{n_local[0], n_local[1], n_local[2], f_local[0], f_local[1], f_local[2]}};
    out.expected_delta_tau = -J.transpose() * F;
    return out;
}

}  // namespace rbdkit::test
