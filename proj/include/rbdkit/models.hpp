#pragma once

// Bundled robot models and seeded samplers for states and random robots.
//
// The bundled ladder mirrors common benchmark complexity: a 1-dof link, a
// 2-dof planar pendulum, a 7-dof manipulator chain, a 12-dof four-limb
// quadruped-like tree and a 30-dof humanoid-like tree. All are fixed-base.

#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "rbdkit/refdyn.hpp"
#include "rbdkit/urdf_model.hpp"

namespace rbdkit {

struct BundledModel {
    std::string name;
    int n_dof;
    std::string urdf;
};

const std::vector<BundledModel>& bundled_models();
std::string bundled_urdf(std::string_view name);
RobotModel bundled_model(std::string_view name);

/// Resolves "bundled:<name>" or a filesystem path.
RobotModel load_model(const std::string& spec);

/// Seven-frame tree with parents {-1, 0, 1, 2, 1, 0, 5}.
std::string branching_example_urdf();

/// `limbs` serial limbs of `limb_length` revolute joints, each attached to the base.
std::string star_urdf(int limbs, int limb_length);

/// Random robot with revolute/prismatic joints and occasional fixed links.
std::string random_robot_urdf(std::mt19937_64& rng, int n_dof, bool branched);

struct StateRanges {
    double q = 3.14159265358979323846;
    double prismatic_q = 0.5;
    double qd = 2.0;
    double u = 5.0;
};

/// q, qd and a generic third vector (qdd or tau) drawn uniformly.
JointState random_state(const RobotModel& model, std::mt19937_64& rng, const StateRanges& ranges = {});

ExternalForces random_forces(const RobotModel& model, std::mt19937_64& rng, double magnitude = 2.0);

}  // namespace rbdkit
