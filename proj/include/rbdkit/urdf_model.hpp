#pragma once

// Robot model: URDF loading, fixed-joint fusion and canonical frame numbering.
//
// Moving frames are numbered 0..n_frames-1 so that every parent index is
// strictly lower than its child's (-1 marks a child of the fixed base).
// After fusion every frame carries exactly one revolute or prismatic joint,
// so n_frames == n_dof and frame i drives joint position q[i].

#include <array>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace rbdkit {

using Vec3d = std::array<double, 3>;
using Mat3d = std::array<std::array<double, 3>, 3>;  // row-major

/// Base of every error raised while building a model.
class ModelError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Malformed XML or missing/invalid URDF attribute. line() is 0 when unknown.
class ParseError : public ModelError {
  public:
    ParseError(const std::string& what, int line);
    int line() const { return line_; }

  private:
    int line_;
};

/// A URDF feature outside revolute/continuous/prismatic/fixed joints.
class UnsupportedFeatureError : public ModelError {
  public:
    using ModelError::ModelError;
};

/// Disconnected links, multiple parents or cycles.
class TopologyError : public ModelError {
  public:
    using ModelError::ModelError;
};

/// Duplicate names, dangling references, invalid numeric content.
class ValidationError : public ModelError {
  public:
    using ModelError::ModelError;
};

enum class JointKind { revolute, prismatic, fixed };

std::string_view to_string(JointKind kind);

struct JointSpec {
    std::string name;
    JointKind kind = JointKind::revolute;
    /// Unit axis in the joint frame.
    Vec3d axis{0.0, 0.0, 1.0};
    /// Orientation of the joint frame in the parent frame: maps joint-frame
    /// coordinates to parent-frame coordinates (URDF origin rpy).
    Mat3d origin_rotation{{{1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}, {0.0, 0.0, 1.0}}};
    /// Joint frame origin in parent coordinates, meters.
    Vec3d origin_translation{0.0, 0.0, 0.0};
    /// Index into q; absent for fixed joints.
    std::optional<int> position_index;
};

struct LinkInertia {
    double mass = 0.0;
    /// Center of mass in link coordinates.
    Vec3d com{0.0, 0.0, 0.0};
    /// Rotational inertia about the center of mass, link-aligned axes.
    Mat3d inertia_about_com{};
};

struct RobotModel {
    std::string name;
    std::string base_link;
    int n_frames = 0;
    int n_dof = 0;
    std::vector<int> parent;
    std::vector<JointSpec> joints;
    std::vector<LinkInertia> inertias;
    std::vector<std::string> link_names;
    Vec3d gravity{0.0, 0.0, -9.81};

    std::vector<std::vector<int>> children() const;
    /// Tree depth of each frame (children of the base have depth 0).
    std::vector<int> depths() const;
    /// True if a is an ancestor of b or a == b.
    bool is_ancestor_or_self(int a, int b) const;
};

enum class Topology { serial_chain, branched_tree };

std::string_view to_string(Topology topology);

/// URDF contents before fusion and renumbering, in declaration order.
struct UrdfTree {
    struct Link {
        std::string name;
        LinkInertia inertia;
    };
    struct Joint {
        JointSpec spec;
        std::string parent_link;
        std::string child_link;
    };
    std::string name;
    std::vector<Link> links;
    std::vector<Joint> joints;
};

struct ParseOptions {
    Vec3d gravity{0.0, 0.0, -9.81};
};

/// Reads the URDF subset (robot/link/joint, inertial, origin, axis) without
/// fusing or renumbering.
UrdfTree read_urdf_tree(std::string_view xml_text);

/// Folds every fixed-jointed child into its parent link. The result has no
/// fixed joints; total mass and composite inertia are preserved.
UrdfTree fuse_fixed(const UrdfTree& tree);

/// Validates topology and numbers frames by a topological sort that breaks
/// ties by link declaration order.
RobotModel build_model(const UrdfTree& fused_tree, const ParseOptions& options = {});

RobotModel parse_urdf(std::string_view xml_text, const ParseOptions& options = {});
RobotModel load_urdf(const std::filesystem::path& path, const ParseOptions& options = {});

Topology classify_topology(const RobotModel& model);

/// Canonical URDF for a model; re-parsing it yields an identical model.
std::string emit_urdf(const RobotModel& model);

/// Throws ValidationError naming the first violated invariant.
void validate_model(const RobotModel& model);

Mat3d rpy_to_rotation(const Vec3d& rpy);
Vec3d rotation_to_rpy(const Mat3d& rotation);

}  // namespace rbdkit
