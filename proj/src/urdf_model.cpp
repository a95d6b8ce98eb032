#include "rbdkit/urdf_model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <queue>
#include <set>
#include <sstream>
#include <unordered_map>

#include <Eigen/Dense>
#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

namespace rbdkit {

namespace pt = boost::property_tree;

ParseError::ParseError(const std::string& what, int line)
    : ModelError(line > 0 ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}

std::string_view to_string(JointKind kind) {
    switch (kind) {
        case JointKind::revolute: return "revolute";
        case JointKind::prismatic: return "prismatic";
        case JointKind::fixed: return "fixed";
    }
    return "?";
}

std::string_view to_string(Topology topology) {
    return topology == Topology::serial_chain ? "serial_chain" : "branched_tree";
}

std::vector<std::vector<int>> RobotModel::children() const {
    std::vector<std::vector<int>> out(static_cast<size_t>(n_frames));
    for (int i = 0; i < n_frames; ++i) {
        if (parent[i] >= 0) out[parent[i]].push_back(i);
    }
    return out;
}

std::vector<int> RobotModel::depths() const {
    std::vector<int> depth(static_cast<size_t>(n_frames), 0);
    for (int i = 0; i < n_frames; ++i) depth[i] = parent[i] < 0 ? 0 : depth[parent[i]] + 1;
    return depth;
}

bool RobotModel::is_ancestor_or_self(int a, int b) const {
    for (int k = b; k >= 0; k = parent[k]) {
        if (k == a) return true;
    }
    return false;
}

namespace {

// ---------------------------------------------------------------------------
// Small 3x3 helpers (double only; models are built once).
// ---------------------------------------------------------------------------

Mat3d identity3() { return {{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}}; }

Mat3d mul(const Mat3d& a, const Mat3d& b) {
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

Vec3d mul(const Mat3d& a, const Vec3d& v) {
    Vec3d out{};
    for (int i = 0; i < 3; ++i) out[i] = a[i][0] * v[0] + a[i][1] * v[1] + a[i][2] * v[2];
    return out;
}

Vec3d add(const Vec3d& a, const Vec3d& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }

// ---------------------------------------------------------------------------
// XML attribute access
// ---------------------------------------------------------------------------

std::optional<std::string> attr(const pt::ptree& node, const char* name) {
    auto attrs = node.get_child_optional("<xmlattr>");
    if (!attrs) return std::nullopt;
    auto v = attrs->get_optional<std::string>(name);
    if (!v) return std::nullopt;
    return *v;
}

std::string required_attr(const pt::ptree& node, const char* name, const std::string& context) {
    auto v = attr(node, name);
    if (!v) throw ParseError(context + ": missing attribute '" + name + "'", 0);
    return *v;
}

std::vector<double> parse_numbers(const std::string& text, const std::string& context) {
    std::vector<double> out;
    const char* p = text.data();
    const char* end = text.data() + text.size();
    while (p < end) {
        while (p < end && std::isspace(static_cast<unsigned char>(*p))) ++p;
        if (p == end) break;
        double value = 0.0;
        auto [next, ec] = std::from_chars(p, end, value);
        if (ec != std::errc()) throw ParseError(context + ": invalid number in '" + text + "'", 0);
        out.push_back(value);
        p = next;
    }
    return out;
}

double parse_scalar(const std::string& text, const std::string& context) {
    auto values = parse_numbers(text, context);
    if (values.size() != 1) throw ParseError(context + ": expected one number, got '" + text + "'", 0);
    return values[0];
}

Vec3d parse_vec3(const std::string& text, const std::string& context) {
    auto values = parse_numbers(text, context);
    if (values.size() != 3) throw ParseError(context + ": expected three numbers, got '" + text + "'", 0);
    return {values[0], values[1], values[2]};
}

/// Reads an <origin> child into (rotation, translation); identity if absent.
void read_origin(const pt::ptree& node, const std::string& context, Mat3d& rotation, Vec3d& translation) {
    rotation = identity3();
    translation = {0, 0, 0};
    auto origin = node.get_child_optional("origin");
    if (!origin) return;
    if (auto xyz = attr(*origin, "xyz")) translation = parse_vec3(*xyz, context + " origin xyz");
    if (auto rpy = attr(*origin, "rpy")) rotation = rpy_to_rotation(parse_vec3(*rpy, context + " origin rpy"));
}

UrdfTree::Link read_link(const pt::ptree& node) {
    UrdfTree::Link link;
    link.name = required_attr(node, "name", "link");
    const std::string context = "link '" + link.name + "'";
    auto inertial = node.get_child_optional("inertial");
    if (!inertial) return link;

    Mat3d rotation;
    Vec3d com;
    read_origin(*inertial, context + " inertial", rotation, com);
    if (auto mass = inertial->get_child_optional("mass")) {
        link.inertia.mass = parse_scalar(required_attr(*mass, "value", context + " mass"), context + " mass");
    }
    Mat3d inertia{};
    if (auto in = inertial->get_child_optional("inertia")) {
        auto get = [&](const char* key) {
            auto v = attr(*in, key);
            return v ? parse_scalar(*v, context + " inertia " + key) : 0.0;
        };
        const double ixx = get("ixx"), ixy = get("ixy"), ixz = get("ixz");
        const double iyy = get("iyy"), iyz = get("iyz"), izz = get("izz");
        inertia = {{{ixx, ixy, ixz}, {ixy, iyy, iyz}, {ixz, iyz, izz}}};
    }
    link.inertia.com = com;
    link.inertia.inertia_about_com = mul(mul(rotation, inertia), transpose(rotation));
    return link;
}

UrdfTree::Joint read_joint(const pt::ptree& node) {
    UrdfTree::Joint joint;
    joint.spec.name = required_attr(node, "name", "joint");
    const std::string context = "joint '" + joint.spec.name + "'";
    const std::string type = required_attr(node, "type", context);
    if (type == "revolute" || type == "continuous") {
        joint.spec.kind = JointKind::revolute;
    } else if (type == "prismatic") {
        joint.spec.kind = JointKind::prismatic;
    } else if (type == "fixed") {
        joint.spec.kind = JointKind::fixed;
    } else {
        throw UnsupportedFeatureError(context + ": unsupported joint type '" + type + "'");
    }
    if (node.get_child_optional("mimic")) {
        throw UnsupportedFeatureError(context + ": mimic joints are not supported");
    }

    auto parent = node.get_child_optional("parent");
    auto child = node.get_child_optional("child");
    if (!parent || !child) throw ParseError(context + ": missing <parent> or <child>", 0);
    joint.parent_link = required_attr(*parent, "link", context + " parent");
    joint.child_link = required_attr(*child, "link", context + " child");

    read_origin(node, context, joint.spec.origin_rotation, joint.spec.origin_translation);

    Vec3d axis{1.0, 0.0, 0.0};  // URDF default
    if (auto ax = node.get_child_optional("axis")) {
        if (auto xyz = attr(*ax, "xyz")) axis = parse_vec3(*xyz, context + " axis");
    }
    const double norm = std::sqrt(axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]);
    if (joint.spec.kind != JointKind::fixed) {
        if (!(norm > 1e-12) || !std::isfinite(norm)) throw ValidationError(context + ": zero or invalid axis");
        axis = {axis[0] / norm, axis[1] / norm, axis[2] / norm};
    }
    joint.spec.axis = axis;
    return joint;
}

/// Inertia of `child` expressed in the parent link frame given the pose of
/// the child frame in the parent (rotation, translation).
LinkInertia move_inertia(const LinkInertia& child, const Mat3d& rotation, const Vec3d& translation) {
    LinkInertia out;
    out.mass = child.mass;
    out.com = add(translation, mul(rotation, child.com));
    out.inertia_about_com = mul(mul(rotation, child.inertia_about_com), transpose(rotation));
    return out;
}

LinkInertia combine(const LinkInertia& a, const LinkInertia& b) {
    LinkInertia out;
    out.mass = a.mass + b.mass;
    if (out.mass > 0.0) {
        for (int k = 0; k < 3; ++k) out.com[k] = (a.mass * a.com[k] + b.mass * b.com[k]) / out.mass;
    }
    for (const LinkInertia* part : {&a, &b}) {
        Vec3d d{part->com[0] - out.com[0], part->com[1] - out.com[1], part->com[2] - out.com[2]};
        const double d2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) {
                const double shift = part->mass * ((i == j ? d2 : 0.0) - d[i] * d[j]);
                out.inertia_about_com[i][j] += part->inertia_about_com[i][j] + shift;
            }
        }
    }
    return out;
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string format_vec3(const Vec3d& v) {
    return format_double(v[0]) + " " + format_double(v[1]) + " " + format_double(v[2]);
}

}  // namespace

Mat3d rpy_to_rotation(const Vec3d& rpy) {
    const double cr = std::cos(rpy[0]), sr = std::sin(rpy[0]);
    const double cp = std::cos(rpy[1]), sp = std::sin(rpy[1]);
    const double cy = std::cos(rpy[2]), sy = std::sin(rpy[2]);
    // Rz(yaw) * Ry(pitch) * Rx(roll)
    return {{{cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr},
             {sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr},
             {-sp, cp * sr, cp * cr}}};
}

Vec3d rotation_to_rpy(const Mat3d& r) {
    const double sp = std::clamp(-r[2][0], -1.0, 1.0);
    const double pitch = std::asin(sp);
    if (std::abs(sp) < 1.0 - 1e-12) {
        return {std::atan2(r[2][1], r[2][2]), pitch, std::atan2(r[1][0], r[0][0])};
    }
    // Gimbal lock: roll folded into yaw.
    return {0.0, pitch, std::atan2(-r[0][1], r[1][1])};
}

UrdfTree read_urdf_tree(std::string_view xml_text) {
    pt::ptree doc;
    try {
        std::istringstream in{std::string(xml_text)};
        pt::read_xml(in, doc);
    } catch (const pt::xml_parser_error& e) {
        throw ParseError("malformed XML: " + e.message(), static_cast<int>(e.line()));
    }

    const pt::ptree* robot = nullptr;
    for (const auto& [key, child] : doc) {
        if (key == "robot") {
            if (robot) throw ParseError("more than one <robot> element", 0);
            robot = &child;
        } else if (key != "<xmlcomment>") {
            throw ParseError("unexpected top-level element <" + key + ">", 0);
        }
    }
    if (!robot) throw ParseError("missing <robot> element", 0);

    UrdfTree tree;
    tree.name = attr(*robot, "name").value_or("robot");
    std::set<std::string> link_names, joint_names;
    for (const auto& [key, child] : *robot) {
        if (key == "link") {
            auto link = read_link(child);
            if (!link_names.insert(link.name).second) {
                throw ValidationError("duplicate link name '" + link.name + "'");
            }
            tree.links.push_back(std::move(link));
        } else if (key == "joint") {
            auto joint = read_joint(child);
            if (!joint_names.insert(joint.spec.name).second) {
                throw ValidationError("duplicate joint name '" + joint.spec.name + "'");
            }
            tree.joints.push_back(std::move(joint));
        }
    }

    std::set<std::string> has_parent;
    for (const auto& joint : tree.joints) {
        for (const auto* link : {&joint.parent_link, &joint.child_link}) {
            if (!link_names.count(*link)) {
                throw ValidationError("joint '" + joint.spec.name + "' references unknown link '" + *link + "'");
            }
        }
        if (joint.parent_link == joint.child_link) {
            throw TopologyError("joint '" + joint.spec.name + "' connects link '" + joint.child_link + "' to itself");
        }
        if (!has_parent.insert(joint.child_link).second) {
            throw TopologyError("link '" + joint.child_link + "' has more than one parent joint");
        }
    }
    return tree;
}

UrdfTree fuse_fixed(const UrdfTree& tree) {
    UrdfTree out = tree;
    for (;;) {
        auto it = std::find_if(out.joints.begin(), out.joints.end(),
                               [](const UrdfTree::Joint& j) { return j.spec.kind == JointKind::fixed; });
        if (it == out.joints.end()) break;
        const UrdfTree::Joint fixed = *it;
        out.joints.erase(it);

        auto find_link = [&](const std::string& name) {
            auto l = std::find_if(out.links.begin(), out.links.end(),
                                  [&](const UrdfTree::Link& link) { return link.name == name; });
            if (l == out.links.end()) throw TopologyError("fixed joint '" + fixed.spec.name + "' lost its links");
            return l;
        };
        auto child = find_link(fixed.child_link);
        const LinkInertia moved =
            move_inertia(child->inertia, fixed.spec.origin_rotation, fixed.spec.origin_translation);
        out.links.erase(child);
        auto parent = find_link(fixed.parent_link);
        parent->inertia = combine(parent->inertia, moved);

        for (auto& joint : out.joints) {
            if (joint.parent_link != fixed.child_link) continue;
            joint.parent_link = fixed.parent_link;
            joint.spec.origin_translation =
                add(fixed.spec.origin_translation, mul(fixed.spec.origin_rotation, joint.spec.origin_translation));
            joint.spec.origin_rotation = mul(fixed.spec.origin_rotation, joint.spec.origin_rotation);
            if (joint.child_link == joint.parent_link) {
                throw TopologyError("fixed joint cycle through link '" + joint.child_link + "'");
            }
        }
    }
    return out;
}

RobotModel build_model(const UrdfTree& tree, const ParseOptions& options) {
    const int n_links = static_cast<int>(tree.links.size());
    std::unordered_map<std::string, int> link_index;
    for (int i = 0; i < n_links; ++i) link_index[tree.links[i].name] = i;

    std::vector<int> parent_joint(static_cast<size_t>(n_links), -1);
    std::vector<std::vector<int>> child_links(static_cast<size_t>(n_links));
    for (int j = 0; j < static_cast<int>(tree.joints.size()); ++j) {
        const auto& joint = tree.joints[j];
        if (joint.spec.kind == JointKind::fixed) {
            throw ValidationError("joint '" + joint.spec.name + "' is fixed; run fuse_fixed first");
        }
        const int c = link_index.at(joint.child_link);
        if (parent_joint[c] >= 0) throw TopologyError("link '" + joint.child_link + "' has more than one parent joint");
        parent_joint[c] = j;
        child_links[link_index.at(joint.parent_link)].push_back(c);
    }

    std::vector<int> roots;
    for (int i = 0; i < n_links; ++i) {
        if (parent_joint[i] < 0) roots.push_back(i);
    }
    if (roots.empty()) throw TopologyError("no root link: the joint graph contains a cycle");
    if (roots.size() > 1) {
        throw TopologyError("disconnected link '" + tree.links[roots[1]].name + "' is not attached to root '" +
                            tree.links[roots[0]].name + "'");
    }
    const int root = roots[0];

    // Kahn's algorithm over links; ties broken by declaration order.
    std::vector<int> frame_of_link(static_cast<size_t>(n_links), -1);
    std::priority_queue<int, std::vector<int>, std::greater<>> ready;
    for (int c : child_links[root]) ready.push(c);
    RobotModel model;
    model.name = tree.name;
    model.base_link = tree.links[root].name;
    model.gravity = options.gravity;
    while (!ready.empty()) {
        const int link = ready.top();
        ready.pop();
        const auto& joint = tree.joints[parent_joint[link]];
        const int parent_link = link_index.at(joint.parent_link);
        const int frame = model.n_frames++;
        frame_of_link[link] = frame;
        model.parent.push_back(parent_link == root ? -1 : frame_of_link[parent_link]);
        JointSpec spec = joint.spec;
        spec.position_index = frame;
        model.joints.push_back(spec);
        model.inertias.push_back(tree.links[link].inertia);
        model.link_names.push_back(tree.links[link].name);
        for (int c : child_links[link]) ready.push(c);
    }
    for (int i = 0; i < n_links; ++i) {
        if (i != root && frame_of_link[i] < 0) {
            throw TopologyError("link '" + tree.links[i].name + "' is not connected to root '" +
                                tree.links[root].name + "'");
        }
    }
    model.n_dof = model.n_frames;
    validate_model(model);
    return model;
}

void validate_model(const RobotModel& model) {
    const auto n = static_cast<size_t>(model.n_frames);
    if (model.parent.size() != n || model.joints.size() != n || model.inertias.size() != n) {
        throw ValidationError("model arrays do not match n_frames");
    }
    int dof = 0;
    for (int i = 0; i < model.n_frames; ++i) {
        const auto& joint = model.joints[i];
        const std::string context = "frame " + std::to_string(i) + " ('" + joint.name + "')";
        if (model.parent[i] >= i || model.parent[i] < -1) throw ValidationError(context + ": parent index not below frame");
        const auto& a = joint.axis;
        if (std::abs(std::sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2]) - 1.0) > 1e-9) {
            throw ValidationError(context + ": axis is not unit length");
        }
        Eigen::Matrix3d r;
        for (int p = 0; p < 3; ++p)
            for (int q = 0; q < 3; ++q) r(p, q) = joint.origin_rotation[p][q];
        if (!(r.transpose() * r).isApprox(Eigen::Matrix3d::Identity(), 1e-9) || std::abs(r.determinant() - 1.0) > 1e-9) {
            throw ValidationError(context + ": origin rotation is not a proper rotation");
        }
        if (joint.kind == JointKind::fixed) {
            if (joint.position_index) throw ValidationError(context + ": fixed joint has a position index");
        } else {
            if (joint.position_index != dof) throw ValidationError(context + ": position indices are not dense");
            ++dof;
        }
        const auto& in = model.inertias[i];
        if (!(in.mass >= 0.0)) throw ValidationError(context + ": negative mass");
        Eigen::Matrix3d ic;
        for (int p = 0; p < 3; ++p)
            for (int q = 0; q < 3; ++q) ic(p, q) = in.inertia_about_com[p][q];
        if ((ic - ic.transpose()).cwiseAbs().maxCoeff() > 1e-12) throw ValidationError(context + ": inertia not symmetric");
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(ic);
        if (eig.eigenvalues().minCoeff() < -1e-12) throw ValidationError(context + ": inertia not positive semidefinite");
    }
    if (dof != model.n_dof) throw ValidationError("n_dof does not match the number of moving joints");
}

RobotModel parse_urdf(std::string_view xml_text, const ParseOptions& options) {
    return build_model(fuse_fixed(read_urdf_tree(xml_text)), options);
}

RobotModel load_urdf(const std::filesystem::path& path, const ParseOptions& options) {
    std::ifstream in(path);
    if (!in) throw ModelError("cannot open URDF file '" + path.string() + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_urdf(buffer.str(), options);
}

Topology classify_topology(const RobotModel& model) {
    for (int i = 0; i < model.n_frames; ++i) {
        if (model.parent[i] != i - 1) return Topology::branched_tree;
    }
    return Topology::serial_chain;
}

std::string emit_urdf(const RobotModel& model) {
    std::ostringstream out;
    out << "<?xml version=\"1.0\"?>\n";
    out << "<robot name=\"" << model.name << "\">\n";
    out << "  <link name=\"" << model.base_link << "\"/>\n";
    for (int i = 0; i < model.n_frames; ++i) {
        const auto& in = model.inertias[i];
        const auto& ic = in.inertia_about_com;
        out << "  <link name=\"" << model.link_names[i] << "\">\n"
            << "    <inertial>\n"
            << "      <origin xyz=\"" << format_vec3(in.com) << "\" rpy=\"0 0 0\"/>\n"
            << "      <mass value=\"" << format_double(in.mass) << "\"/>\n"
            << "      <inertia ixx=\"" << format_double(ic[0][0]) << "\" ixy=\"" << format_double(ic[0][1])
            << "\" ixz=\"" << format_double(ic[0][2]) << "\" iyy=\"" << format_double(ic[1][1]) << "\" iyz=\""
            << format_double(ic[1][2]) << "\" izz=\"" << format_double(ic[2][2]) << "\"/>\n"
            << "    </inertial>\n"
            << "  </link>\n";
    }
    for (int i = 0; i < model.n_frames; ++i) {
        const auto& joint = model.joints[i];
        const std::string parent = model.parent[i] < 0 ? model.base_link : model.link_names[model.parent[i]];
        const char* type = joint.kind == JointKind::prismatic ? "prismatic" : "continuous";
        out << "  <joint name=\"" << joint.name << "\" type=\"" << type << "\">\n"
            << "    <parent link=\"" << parent << "\"/>\n"
            << "    <child link=\"" << model.link_names[i] << "\"/>\n"
            << "    <origin xyz=\"" << format_vec3(joint.origin_translation) << "\" rpy=\""
            << format_vec3(rotation_to_rpy(joint.origin_rotation)) << "\"/>\n"
            << "    <axis xyz=\"" << format_vec3(joint.axis) << "\"/>\n"
            << "  </joint>\n";
    }
    out << "</robot>\n";
    return out.str();
}

}  // namespace rbdkit
