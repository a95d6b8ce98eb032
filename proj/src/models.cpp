#include "rbdkit/models.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace rbdkit {

namespace {

constexpr double kPi = 3.14159265358979323846;

std::string num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string vec(const Vec3d& v) { return num(v[0]) + " " + num(v[1]) + " " + num(v[2]); }

/// Accumulates URDF elements in declaration order.
class UrdfWriter {
  public:
    explicit UrdfWriter(std::string name) { out_ << "<?xml version=\"1.0\"?>\n<robot name=\"" << name << "\">\n"; }

    void link(const std::string& name) { out_ << "  <link name=\"" << name << "\"/>\n"; }

    void link(const std::string& name, double mass, const Vec3d& com, const Vec3d& principal,
              const Vec3d& rpy = {0, 0, 0}) {
        out_ << "  <link name=\"" << name << "\">\n"
             << "    <inertial>\n"
             << "      <origin xyz=\"" << vec(com) << "\" rpy=\"" << vec(rpy) << "\"/>\n"
             << "      <mass value=\"" << num(mass) << "\"/>\n"
             << "      <inertia ixx=\"" << num(principal[0]) << "\" ixy=\"0\" ixz=\"0\" iyy=\"" << num(principal[1])
             << "\" iyz=\"0\" izz=\"" << num(principal[2]) << "\"/>\n"
             << "    </inertial>\n"
             << "  </link>\n";
    }

    void joint(const std::string& name, const std::string& type, const std::string& parent, const std::string& child,
               const Vec3d& xyz, const Vec3d& rpy, const Vec3d& axis) {
        out_ << "  <joint name=\"" << name << "\" type=\"" << type << "\">\n"
             << "    <parent link=\"" << parent << "\"/>\n"
             << "    <child link=\"" << child << "\"/>\n"
             << "    <origin xyz=\"" << vec(xyz) << "\" rpy=\"" << vec(rpy) << "\"/>\n";
        if (type != "fixed") out_ << "    <axis xyz=\"" << vec(axis) << "\"/>\n";
        if (type == "revolute") out_ << "    <limit lower=\"-3.1\" upper=\"3.1\" effort=\"300\" velocity=\"10\"/>\n";
        out_ << "  </joint>\n";
    }

    std::string finish() {
        out_ << "</robot>\n";
        return out_.str();
    }

  private:
    std::ostringstream out_;
};

const Vec3d kX{1, 0, 0}, kY{0, 1, 0}, kZ{0, 0, 1};

std::string single_link_urdf() {
    UrdfWriter w("link1");
    w.link("base");
    w.link("arm", 1.0, {0.5, 0, 0}, {0.01, 0.08, 0.08});
    w.joint("shoulder", "continuous", "base", "arm", {0, 0, 0}, {0, 0, 0}, kY);
    return w.finish();
}

std::string planar_pendulum_urdf() {
    UrdfWriter w("pendulum2");
    w.link("base");
    w.link("upper", 1.0, {0.5, 0, 0}, {0.02, 0.1, 0.1});
    w.link("lower", 0.8, {0.4, 0, 0}, {0.01, 0.05, 0.05});
    w.joint("j1", "continuous", "base", "upper", {0, 0, 0}, {0, 0, 0}, kY);
    w.joint("j2", "continuous", "upper", "lower", {1.0, 0, 0}, {0, 0, 0}, kY);
    return w.finish();
}

std::string manipulator_urdf() {
    UrdfWriter w("iiwa7");
    struct Seg {
        Vec3d xyz, rpy;
        double mass;
        Vec3d com, principal;
    };
    const double h = kPi / 2;
    const Seg segs[7] = {
        {{0, 0, 0.1575}, {0, 0, 0}, 4.0, {0, -0.03, 0.12}, {0.1, 0.09, 0.02}},
        {{0, 0, 0.2025}, {h, 0, kPi}, 4.0, {0.0003, 0.059, 0.042}, {0.05, 0.018, 0.044}},
        {{0, 0.2045, 0}, {h, 0, kPi}, 3.0, {0, 0.03, 0.13}, {0.08, 0.075, 0.01}},
        {{0, 0, 0.2155}, {h, 0, 0}, 2.7, {0, 0.067, 0.034}, {0.03, 0.01, 0.029}},
        {{0, 0.1845, 0}, {-h, kPi, 0}, 1.7, {0.0001, 0.021, 0.076}, {0.02, 0.018, 0.005}},
        {{0, 0, 0.2155}, {h, 0, 0}, 1.8, {0, 0.0006, 0.0004}, {0.005, 0.0036, 0.0047}},
        {{0, 0.081, 0}, {-h, kPi, 0}, 0.3, {0, 0, 0.02}, {0.001, 0.001, 0.001}},
    };
    w.link("link_0");
    for (int i = 0; i < 7; ++i) {
        w.link("link_" + std::to_string(i + 1), segs[i].mass, segs[i].com, segs[i].principal);
    }
    w.link("ee", 0.2, {0, 0, 0.02}, {0.0005, 0.0005, 0.0002});
    for (int i = 0; i < 7; ++i) {
        w.joint("joint_" + std::to_string(i + 1), "revolute", "link_" + std::to_string(i), "link_" + std::to_string(i + 1),
                segs[i].xyz, segs[i].rpy, kZ);
    }
    w.joint("ee_mount", "fixed", "link_7", "ee", {0, 0, 0.045}, {0, 0, 0}, kZ);
    return w.finish();
}

std::string quadruped_urdf() {
    UrdfWriter w("quadruped12");
    w.link("trunk", 53.0, {0, 0, 0}, {1.7, 5.3, 6.1});
    const struct {
        const char* prefix;
        double sx, sy;
    } legs[4] = {{"lf", 1, 1}, {"rf", 1, -1}, {"lh", -1, 1}, {"rh", -1, -1}};
    for (const auto& leg : legs) {
        const std::string p = leg.prefix;
        w.link(p + "_hip", 2.9, {0.04 * leg.sx, 0.0, 0.0}, {0.006, 0.008, 0.007});
        w.link(p + "_upperleg", 2.6, {0.15, 0.0, -0.03}, {0.005, 0.03, 0.03}, {0, kPi / 2, 0});
        w.link(p + "_lowerleg", 0.9, {0.12, 0.0, 0.0}, {0.0003, 0.015, 0.015}, {0, kPi / 2, 0});
        w.link(p + "_foot", 0.1, {0, 0, 0}, {1e-5, 1e-5, 1e-5});
    }
    for (const auto& leg : legs) {
        const std::string p = leg.prefix;
        w.joint(p + "_haa", "revolute", "trunk", p + "_hip", {0.3735 * leg.sx, 0.207 * leg.sy, 0}, {0, 0, 0}, kX);
        w.joint(p + "_hfe", "revolute", p + "_hip", p + "_upperleg", {0.08 * leg.sx, 0, 0}, {0, 0, 0}, kY);
        w.joint(p + "_kfe", "revolute", p + "_upperleg", p + "_lowerleg", {0, 0, -0.35}, {0, 0, 0}, kY);
        w.joint(p + "_foot_mount", "fixed", p + "_lowerleg", p + "_foot", {0, 0, -0.33}, {0, 0, 0}, kZ);
    }
    return w.finish();
}

std::string humanoid_urdf() {
    UrdfWriter w("humanoid30");
    w.link("pelvis", 14.0, {0.01, 0, 0.03}, {0.11, 0.03, 0.12});
    // Torso chain.
    w.link("ltorso", 2.3, {-0.01, 0, 0}, {0.002, 0.002, 0.003});
    w.link("mtorso", 0.7, {-0.008, 0, 0.015}, {0.0005, 0.0007, 0.0006});
    w.link("utorso", 30.0, {-0.06, 0, 0.3}, {1.4, 1.0, 0.7});
    w.link("head", 1.4, {-0.07, 0, 0.05}, {0.005, 0.005, 0.005});
    w.link("head_camera", 0.5, {0, 0, 0}, {0.0005, 0.0005, 0.0005});
    w.joint("back_bkz", "revolute", "pelvis", "ltorso", {-0.0125, 0, 0}, {0, 0, 0}, kZ);
    w.joint("back_bky", "revolute", "ltorso", "mtorso", {0, 0, 0.162}, {0, 0, 0}, kY);
    w.joint("back_bkx", "revolute", "mtorso", "utorso", {0, 0, 0.05}, {0, 0, 0}, kX);
    w.joint("neck_ry", "revolute", "utorso", "head", {0.21, 0, 0.53}, {0, 0, 0}, kY);
    w.joint("camera_mount", "fixed", "head", "head_camera", {0.08, 0, 0.1}, {0, 0, 0}, kZ);

    for (int side = 0; side < 2; ++side) {
        const std::string p = side == 0 ? "l" : "r";
        const double s = side == 0 ? 1.0 : -1.0;
        const std::string names[7] = {"clav", "scap", "uarm", "elbow", "farm", "wrist", "palm"};
        const double masses[7] = {3.4, 3.9, 2.5, 2.3, 1.0, 0.98, 0.6};
        const Vec3d axes[7] = {kZ, kX, kY, kX, kY, kX, kY};
        const Vec3d offsets[7] = {{0.1, 0.22 * s, 0.4}, {0, 0.11 * s, -0.25}, {0, 0.19 * s, 0},   {0, 0.12 * s, 0.01},
                                  {0, 0.19 * s, 0},   {0, 0.12 * s, 0.01},  {0, 0.05 * s, 0}};
        for (int k = 0; k < 7; ++k) {
            w.link(p + "_" + names[k], masses[k], {0, 0.05 * s, 0}, {0.01 + 0.002 * k, 0.005, 0.01});
        }
        w.link(p + "_hand", 0.5, {0, 0.06 * s, 0}, {0.001, 0.001, 0.001});
        std::string parent = "utorso";
        const std::string jn[7] = {"shz", "shx", "ely", "elx", "wry", "wrx", "wry2"};
        for (int k = 0; k < 7; ++k) {
            w.joint(p + "_arm_" + jn[k], "revolute", parent, p + "_" + names[k], offsets[k], {0, 0, 0}, axes[k]);
            parent = p + "_" + names[k];
        }
        w.joint(p + "_hand_mount", "fixed", parent, p + "_hand", {0, 0.1 * s, 0}, {0, 0, 0}, kZ);
    }

    for (int side = 0; side < 2; ++side) {
        const std::string p = side == 0 ? "l" : "r";
        const double s = side == 0 ? 1.0 : -1.0;
        const std::string names[6] = {"uglut", "lglut", "uleg", "lleg", "talus", "foot"};
        const double masses[6] = {1.96, 0.9, 9.2, 4.5, 0.5, 1.6};
        const Vec3d principal[6] = {{0.0027, 0.0013, 0.0029}, {0.0007, 0.0017, 0.0011}, {0.09, 0.09, 0.02},
                                    {0.08, 0.08, 0.01},       {0.001, 0.001, 0.001},    {0.002, 0.007, 0.008}};
        const Vec3d coms[6] = {{0.0053, -0.0034 * s, -0.0053}, {0.013, 0.0174 * s, -0.0315}, {0, 0, -0.21},
                               {0.001, 0, -0.187},             {0, 0, 0},                    {0.027, 0, -0.067}};
        const Vec3d axes[6] = {kZ, kX, kY, kY, kY, kX};
        const Vec3d offsets[6] = {{0, 0.089 * s, 0}, {0, 0, 0}, {0.05, 0.0225 * s, -0.066},
                                  {-0.05, 0, -0.374}, {0, 0, -0.422}, {0, 0, 0}};
        for (int k = 0; k < 6; ++k) w.link(p + "_" + names[k], masses[k], coms[k], principal[k]);
        w.link(p + "_sole", 0.2, {0, 0, 0}, {0.0002, 0.0002, 0.0002});
        std::string parent = "pelvis";
        const std::string jn[6] = {"hpz", "hpx", "hpy", "kny", "aky", "akx"};
        for (int k = 0; k < 6; ++k) {
            w.joint(p + "_leg_" + jn[k], "revolute", parent, p + "_" + names[k], offsets[k], {0, 0, 0}, axes[k]);
            parent = p + "_" + names[k];
        }
        w.joint(p + "_sole_mount", "fixed", parent, p + "_sole", {0.05, 0, -0.08}, {0, 0, 0}, kZ);
    }
    return w.finish();
}

}  // namespace

const std::vector<BundledModel>& bundled_models() {
    static const std::vector<BundledModel> models = {
        {"link1", 1, single_link_urdf()},
        {"pendulum2", 2, planar_pendulum_urdf()},
        {"iiwa7", 7, manipulator_urdf()},
        {"quadruped12", 12, quadruped_urdf()},
        {"humanoid30", 30, humanoid_urdf()},
    };
    return models;
}

std::string bundled_urdf(std::string_view name) {
    for (const auto& m : bundled_models()) {
        if (m.name == name) return m.urdf;
    }
    throw std::invalid_argument("unknown bundled model '" + std::string(name) + "'");
}

RobotModel bundled_model(std::string_view name) { return parse_urdf(bundled_urdf(name)); }

RobotModel load_model(const std::string& spec) {
    constexpr std::string_view prefix = "bundled:";
    if (spec.rfind(prefix, 0) == 0) return bundled_model(spec.substr(prefix.size()));
    return load_urdf(spec);
}

std::string branching_example_urdf() {
    UrdfWriter w("branching7");
    w.link("base");
    const int parents[7] = {-1, 0, 1, 2, 1, 0, 5};
    const Vec3d axes[7] = {kZ, kY, kY, kX, kZ, kY, kX};
    for (int i = 0; i < 7; ++i) {
        w.link("body" + std::to_string(i), 1.0 + 0.25 * i, {0.1, 0.02 * i, 0.05}, {0.02, 0.03, 0.025});
    }
    for (int i = 0; i < 7; ++i) {
        const std::string parent = parents[i] < 0 ? "base" : "body" + std::to_string(parents[i]);
        w.joint("joint" + std::to_string(i), "revolute", parent, "body" + std::to_string(i),
                {0.2, 0.05 * (i % 3) - 0.05, 0.1}, {0.1 * i, 0, 0}, axes[i]);
    }
    return w.finish();
}

std::string star_urdf(int limbs, int limb_length) {
    UrdfWriter w("star" + std::to_string(limbs) + "x" + std::to_string(limb_length));
    w.link("hub", 5.0, {0, 0, 0}, {0.1, 0.1, 0.1});
    const Vec3d axes[3] = {kZ, kY, kX};
    for (int l = 0; l < limbs; ++l) {
        for (int k = 0; k < limb_length; ++k) {
            w.link("limb" + std::to_string(l) + "_" + std::to_string(k), 1.0, {0.15, 0, 0}, {0.004, 0.01, 0.01});
        }
    }
    for (int l = 0; l < limbs; ++l) {
        const double angle = 2.0 * kPi * l / limbs;
        for (int k = 0; k < limb_length; ++k) {
            const std::string child = "limb" + std::to_string(l) + "_" + std::to_string(k);
            const std::string parent = k == 0 ? "hub" : "limb" + std::to_string(l) + "_" + std::to_string(k - 1);
            const Vec3d xyz = k == 0 ? Vec3d{0.2 * std::cos(angle), 0.2 * std::sin(angle), 0} : Vec3d{0.3, 0, 0};
            const Vec3d rpy = k == 0 ? Vec3d{0, 0, angle} : Vec3d{0, 0, 0};
            w.joint("j" + std::to_string(l) + "_" + std::to_string(k), "revolute", parent, child, xyz, rpy,
                    axes[k % 3]);
        }
    }
    return w.finish();
}

std::string random_robot_urdf(std::mt19937_64& rng, int n_dof, bool branched) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
    auto random_axis = [&]() -> Vec3d {
        const double pick = unit(rng);
        if (pick < 0.25) return kZ;
        if (pick < 0.4) return kY;
        if (pick < 0.5) return {-1, 0, 0};
        Vec3d a{uniform(-1, 1), uniform(-1, 1), uniform(-1, 1)};
        const double n = std::sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2]);
        if (n < 1e-3) return kX;
        return {a[0] / n, a[1] / n, a[2] / n};
    };

    UrdfWriter w("random" + std::to_string(n_dof));
    w.link("base");
    std::vector<std::string> links{"base"};
    int extra = 0;
    for (int i = 0; i < n_dof; ++i) {
        const std::string name = "l" + std::to_string(i);
        w.link(name, uniform(0.5, 3.0), {uniform(-0.2, 0.2), uniform(-0.2, 0.2), uniform(-0.2, 0.2)},
               {uniform(0.01, 0.1), uniform(0.01, 0.1), uniform(0.01, 0.1)},
               {uniform(-kPi, kPi), uniform(-1.5, 1.5), uniform(-kPi, kPi)});
        std::string parent = links.back();
        if (branched && links.size() > 1) {
            parent = links[static_cast<size_t>(unit(rng) * static_cast<double>(links.size())) % links.size()];
        }
        const std::string type = unit(rng) < 0.15 ? "prismatic" : "revolute";
        w.joint("q" + std::to_string(i), type, parent, name,
                {uniform(-0.3, 0.3), uniform(-0.3, 0.3), uniform(-0.3, 0.3)},
                {uniform(-kPi, kPi), uniform(-1.5, 1.5), uniform(-kPi, kPi)}, random_axis());
        links.push_back(name);
        if (unit(rng) < 0.15) {
            const std::string fixed_name = "fx" + std::to_string(extra++);
            w.link(fixed_name, uniform(0.1, 1.0), {uniform(-0.1, 0.1), 0, 0}, {0.01, 0.02, 0.015});
            w.joint("fixed_" + fixed_name, "fixed", name, fixed_name, {uniform(-0.2, 0.2), 0, uniform(-0.2, 0.2)},
                    {uniform(-1, 1), 0, 0}, kZ);
        }
    }
    return w.finish();
}

JointState random_state(const RobotModel& model, std::mt19937_64& rng, const StateRanges& ranges) {
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    const int n = model.n_dof;
    JointState s{VectorXd(n), VectorXd(n), VectorXd(n), std::nullopt};
    for (int i = 0; i < n; ++i) {
        const double span = model.joints[i].kind == JointKind::prismatic ? ranges.prismatic_q : ranges.q;
        s.q(i) = span * unit(rng);
    }
    for (int i = 0; i < n; ++i) s.qd(i) = ranges.qd * unit(rng);
    for (int i = 0; i < n; ++i) s.u(i) = ranges.u * unit(rng);
    return s;
}

ExternalForces random_forces(const RobotModel& model, std::mt19937_64& rng, double magnitude) {
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    ExternalForces f(static_cast<size_t>(model.n_frames));
    for (auto& fi : f)
        for (int k = 0; k < 6; ++k) fi[k] = magnitude * unit(rng);
    return f;
}

}  // namespace rbdkit
