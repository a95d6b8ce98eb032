#include <algorithm>
#include <random>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "rbdkit/models.hpp"
#include "rbdkit/refdyn.hpp"
#include "rbdkit/schedule.hpp"

namespace rbdkit {
namespace {

RobotModel branching() { return parse_urdf(branching_example_urdf()); }

TEST(Schedule, AlgorithmNames) {
    for (Algorithm a : all_algorithms()) EXPECT_EQ(parse_algorithm(to_string(a)), a);
    EXPECT_EQ(parse_algorithm("gradfd"), Algorithm::grad_fd);
    EXPECT_THROW(parse_algorithm("ABA"), std::invalid_argument);
    EXPECT_TRUE(is_gradient(Algorithm::grad_id));
    EXPECT_FALSE(is_gradient(Algorithm::minv));
}

TEST(Schedule, BranchingExampleLevels) {
    const LevelSchedule s = build_levels(branching());
    EXPECT_EQ(s.levels, (std::vector<std::vector<int>>{{0}, {1, 5}, {2, 4, 6}, {3}}));
    EXPECT_EQ(level_order(s), (std::vector<int>{0, 1, 5, 2, 4, 6, 3}));
}

TEST(Schedule, ChainAndStarLevels) {
    const LevelSchedule chain = build_levels(bundled_model("iiwa7"));
    ASSERT_EQ(chain.depth(), 7);
    for (const auto& level : chain.levels) EXPECT_EQ(level.size(), 1u);

    const LevelSchedule star = build_levels(parse_urdf(star_urdf(1, 1)));
    EXPECT_EQ(star.depth(), 1);
    EXPECT_EQ(star.levels[0].size(), 1u);
    const LevelSchedule limbs = build_levels(parse_urdf(star_urdf(4, 3)));
    ASSERT_EQ(limbs.depth(), 3);
    for (const auto& level : limbs.levels) EXPECT_EQ(level.size(), 4u);
}

TEST(Schedule, RootWithChildren) {
    // Frame 0 on the base, five children on frame 0.
    std::string xml = "<?xml version=\"1.0\"?>\n<robot name=\"star\">\n  <link name=\"base\"/>\n";
    for (int i = 0; i <= 5; ++i)
        xml += "  <link name=\"l" + std::to_string(i) +
               "\"><inertial><mass value=\"1\"/><inertia ixx=\"0.1\" ixy=\"0\" ixz=\"0\" iyy=\"0.1\" iyz=\"0\" "
               "izz=\"0.1\"/></inertial></link>\n";
    xml += "  <joint name=\"j0\" type=\"revolute\"><parent link=\"base\"/><child link=\"l0\"/></joint>\n";
    for (int i = 1; i <= 5; ++i)
        xml += "  <joint name=\"j" + std::to_string(i) + "\" type=\"revolute\"><parent link=\"l0\"/><child link=\"l" +
               std::to_string(i) + "\"/><origin xyz=\"0.1 0 0\"/><axis xyz=\"0 1 0\"/></joint>\n";
    xml += "</robot>\n";
    const LevelSchedule s = build_levels(parse_urdf(xml));
    ASSERT_EQ(s.depth(), 2);
    EXPECT_EQ(s.levels[0].size(), 1u);
    EXPECT_EQ(s.levels[1].size(), 5u);
}

TEST(Schedule, LevelsAreDepthsOnRandomTrees) {
    std::mt19937_64 rng(1);
    for (int t = 0; t < 30; ++t) {
        const RobotModel m = parse_urdf(random_robot_urdf(rng, 3 + t % 10, t % 2 == 0));
        const LevelSchedule s = build_levels(m);
        const std::vector<int> depth = m.depths();
        std::vector<int> seen(static_cast<size_t>(m.n_frames), 0);
        for (int k = 0; k < s.depth(); ++k) {
            EXPECT_TRUE(std::is_sorted(s.levels[k].begin(), s.levels[k].end()));
            for (int f : s.levels[k]) {
                ++seen[f];
                EXPECT_EQ(depth[f], k);
                EXPECT_EQ(s.level_of[f], k);
                if (m.parent[f] >= 0) EXPECT_LT(s.level_of[m.parent[f]], k);
            }
        }
        for (int c : seen) EXPECT_EQ(c, 1);
    }
}

TEST(Schedule, LevelOrderSweepIsBitwiseSequential) {
    for (const auto& b : bundled_models()) {
        const RobotModel m = bundled_model(b.name);
        const std::vector<int> order = level_order(build_levels(m));
        std::vector<int> sequential(static_cast<size_t>(m.n_frames));
        for (int i = 0; i < m.n_frames; ++i) sequential[i] = i;
        std::mt19937_64 rng(2);
        for (int t = 0; t < 10; ++t) {
            const JointState s = random_state(m, rng);
            const ExternalForces f = random_forces(m, rng);
            const RneaSweep a = rnea_forward(m, s.q, s.qd, s.u, &f, order);
            const RneaSweep c = rnea_forward(m, s.q, s.qd, s.u, &f, sequential);
            for (int i = 0; i < m.n_frames; ++i) {
                EXPECT_EQ(a.v[i].c, c.v[i].c);
                EXPECT_EQ(a.a[i].c, c.a[i].c);
                EXPECT_EQ(a.f[i].c, c.f[i].c);
            }
        }
    }
}

TEST(Schedule, ChainRetentionIsLowerTriangular) {
    const RobotModel m = bundled_model("iiwa7");
    const ColumnMap cm = analyze_sparsity(m, Algorithm::grad_id);
    for (const char* name : {"dv_dq", "da_dq", "dv_dqd", "da_dqd"}) {
        const ColumnSet& set = cm.set(name);
        for (int i = 0; i < m.n_frames; ++i) {
            std::vector<int> expected(static_cast<size_t>(i + 1));
            for (int j = 0; j <= i; ++j) expected[j] = j;
            EXPECT_EQ(set.columns[i], expected) << name << " frame " << i;
        }
    }
}

TEST(Schedule, RetentionMatchesReachability) {
    std::mt19937_64 rng(3);
    std::vector<RobotModel> models{branching(), bundled_model("quadruped12"), bundled_model("humanoid30")};
    for (int t = 0; t < 10; ++t) models.push_back(parse_urdf(random_robot_urdf(rng, 4 + t, true)));
    for (const RobotModel& m : models) {
        for (Algorithm alg : all_algorithms()) {
            const ColumnMap cm = analyze_sparsity(m, alg);
            for (const ColumnSet& set : cm.sets) {
                int count = 0;
                for (int i = 0; i < m.n_frames; ++i) {
                    for (int j = 0; j < m.n_frames; ++j) {
                        bool keep = m.is_ancestor_or_self(j, i);
                        if (set.name.rfind("df", 0) == 0) keep = keep || m.is_ancestor_or_self(i, j);
                        if (set.name == "minv_F") keep = m.is_ancestor_or_self(i, j);
                        EXPECT_EQ(set.retained(i, j), keep) << set.name << " " << i << "," << j;
                        if (keep) EXPECT_EQ(set.index[i][j], count++);
                    }
                }
                EXPECT_EQ(set.count, count);
            }
        }
    }
}

TEST(Schedule, SingleLinkDropsNothing) {
    const RobotModel m = bundled_model("link1");
    const ColumnMap cm = analyze_sparsity(m, Algorithm::grad_fd);
    EXPECT_EQ(cm.retained(), cm.dense_total());
    EXPECT_DOUBLE_EQ(cm.retained_fraction(), 1.0);
    EXPECT_DOUBLE_EQ(analyze_sparsity(m, Algorithm::id).retained_fraction(), 1.0);
}

TEST(Schedule, QuadrupedCompressionBelowFortyPercent) {
    const RobotModel m = bundled_model("quadruped12");
    for (Algorithm alg : {Algorithm::grad_id, Algorithm::grad_fd}) {
        const ColumnMap cm = analyze_sparsity(m, alg);
        EXPECT_LT(cm.retained_fraction(), 0.4);
        const ColumnMap dense = dense_columns(m, alg);
        EXPECT_EQ(dense.retained(), dense.dense_total());
        EXPECT_EQ(cm.dense_total(), dense.dense_total());
    }
    const ColumnMap limbs = analyze_sparsity(parse_urdf(star_urdf(2, 6)), Algorithm::grad_id);
    EXPECT_LT(limbs.retained_fraction(), 0.4);
}

double max_abs_col(const spatial::SpatialVec& v) {
    double m = 0.0;
    for (double x : v.c) m = std::max(m, std::abs(x));
    return m;
}

TEST(Schedule, DroppedColumnsAreZero) {
    std::vector<RobotModel> models{branching(), bundled_model("quadruped12"), bundled_model("humanoid30"),
                                   bundled_model("iiwa7")};
    for (const RobotModel& m : models) {
        const ColumnMap cm = analyze_sparsity(m, Algorithm::grad_id);
        const ColumnMap minv = analyze_sparsity(m, Algorithm::minv);
        std::mt19937_64 rng(4);
        for (int t = 0; t < 200; ++t) {
            const JointState s = random_state(m, rng);
            const ExternalForces f = random_forces(m, rng);
            GradientTemporaries g;
            rnea_grad(m, s.q, s.qd, s.u, t % 2 ? &f : nullptr, &g);
            MinvTemporaries mt;
            minv_direct(m, s.q, &mt);
            const std::pair<const char*, const std::vector<std::vector<spatial::SpatialVec>>*> temps[] = {
                {"dv_dq", &g.dv_dq},   {"da_dq", &g.da_dq},   {"df_dq", &g.df_dq},
                {"dv_dqd", &g.dv_dqd}, {"da_dqd", &g.da_dqd}, {"df_dqd", &g.df_dqd},
            };
            for (const auto& [name, values] : temps) {
                const ColumnSet& set = cm.set(name);
                for (int i = 0; i < m.n_frames; ++i)
                    for (int j = 0; j < m.n_frames; ++j)
                        if (!set.retained(i, j)) ASSERT_EQ(max_abs_col((*values)[i][j]), 0.0) << name;
            }
            const ColumnSet& F = minv.set("minv_F");
            for (int i = 0; i < m.n_frames; ++i)
                for (int j = 0; j < m.n_frames; ++j)
                    if (!F.retained(i, j)) ASSERT_EQ(max_abs_col(mt.F[i][j]), 0.0);
        }
    }
}

void expect_disjoint(const WorkspaceLayout& layout) {
    std::vector<std::pair<int, int>> spans;
    for (const Segment& s : layout.segments) {
        EXPECT_GE(s.offset, 0);
        EXPECT_GE(s.extent, 0);
        EXPECT_LE(s.offset + s.extent, layout.total_size) << s.name;
        if (s.extent > 0) spans.push_back({s.offset, s.offset + s.extent});
    }
    std::sort(spans.begin(), spans.end());
    for (size_t k = 1; k < spans.size(); ++k) EXPECT_LE(spans[k - 1].second, spans[k].first);
}

TEST(Schedule, LayoutsAreDisjointAndWithinBudget) {
    for (const auto& b : bundled_models()) {
        const RobotModel m = bundled_model(b.name);
        for (Algorithm alg : all_algorithms()) {
            SCOPED_TRACE(b.name + " " + std::string(to_string(alg)));
            const ColumnMap cm = analyze_sparsity(m, alg);
            const WorkspaceLayout layout = plan_workspace(m, alg, cm);
            expect_disjoint(layout);
            EXPECT_LE(layout.total_size, kDefaultBudget);
            EXPECT_EQ(layout.budget, kDefaultBudget);
            const LayoutSizes sizes = layout_sizes(m, alg, cm);
            EXPECT_LE(sizes.reduced, sizes.full);
            EXPECT_EQ(layout.total_size, layout.fused_cross ? sizes.reduced : sizes.full);
            for (const char* io : {"q"}) EXPECT_NE(layout.find(io), nullptr);
        }
    }
}

TEST(Schedule, ChainGetsFullLayout) {
    const RobotModel m = bundled_model("iiwa7");
    for (Algorithm alg : all_algorithms()) EXPECT_FALSE(plan_workspace(m, alg, analyze_sparsity(m, alg)).fused_cross);
}

TEST(Schedule, HumanoidFallsBackUnderConstrainedBudget) {
    const RobotModel m = bundled_model("humanoid30");
    const long budget = 48 * 1024 / 4;
    const ColumnMap cm = analyze_sparsity(m, Algorithm::grad_id);
    const WorkspaceLayout layout = plan_workspace(m, Algorithm::grad_id, cm, budget);
    EXPECT_TRUE(layout.fused_cross);
    EXPECT_LE(layout.total_size, budget);
    expect_disjoint(layout);
    EXPECT_FALSE(plan_workspace(m, Algorithm::grad_id, cm, 1 << 22).fused_cross);
}

TEST(Schedule, InfeasibleBudgetReportsFloor) {
    const RobotModel m = bundled_model("iiwa7");
    const ColumnMap cm = analyze_sparsity(m, Algorithm::grad_fd);
    try {
        plan_workspace(m, Algorithm::grad_fd, cm, 1);
        FAIL() << "budget 1 accepted";
    } catch (const InfeasibleBudgetError& e) {
        EXPECT_EQ(e.floor(), layout_sizes(m, Algorithm::grad_fd, cm).reduced);
    }
}

TEST(Schedule, DenseLayoutIsLarger) {
    const RobotModel m = bundled_model("quadruped12");
    const LayoutSizes compressed = layout_sizes(m, Algorithm::grad_id, analyze_sparsity(m, Algorithm::grad_id));
    const LayoutSizes dense = layout_sizes(m, Algorithm::grad_id, dense_columns(m, Algorithm::grad_id));
    EXPECT_LT(compressed.full, dense.full);
    EXPECT_LT(compressed.reduced, dense.reduced);
}

TEST(Schedule, Dumps) {
    const RobotModel m = branching();
    const LevelSchedule s = build_levels(m);
    const ColumnMap cm = analyze_sparsity(m, Algorithm::grad_id);
    const WorkspaceLayout layout = plan_workspace(m, Algorithm::grad_id, cm);
    const std::string text = dump_schedule_text(m, s, cm, layout);
    EXPECT_NE(text.find("dv_dq"), std::string::npos);
    EXPECT_EQ(text, dump_schedule_text(m, s, cm, layout));

    const nlohmann::json records = nlohmann::json::parse(dump_schedule_json(m, s, cm, layout));
    ASSERT_TRUE(records.is_array());
    size_t levels = 0, segments = 0, sets = 0;
    for (const auto& r : records) {
        ASSERT_TRUE(r.contains("record"));
        const std::string kind = r["record"];
        if (kind == "level") ++levels;
        if (kind == "segment") ++segments;
        if (kind == "columns") ++sets;
    }
    EXPECT_EQ(levels, 4u);
    EXPECT_EQ(segments, layout.segments.size());
    EXPECT_EQ(sets, cm.sets.size());
}

}  // namespace
}  // namespace rbdkit
