#include <filesystem>
#include <fstream>
#include <random>
#include <regex>
#include <sstream>

#include <gtest/gtest.h>

#include "rbdkit/bench.hpp"
#include "rbdkit/codegen.hpp"
#include "rbdkit/interpreter.hpp"
#include "rbdkit/models.hpp"

namespace rbdkit {
namespace {

double max_deviation(const NamedVectors& got, const NamedVectors& want) {
    double worst = 0.0;
    for (const auto& [name, w] : want) {
        const auto it = got.find(name);
        if (it == got.end() || it->second.size() != w.size()) return INFINITY;
        for (size_t k = 0; k < w.size(); ++k) worst = std::max(worst, std::abs(it->second[k] - w[k]));
    }
    return worst;
}

JointState state_for(const RobotModel& m, std::mt19937_64& rng, bool with_forces) {
    JointState s = random_state(m, rng);
    if (with_forces) s.f_ext = random_forces(m, rng);
    return s;
}

KernelProgram kernel(const std::string& model, Algorithm alg, long budget = kDefaultBudget, bool dense = false) {
    KernelConfig c;
    c.budget = budget;
    c.dense_columns = dense;
    return build_kernel(bundled_model(model), alg, c);
}

RobotModel branching() { return parse_urdf(branching_example_urdf()); }

TEST(KernelIr, OpcodeTable) {
    for (Op op : {Op::load_const, Op::mov, Op::add, Op::sub, Op::mul, Op::fma, Op::neg, Op::sin, Op::cos, Op::recip,
                  Op::select}) {
        EXPECT_EQ(parse_op(to_string(op)), op);
        EXPECT_FALSE(is_control_flow(op));
    }
    EXPECT_EQ(arity(Op::fma), 3);
    EXPECT_EQ(arity(Op::select), 3);
    EXPECT_EQ(arity(Op::add), 2);
    EXPECT_EQ(arity(Op::sin), 1);
}

TEST(KernelIr, SingleLinkInverseDynamicsPhases) {
    const KernelProgram p = kernel("link1", Algorithm::id);
    std::vector<std::string> names;
    for (const Phase& ph : p.phases) names.push_back(ph.name);
    EXPECT_EQ(names, (std::vector<std::string>{"setup", "rnea_fwd L0", "rnea_bwd L0", "output"}));
    EXPECT_EQ(p.n_dof, 1);
    EXPECT_EQ(p.model_name, "link1");
    EXPECT_EQ(p.algorithm, Algorithm::id);
    const RobotModel m = bundled_model("link1");
    std::mt19937_64 rng(1);
    for (int t = 0; t < 20; ++t) {
        const JointState s = state_for(m, rng, t % 2 == 1);
        EXPECT_LE(max_deviation(interpret(p, kernel_inputs(p, s)), reference_outputs(m, Algorithm::id, s)), 1e-12);
    }
}

/// Number of items with `tag` in phases whose name lists `label`.
int items_in(const KernelProgram& p, const std::string& label, const std::string& tag) {
    int n = 0;
    for (const Phase& ph : p.phases) {
        const std::string name = " | " + ph.name + " | ";
        if (name.find(" | " + label + " | ") == std::string::npos) continue;
        for (const WorkItem& it : ph.items) n += it.tag == tag;
    }
    return n;
}

TEST(KernelIr, GradientItemsMatchRetainedColumns) {
    for (const RobotModel& m : {bundled_model("iiwa7"), bundled_model("quadruped12"), branching()}) {
        SCOPED_TRACE(m.name);
        const KernelProgram p = build_kernel(m, Algorithm::grad_fd);
        ASSERT_FALSE(p.fused_cross);
        const LevelSchedule s = build_levels(m);
        const ColumnMap cm = analyze_sparsity(m, Algorithm::grad_fd);
        for (int k = 0; k < s.depth(); ++k) {
            int dv = 0, df = 0;
            for (int f : s.levels[k]) {
                dv += static_cast<int>(cm.set("dv_dq").columns[f].size() + cm.set("dv_dqd").columns[f].size());
                df += static_cast<int>(cm.set("df_dq").columns[f].size() + cm.set("df_dqd").columns[f].size());
            }
            const std::string level = " L" + std::to_string(k);
            EXPECT_EQ(items_in(p, "grad_dv" + level, "grad_dv"), dv) << k;
            EXPECT_EQ(items_in(p, "grad_daf" + level, "grad_daf"), dv) << k;
            EXPECT_EQ(items_in(p, "grad_bwd" + level, "grad_bwd"), df) << k;
        }
    }
}

TEST(KernelIr, FusedGradientItemsMatchRetainedColumns) {
    const RobotModel m = bundled_model("humanoid30");
    const KernelProgram p = build_kernel(m, Algorithm::grad_fd);
    ASSERT_TRUE(p.fused_cross);
    const LevelSchedule s = build_levels(m);
    const ColumnMap cm = analyze_sparsity(m, Algorithm::grad_fd);
    for (int k = 0; k < s.depth(); ++k) {
        int dv = 0;
        for (int f : s.levels[k])
            dv += static_cast<int>(cm.set("dv_dq").columns[f].size() + cm.set("dv_dqd").columns[f].size());
        EXPECT_EQ(items_in(p, "grad_fwd L" + std::to_string(k), "grad_fwd"), dv) << k;
    }
}

TEST(KernelIr, ForwardGroupsFollowLevels) {
    const KernelProgram p = build_kernel(branching(), Algorithm::id);
    std::vector<int> sizes;
    for (const Phase& ph : p.phases)
        if (ph.name.rfind("rnea_fwd", 0) == 0) sizes.push_back(static_cast<int>(ph.items.size()));
    EXPECT_EQ(sizes, (std::vector<int>{1, 2, 3, 1}));
}

TEST(KernelIr, RaceCheckerOnHandBuiltPrograms) {
    auto item = [](std::vector<Instr> code) {
        WorkItem w;
        w.tag = "t";
        w.instrs = std::move(code);
        return w;
    };
    const Instr write0{Op::load_const, Operand::arena(0), {Operand::constant(1.0)}};
    const Instr read0{Op::mov, Operand::arena(1), {Operand::arena(0)}};

    KernelProgram p;
    p.arena_size = 4;
    p.phases = {{"double write", {item({write0}), item({write0})}}};
    RaceReport r = check_races(p);
    ASSERT_EQ(r.violations.size(), 1u);
    EXPECT_EQ(r.violations[0].slot, 0);
    EXPECT_TRUE(r.violations[0].other_writes);

    p.phases = {{"write", {item({write0})}}, {"read", {item({read0})}}};
    EXPECT_TRUE(check_races(p).clean());

    p.phases = {{"write and read", {item({write0}), item({read0})}}};
    r = check_races(p);
    ASSERT_EQ(r.violations.size(), 1u);
    EXPECT_FALSE(r.violations[0].other_writes);
    EXPECT_EQ(r.violations[0].writer_item, 0);
    EXPECT_EQ(r.violations[0].other_item, 1);

    p.phases = {{"private", {item({write0, read0})}}};
    EXPECT_TRUE(check_races(p).clean());
}

TEST(KernelIr, GeneratedKernelsAreRaceAndBranchFree) {
    std::vector<RobotModel> models;
    for (const auto& b : bundled_models()) models.push_back(bundled_model(b.name));
    models.push_back(branching());
    for (const RobotModel& m : models) {
        for (Algorithm alg : all_algorithms()) {
            for (bool dense : {false, true}) {
                KernelConfig c;
                c.dense_columns = dense;
                c.budget = dense ? 1L << 22 : kDefaultBudget;
                const KernelProgram p = build_kernel(m, alg, c);
                EXPECT_TRUE(check_races(p).clean()) << m.name << " " << to_string(alg);
                EXPECT_EQ(count_control_flow(p), 0);
                EXPECT_NO_THROW(validate_program(p));
                EXPECT_LE(p.arena_size, c.budget);
            }
        }
    }
}

TEST(KernelIr, ValidateRejectsBadSlots) {
    KernelProgram p = kernel("link1", Algorithm::id);
    p.phases[0].items[0].instrs[0].dst = Operand::arena(static_cast<std::uint32_t>(p.arena_size));
    EXPECT_THROW(validate_program(p), std::invalid_argument);
    KernelProgram q = kernel("link1", Algorithm::id);
    q.phases.clear();
    EXPECT_THROW(validate_program(q), std::invalid_argument);
}

TEST(KernelIr, MatchesReferenceOnEveryModel) {
    std::vector<RobotModel> models;
    for (const auto& b : bundled_models()) models.push_back(bundled_model(b.name));
    models.push_back(branching());
    for (const RobotModel& m : models) {
        for (Algorithm alg : all_algorithms()) {
            const KernelProgram p = build_kernel(m, alg);
            const Interpreter interp(p);
            std::mt19937_64 rng(2);
            for (int t = 0; t < 4; ++t) {
                const JointState s = state_for(m, rng, t % 2 == 1);
                EXPECT_LE(max_deviation(interp.run(kernel_inputs(p, s)), reference_outputs(m, alg, s)), 1e-12)
                    << m.name << " " << to_string(alg);
            }
        }
    }
}

TEST(KernelIr, ChainGradientMatchesReference) {
    const RobotModel m = bundled_model("iiwa7");
    const KernelProgram p = build_kernel(m, Algorithm::grad_id);
    std::mt19937_64 rng(3);
    const JointState s = random_state(m, rng);
    const NamedVectors out = interpret(p, kernel_inputs(p, s));
    const DynamicsGradients g = rnea_grad(m, s.q, s.qd, s.u);
    for (int i = 0; i < 7; ++i) {
        for (int j = 0; j < 7; ++j) {
            EXPECT_NEAR(out.at("dtau_dq")[i * 7 + j], g.dq(i, j), 1e-12);
            EXPECT_NEAR(out.at("dtau_dqd")[i * 7 + j], g.dqd(i, j), 1e-12);
        }
    }
}

TEST(KernelIr, ThreadCountDoesNotChangeOutputs) {
    for (const char* name : {"iiwa7", "humanoid30"}) {
        const RobotModel m = bundled_model(name);
        for (Algorithm alg : all_algorithms()) {
            const KernelProgram p = build_kernel(m, alg);
            const Interpreter interp(p);
            std::mt19937_64 rng(4);
            for (int t = 0; t < 3; ++t) {
                const NamedVectors in = kernel_inputs(p, state_for(m, rng, t == 1));
                const NamedVectors one = interp.run(in, 1);
                EXPECT_EQ(interp.run(in, 8), one) << name << " " << to_string(alg);
                EXPECT_EQ(interp.run(in, 3), one);
            }
        }
    }
}

TEST(KernelIr, IntraLevelOrderDoesNotChangeOutputs) {
    for (const RobotModel& m : {branching(), bundled_model("quadruped12"), bundled_model("humanoid30")}) {
        for (Algorithm alg : all_algorithms()) {
            const LevelSchedule s = build_levels(m);
            const ColumnMap cm = analyze_sparsity(m, alg);
            const WorkspaceLayout layout = plan_workspace(m, alg, cm);
            const KernelProgram base = generate_kernel(m, alg, s, cm, layout);
            std::mt19937_64 rng(5);
            const NamedVectors in = kernel_inputs(base, state_for(m, rng, true));
            const NamedVectors want = interpret(base, in);
            for (std::uint64_t seed : {1u, 2u, 3u}) {
                GenerateOptions o;
                o.shuffle_levels = true;
                o.shuffle_seed = seed;
                const KernelProgram shuffled = generate_kernel(m, alg, s, cm, layout, o);
                EXPECT_TRUE(check_races(shuffled).clean());
                EXPECT_EQ(interpret(shuffled, in, 2), want) << m.name << " " << to_string(alg);
            }
        }
    }
}

TEST(KernelIr, GenerationRejectsMismatchedInputs) {
    const RobotModel a = bundled_model("iiwa7");
    const RobotModel b = bundled_model("quadruped12");
    const ColumnMap cm = analyze_sparsity(a, Algorithm::grad_id);
    const WorkspaceLayout layout = plan_workspace(a, Algorithm::grad_id, cm);
    EXPECT_THROW(generate_kernel(a, Algorithm::grad_id, build_levels(b), cm, layout), std::invalid_argument);
    EXPECT_THROW(generate_kernel(a, Algorithm::grad_fd, build_levels(a), cm, layout), std::invalid_argument);
    EXPECT_THROW(generate_kernel(b, Algorithm::grad_id, build_levels(b), cm, layout), std::invalid_argument);
}

TEST(KernelIr, EquilibriumTorqueGivesZeroAcceleration) {
    for (const auto& bm : bundled_models()) {
        const RobotModel m = bundled_model(bm.name);
        const KernelProgram p = build_kernel(m, Algorithm::fd);
        std::mt19937_64 rng(6);
        JointState s = random_state(m, rng);
        s.u = bias_force(m, s.q, s.qd);
        const NamedVectors out = interpret(p, kernel_inputs(p, s), 2);
        for (double x : out.at("qdd")) EXPECT_NEAR(x, 0.0, 1e-10) << bm.name;
    }
}

TEST(KernelIr, InterpreterInputChecks) {
    const KernelProgram p = kernel("iiwa7", Algorithm::id);
    const Interpreter interp(p);
    std::mt19937_64 rng(7);
    NamedVectors in = kernel_inputs(p, random_state(bundled_model("iiwa7"), rng));
    NamedVectors bad = in;
    bad["q"].pop_back();
    EXPECT_THROW(interp.run(bad), std::invalid_argument);
    bad = in;
    bad["bogus"] = {1.0};
    EXPECT_THROW(interp.run(bad), std::invalid_argument);
    bad = in;
    bad.erase("qd");
    EXPECT_THROW(interp.run(bad), std::invalid_argument);
    EXPECT_THROW(interp.run(in, 0), std::invalid_argument);
}

TEST(KernelIr, SelectFlagOutsideDomainIsRejected) {
    const KernelProgram p = kernel("iiwa7", Algorithm::id);
    std::mt19937_64 rng(8);
    const RobotModel m = bundled_model("iiwa7");
    NamedVectors in = kernel_inputs(p, state_for(m, rng, true));
    ASSERT_EQ(in.at("fext_flag"), std::vector<double>{1.0});
    in["fext_flag"] = {0.5};
    EXPECT_THROW(interpret(p, in), std::runtime_error);
    in["fext_flag"] = {0.0};
    const NamedVectors off = interpret(p, in);
    in.erase("fext");
    in.erase("fext_flag");
    EXPECT_EQ(interpret(p, in), off);
}

TEST(KernelIr, SerializationRoundTrip) {
    for (const auto& bm : bundled_models()) {
        for (Algorithm alg : all_algorithms()) {
            const KernelProgram p = kernel(bm.name, alg);
            const std::string text = serialize(p);
            ASSERT_EQ(text.rfind("rbdkit-kernel 1\n", 0), 0u);
            const KernelProgram back = deserialize(text);
            EXPECT_EQ(serialize(back), text);
            EXPECT_EQ(back.instruction_count(), p.instruction_count());
            std::mt19937_64 rng(9);
            const NamedVectors in = kernel_inputs(p, random_state(bundled_model(bm.name), rng));
            EXPECT_EQ(interpret(back, in), interpret(p, in));
        }
    }
    EXPECT_THROW(deserialize("rbdkit-kernel 2\n"), std::invalid_argument);
    EXPECT_THROW(deserialize("garbage"), std::invalid_argument);
}

TEST(KernelIr, GoldenSingleLinkKernel) {
    std::ifstream in(std::filesystem::path(RBDKIT_GOLDEN_DIR) / "id_link1.kernel");
    ASSERT_TRUE(in) << "missing golden file";
    std::stringstream golden;
    golden << in.rdbuf();
    EXPECT_EQ(serialize(kernel("link1", Algorithm::id)), golden.str());
}

TEST(KernelIr, EmittedSourceIsDeterministic) {
    for (Algorithm alg : all_algorithms()) {
        const KernelProgram p = kernel("quadruped12", alg);
        for (Dialect d : {Dialect::portable_c, Dialect::annotated_listing})
            EXPECT_EQ(emit_source(p, d), emit_source(kernel("quadruped12", alg), d));
    }
}

TEST(KernelIr, ListingHasOneLinePerInstruction) {
    const std::regex instr_line(R"(^\s+\d+: )");
    for (const char* name : {"link1", "iiwa7"}) {
        for (Algorithm alg : all_algorithms()) {
            const KernelProgram p = kernel(name, alg);
            std::istringstream listing(emit_source(p, Dialect::annotated_listing));
            long lines = 0;
            for (std::string line; std::getline(listing, line);) lines += std::regex_search(line, instr_line);
            EXPECT_EQ(lines, p.instruction_count()) << name << " " << to_string(alg);
        }
    }
    const std::string listing = emit_source(kernel("link1", Algorithm::id), Dialect::annotated_listing);
    EXPECT_NE(listing.find("phase 1 \"rnea_fwd L0\""), std::string::npos);
    EXPECT_NE(listing.find("barrier"), std::string::npos);
}

TEST(KernelIr, SerialChainSourceFoldsParentIndex) {
    for (Algorithm alg : all_algorithms()) {
        const std::string chain = emit_source(kernel("iiwa7", alg), Dialect::portable_c);
        EXPECT_EQ(chain.find("kParent"), std::string::npos);
        EXPECT_NE(chain.find("i - 1"), std::string::npos);
        const std::string tree = emit_source(kernel("quadruped12", alg), Dialect::portable_c);
        EXPECT_NE(tree.find("kParent"), std::string::npos);
    }
}

TEST(KernelIr, GradientKernelsExposeWideParallelism) {
    for (const RobotModel& m : {branching(), bundled_model("quadruped12"), bundled_model("humanoid30")}) {
        for (Algorithm alg : {Algorithm::grad_id, Algorithm::grad_fd}) {
            const KernelProgram p = build_kernel(m, alg);
            EXPECT_GE(p.max_items_per_phase(), m.n_dof) << m.name << " " << to_string(alg);
        }
    }
}

TEST(KernelIr, CompressedDenseAndFusedLayoutsAgree) {
    for (const char* name : {"quadruped12", "humanoid30", "pendulum2"}) {
        const RobotModel m = bundled_model(name);
        for (Algorithm alg : all_algorithms()) {
            KernelConfig full, dense, fused;
            full.budget = dense.budget = 1L << 22;
            dense.dense_columns = true;
            fused.budget = layout_sizes(m, alg, analyze_sparsity(m, alg)).reduced;
            const KernelProgram pf = build_kernel(m, alg, full);
            const KernelProgram pd = build_kernel(m, alg, dense);
            const KernelProgram pr = build_kernel(m, alg, fused);
            EXPECT_TRUE(pd.dense_columns);
            EXPECT_LE(pr.arena_size, fused.budget);
            if (is_gradient(alg)) {
                EXPECT_FALSE(pf.fused_cross);
                EXPECT_TRUE(pr.fused_cross);
                EXPECT_LT(pf.arena_size, pd.arena_size);
            }
            std::mt19937_64 rng(10);
            for (int t = 0; t < 3; ++t) {
                const JointState s = state_for(m, rng, t == 2);
                const NamedVectors want = interpret(pf, kernel_inputs(pf, s));
                EXPECT_LE(max_deviation(interpret(pd, kernel_inputs(pd, s)), want), 1e-12) << name;
                EXPECT_LE(max_deviation(interpret(pr, kernel_inputs(pr, s)), want), 1e-12) << name;
            }
        }
    }
}

}  // namespace
}  // namespace rbdkit
