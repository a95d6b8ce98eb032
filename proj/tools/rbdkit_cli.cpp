// rbdkit: validate, benchmark and inspect generated dynamics kernels.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "rbdkit/bench.hpp"
#include "rbdkit/codegen.hpp"
#include "rbdkit/models.hpp"

namespace {

using namespace rbdkit;

struct Options {
    std::vector<std::string> urdfs;
    std::vector<std::string> algorithms;
    std::vector<int> ns;
    int workers = 0;
    int reps = 100;
    int states = 100;
    std::uint64_t seed = 1;
    long budget = kDefaultBudget;
    bool io_sim = false;
    bool dense = false;
    std::string kernel_format = "ir";
    std::string schedule_format = "text";
    std::string out;
};

BenchConfig to_config(const Options& o) {
    BenchConfig c;
    c.urdfs = o.urdfs;
    for (const auto& a : o.algorithms) c.algorithms.push_back(parse_algorithm(a));
    if (!o.ns.empty()) c.ns = o.ns;
    c.workers = o.workers;
    c.repetitions = o.reps;
    c.states = o.states;
    c.seed = o.seed;
    c.budget = o.budget;
    c.io_sim = o.io_sim;
    c.output_path = o.out;
    check_config(c);
    return c;
}

void write_text(const std::string& path, const std::string& text) {
    if (path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
}

std::string single(const std::vector<std::string>& values, const char* what, const std::string& fallback) {
    if (values.size() > 1) throw std::invalid_argument(std::string("exactly one ") + what + " is expected here");
    return values.empty() ? fallback : values.front();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Robot-specific rigid body dynamics kernel generator"};
    app.require_subcommand(1);
    Options o;

    auto add_model = [&](CLI::App* cmd) {
        cmd->add_option("--urdf", o.urdfs, "URDF path or bundled:<name> (repeatable)");
    };
    auto add_alg = [&](CLI::App* cmd) {
        cmd->add_option("--alg", o.algorithms, "ID, Minv, FD, gradID or gradFD (repeatable)");
    };
    auto add_budget = [&](CLI::App* cmd) {
        cmd->add_option("--budget", o.budget, "workspace budget in scalar slots")->capture_default_str();
    };

    CLI::App* validate = app.add_subcommand("validate", "check generated kernels against the reference dynamics");
    add_model(validate);
    add_alg(validate);
    add_budget(validate);
    validate->add_option("--seed", o.seed, "random state seed")->capture_default_str();
    validate->add_option("--states", o.states, "random states per model and algorithm")->capture_default_str();
    validate->add_option("--out", o.out, "coverage manifest path (JSON)");

    CLI::App* bench = app.add_subcommand("bench", "measure serial and parallel batch latency");
    add_model(bench);
    add_alg(bench);
    add_budget(bench);
    bench->add_option("--N", o.ns, "batch size (repeatable)");
    bench->add_option("--workers", o.workers, "parallel workers (0: physical cores)")->capture_default_str();
    bench->add_option("--reps", o.reps, "timed repetitions per batch size")->capture_default_str();
    bench->add_option("--seed", o.seed, "input seed")->capture_default_str();
    bench->add_flag("--io-sim", o.io_sim, "time a simulated input/output transfer");
    bench->add_option("--out", o.out, "CSV output path")->required();

    CLI::App* report = app.add_subcommand("report", "derive series and scaling tables from a bench CSV");
    std::string csv;
    report->add_option("csv", csv, "CSV written by bench")->required();
    report->add_option("--out", o.out, "output directory")->required();

    CLI::App* dump_kernel = app.add_subcommand("dump-kernel", "print a generated kernel");
    add_model(dump_kernel);
    add_alg(dump_kernel);
    add_budget(dump_kernel);
    dump_kernel->add_flag("--dense", o.dense, "keep every gradient column");
    dump_kernel->add_option("--format", o.kernel_format, "ir, c or listing")
        ->check(CLI::IsMember({"ir", "c", "listing"}))
        ->capture_default_str();
    dump_kernel->add_option("--out", o.out, "output path (default: stdout)");

    CLI::App* dump_schedule = app.add_subcommand("dump-schedule", "print levels, retained columns and layout");
    add_model(dump_schedule);
    add_alg(dump_schedule);
    add_budget(dump_schedule);
    dump_schedule->add_flag("--dense", o.dense, "keep every gradient column");
    dump_schedule->add_option("--format", o.schedule_format, "text or json")
        ->check(CLI::IsMember({"text", "json"}))
        ->capture_default_str();
    dump_schedule->add_option("--out", o.out, "output path (default: stdout)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (validate->parsed()) {
            const ValidationReport r = cmd_validate(to_config(o));
            std::cout << r.text();
            return r.passed() ? 0 : 1;
        }
        if (bench->parsed()) {
            if (o.urdfs.empty()) o.urdfs.push_back("bundled:iiwa7");
            const auto rows = cmd_bench(to_config(o));
            std::cout << "wrote " << rows.size() << " rows to " << o.out << "\n";
            return 0;
        }
        if (report->parsed()) {
            for (const auto& path : cmd_report(csv, o.out)) std::cout << path.string() << "\n";
            return 0;
        }
        const RobotModel model = load_model(single(o.urdfs, "--urdf", "bundled:iiwa7"));
        const Algorithm alg = parse_algorithm(single(o.algorithms, "--alg", "ID"));
        if (dump_kernel->parsed()) {
            KernelConfig kc;
            kc.budget = o.budget;
            kc.dense_columns = o.dense;
            const KernelProgram program = build_kernel(model, alg, kc);
            if (o.kernel_format == "ir") {
                write_text(o.out, serialize(program));
            } else {
                write_text(o.out, emit_source(program, o.kernel_format == "c" ? Dialect::portable_c : Dialect::annotated_listing));
            }
            return 0;
        }
        const LevelSchedule schedule = build_levels(model);
        const ColumnMap columns = o.dense ? dense_columns(model, alg) : analyze_sparsity(model, alg);
        const WorkspaceLayout layout = plan_workspace(model, alg, columns, o.budget);
        write_text(o.out, o.schedule_format == "json" ? dump_schedule_json(model, schedule, columns, layout)
                                             : dump_schedule_text(model, schedule, columns, layout));
        return 0;
    } catch (const InfeasibleBudgetError& e) {
        std::cerr << "rbdkit: infeasible budget: " << e.what() << "\n";
    } catch (const ModelError& e) {
        std::cerr << "rbdkit: model error: " << e.what() << "\n";
    } catch (const std::exception& e) {
        std::cerr << "rbdkit: " << e.what() << "\n";
    }
    return 2;
}
