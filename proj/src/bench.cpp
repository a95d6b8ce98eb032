#include "rbdkit/bench.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include <boost/algorithm/string.hpp>
#include <nlohmann/json.hpp>

#include "rbdkit/codegen.hpp"
#include "rbdkit/models.hpp"

namespace rbdkit {

namespace {

std::vector<double> flatten(const VectorXd& v) { return {v.data(), v.data() + v.size()}; }

std::vector<double> flatten(const MatrixXd& m) {
    std::vector<double> out;
    out.reserve(static_cast<size_t>(m.size()));
    for (int i = 0; i < m.rows(); ++i)
        for (int j = 0; j < m.cols(); ++j) out.push_back(m(i, j));
    return out;
}

std::vector<std::string> model_specs(const BenchConfig& config) {
    if (!config.urdfs.empty()) return config.urdfs;
    std::vector<std::string> out;
    for (const auto& m : bundled_models()) out.push_back("bundled:" + m.name);
    return out;
}

std::vector<Algorithm> algorithms_of(const BenchConfig& config) {
    return config.algorithms.empty() ? all_algorithms() : config.algorithms;
}

/// Updates running maxima of absolute and relative deviation.
void deviation(const std::vector<double>& got, const std::vector<double>& ref, double& max_abs, double& max_rel) {
    if (got.size() != ref.size()) throw std::logic_error("output size differs from reference");
    for (size_t k = 0; k < got.size(); ++k) {
        const double err = std::abs(got[k] - ref[k]);
        max_abs = std::max(max_abs, err);
        if (ref[k] != 0.0) max_rel = std::max(max_rel, err / std::abs(ref[k]));
    }
}

/// Finite-difference check of the reference gradients; returns pass/fail and
/// updates deviation maxima. An entry passes within the absolute or the
/// relative tolerance.
bool finite_difference_check(const RobotModel& model, Algorithm algorithm, const JointState& state, double& max_abs,
                             double& max_rel) {
    const ExternalForces* f_ext = state.f_ext ? &*state.f_ext : nullptr;
    DynamicsGradients analytic;
    std::function<VectorXd(const VectorXd&, const VectorXd&)> value;
    if (algorithm == Algorithm::grad_id) {
        analytic = rnea_grad(model, state.q, state.qd, state.u, f_ext);
        value = [&](const VectorXd& q, const VectorXd& qd) { return rnea(model, q, qd, state.u, f_ext); };
    } else {
        analytic = fd_grad(model, state.q, state.qd, state.u, f_ext);
        value = [&](const VectorXd& q, const VectorXd& qd) { return forward_dynamics(model, q, qd, state.u, f_ext); };
    }
    const MatrixXd dq = finite_diff_oracle([&](const VectorXd& q) { return value(q, state.qd); }, state.q, kFdStep);
    const MatrixXd dqd = finite_diff_oracle([&](const VectorXd& qd) { return value(state.q, qd); }, state.qd, kFdStep);
    bool ok = true;
    for (const auto& [a, n] : {std::pair{&analytic.dq, &dq}, std::pair{&analytic.dqd, &dqd}}) {
        for (int i = 0; i < a->rows(); ++i) {
            for (int j = 0; j < a->cols(); ++j) {
                const double err = std::abs((*a)(i, j) - (*n)(i, j));
                const double rel = err / std::max(std::abs((*n)(i, j)), 1e-300);
                max_abs = std::max(max_abs, err);
                if ((*n)(i, j) != 0.0) max_rel = std::max(max_rel, rel);
                if (err > kFdAbsTolerance && rel > kFdRelTolerance) ok = false;
            }
        }
    }
    return ok;
}

AlgorithmCheck check_algorithm(const RobotModel& model, Algorithm algorithm, const BenchConfig& config) {
    AlgorithmCheck check;
    check.model = model.name;
    check.algorithm = algorithm;
    KernelConfig kc;
    kc.budget = config.budget;
    const KernelProgram program = build_kernel(model, algorithm, kc);
    check.fused_cross = program.fused_cross;
    check.races_clean = check_races(program).clean();
    check.control_flow = count_control_flow(program);
    const Interpreter interp(program);

    std::mt19937_64 rng(config.seed);
    bool fd_ok = true;
    for (int s = 0; s < config.states; ++s) {
        JointState state = random_state(model, rng);
        if (s % 2 == 1) state.f_ext = random_forces(model, rng);
        const NamedVectors in = kernel_inputs(program, state);
        const NamedVectors got = interp.run(in, 1);
        const NamedVectors ref = reference_outputs(model, algorithm, state);
        for (const auto& [name, values] : ref) deviation(got.at(name), values, check.max_abs, check.max_rel);
        if (s < 3 && interp.run(in, 4) != got) check.threads_agree = false;
        if (is_gradient(algorithm) && s < config.fd_states) {
            fd_ok = finite_difference_check(model, algorithm, state, check.fd_max_abs, check.fd_max_rel) && fd_ok;
            ++check.fd_states;
        }
    }
    check.states = config.states;
    check.fd_passed = fd_ok;
    check.passed = check.max_abs <= kOracleTolerance && fd_ok && check.races_clean && check.control_flow == 0 &&
                   check.threads_agree;
    return check;
}

/// Inverse-dynamics gradient entries between frames on different limbs must
/// be exactly zero.
bool branch_independence(const RobotModel& model, const BenchConfig& config) {
    KernelConfig kc;
    kc.budget = config.budget;
    const KernelProgram program = build_kernel(model, Algorithm::grad_id, kc);
    const Interpreter interp(program);
    std::mt19937_64 rng(config.seed ^ 0x5eedull);
    const int n = model.n_dof;
    for (int s = 0; s < 10; ++s) {
        const NamedVectors out = interp.run(kernel_inputs(program, random_state(model, rng)));
        for (const char* name : {"dtau_dq", "dtau_dqd"}) {
            const auto& d = out.at(name);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j)
                    if (!model.is_ancestor_or_self(i, j) && !model.is_ancestor_or_self(j, i) && d[i * n + j] != 0.0)
                        return false;
        }
    }
    return true;
}

std::string format_sci(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

}  // namespace

void check_config(const BenchConfig& config) {
    if (config.ns.empty()) throw std::invalid_argument("at least one batch size is required");
    for (int n : config.ns)
        if (n < 1) throw std::invalid_argument("batch sizes must be positive");
    if (config.repetitions < 1) throw std::invalid_argument("repetitions must be at least 1");
    if (config.warmup < 0) throw std::invalid_argument("warm-up count must be non-negative");
    if (config.workers < 0) throw std::invalid_argument("worker count must be non-negative");
    if (config.states < 1) throw std::invalid_argument("at least one validation state is required");
    if (config.budget < 1) throw std::invalid_argument("budget must be positive");
}

NamedVectors reference_outputs(const RobotModel& model, Algorithm algorithm, const JointState& state) {
    const ExternalForces* f_ext = state.f_ext ? &*state.f_ext : nullptr;
    NamedVectors out;
    switch (algorithm) {
        case Algorithm::id: out["tau"] = flatten(rnea(model, state.q, state.qd, state.u, f_ext)); break;
        case Algorithm::minv: out["minv"] = flatten(minv_direct(model, state.q)); break;
        case Algorithm::fd: out["qdd"] = flatten(forward_dynamics(model, state.q, state.qd, state.u, f_ext)); break;
        case Algorithm::grad_id: {
            const DynamicsGradients g = rnea_grad(model, state.q, state.qd, state.u, f_ext);
            out["dtau_dq"] = flatten(g.dq);
            out["dtau_dqd"] = flatten(g.dqd);
            break;
        }
        case Algorithm::grad_fd: {
            const DynamicsGradients g = fd_grad(model, state.q, state.qd, state.u, f_ext);
            out["dqdd_dq"] = flatten(g.dq);
            out["dqdd_dqd"] = flatten(g.dqd);
            break;
        }
    }
    return out;
}

bool ValidationReport::passed() const {
    if (models.empty()) return false;
    for (const auto& m : models) {
        if (!m.error.empty() || !m.branch_independent || m.algorithms.empty()) return false;
        for (const auto& a : m.algorithms)
            if (!a.passed) return false;
    }
    return true;
}

std::string ValidationReport::text() const {
    std::ostringstream out;
    for (const auto& m : models) {
        out << "model " << m.model;
        if (!m.error.empty()) {
            out << ": FAILED: " << m.error << "\n";
            continue;
        }
        out << " (" << m.n_dof << " dof, " << to_string(m.topology) << ")\n";
        for (const auto& a : m.algorithms) {
            out << "  " << (a.passed ? "ok  " : "FAIL") << " " << to_string(a.algorithm) << ": " << a.states
                << " states, max abs " << format_sci(a.max_abs) << ", max rel " << format_sci(a.max_rel);
            if (is_gradient(a.algorithm))
                out << "; finite differences (" << a.fd_states << " states) max abs " << format_sci(a.fd_max_abs)
                    << ", max rel " << format_sci(a.fd_max_rel) << (a.fd_passed ? "" : " OUT OF TOLERANCE");
            if (a.fused_cross) out << "; fused cross products";
            if (!a.races_clean) out << "; RACES";
            if (a.control_flow) out << "; CONTROL FLOW";
            if (!a.threads_agree) out << "; THREAD-COUNT MISMATCH";
            out << "\n";
        }
        if (m.branch_check_run)
            out << "  " << (m.branch_independent ? "ok  " : "FAIL") << " cross-limb gradient blocks are zero\n";
    }
    out << (passed() ? "validation passed\n" : "validation FAILED\n");
    return out.str();
}

std::string ValidationReport::coverage_manifest() const {
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& m : models) {
        for (const auto& a : m.algorithms) {
            entries.push_back({{"model", m.model},
                               {"algorithm", to_string(a.algorithm)},
                               {"states", a.states},
                               {"oracle", "refdyn"},
                               {"finite_difference_states", a.fd_states},
                               {"race_check", true},
                               {"passed", a.passed}});
        }
    }
    return nlohmann::json{{"passed", passed()}, {"checks", entries}}.dump(2) + "\n";
}

ValidationReport cmd_validate(const BenchConfig& config) {
    check_config(config);
    ValidationReport report;
    for (const auto& spec : model_specs(config)) {
        ModelCheck mc;
        mc.model = spec;
        try {
            const RobotModel model = load_model(spec);
            mc.model = model.name;
            mc.n_dof = model.n_dof;
            mc.topology = classify_topology(model);
            for (Algorithm alg : algorithms_of(config)) mc.algorithms.push_back(check_algorithm(model, alg, config));
            if (mc.topology == Topology::branched_tree) {
                mc.branch_check_run = true;
                mc.branch_independent = branch_independence(model, config);
            }
        } catch (const std::exception& e) {
            mc.error = e.what();
        }
        report.models.push_back(std::move(mc));
    }
    if (!config.output_path.empty()) {
        std::ofstream out(config.output_path);
        if (!out) throw std::runtime_error("cannot write " + config.output_path.string());
        out << report.coverage_manifest();
    }
    return report;
}

void write_bench_csv(std::ostream& out, const std::vector<LatencyRow>& rows, bool io_column) {
    std::map<std::tuple<std::string, std::string, int>, std::pair<double, double>> means;
    for (const auto& r : rows) {
        auto& m = means[{r.algorithm, r.model, r.n}];
        (r.mode == BatchMode::serial ? m.first : m.second) = r.mean_us;
    }
    out << "algorithm,model,N,mode,workers,mean_us,std_us,reps,speedup";
    if (io_column) out << ",io_us";
    out << "\n";
    for (const auto& r : rows) {
        const auto& m = means[{r.algorithm, r.model, r.n}];
        const double speedup = m.first > 0.0 && m.second > 0.0 ? m.first / m.second : 0.0;
        out << r.algorithm << "," << r.model << "," << r.n << "," << to_string(r.mode) << "," << r.workers << ","
            << r.mean_us << "," << r.std_us << "," << r.reps << "," << speedup;
        if (io_column) out << "," << r.io_us;
        out << "\n";
    }
}

std::vector<LatencyRow> read_bench_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw std::invalid_argument("empty CSV");
    std::vector<std::string> header;
    boost::split(header, line, boost::is_any_of(","));
    std::map<std::string, size_t> col;
    for (size_t k = 0; k < header.size(); ++k) col[boost::trim_copy(header[k])] = k;
    for (const char* need : {"algorithm", "model", "N", "mode", "workers", "mean_us", "std_us", "reps"})
        if (!col.count(need)) throw std::invalid_argument(std::string("CSV lacks column '") + need + "'");
    std::vector<LatencyRow> rows;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (boost::trim_copy(line).empty()) continue;
        std::vector<std::string> f;
        boost::split(f, line, boost::is_any_of(","));
        if (f.size() != header.size())
            throw std::invalid_argument("CSV line " + std::to_string(line_no) + " has " + std::to_string(f.size()) +
                                        " fields, expected " + std::to_string(header.size()));
        try {
            LatencyRow r;
            r.algorithm = f[col["algorithm"]];
            r.model = f[col["model"]];
            r.n = std::stoi(f[col["N"]]);
            r.mode = parse_batch_mode(f[col["mode"]]);
            r.workers = std::stoi(f[col["workers"]]);
            r.mean_us = std::stod(f[col["mean_us"]]);
            r.std_us = std::stod(f[col["std_us"]]);
            r.reps = std::stoi(f[col["reps"]]);
            if (col.count("io_us")) r.io_us = std::stod(f[col["io_us"]]);
            rows.push_back(r);
        } catch (const std::exception& e) {
            throw std::invalid_argument("CSV line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    if (rows.empty()) throw std::invalid_argument("CSV has no data rows");
    return rows;
}

std::vector<LatencyRow> cmd_bench(const BenchConfig& config) {
    check_config(config);
    std::vector<LatencyRow> rows;
    for (const auto& spec : model_specs(config)) {
        const RobotModel model = load_model(spec);
        for (Algorithm alg : algorithms_of(config)) {
            KernelConfig kc;
            kc.budget = config.budget;
            const KernelProgram program = build_kernel(model, alg, kc);
            for (BatchMode mode : {BatchMode::serial, BatchMode::parallel}) {
                SweepOptions options;
                options.mode = mode;
                options.workers = config.workers;
                options.repetitions = config.repetitions;
                options.warmup = config.warmup;
                options.seed = config.seed;
                options.io_sim = config.io_sim;
                for (auto& row : sweep(program, config.ns, options)) rows.push_back(row);
            }
        }
    }
    if (!config.output_path.empty()) {
        std::ofstream out(config.output_path);
        if (!out) throw std::runtime_error("cannot write " + config.output_path.string());
        write_bench_csv(out, rows, config.io_sim);
    }
    return rows;
}

std::vector<std::filesystem::path> cmd_report(const std::filesystem::path& csv_path,
                                              const std::filesystem::path& out_dir) {
    std::ifstream in(csv_path);
    if (!in) throw std::invalid_argument("cannot read " + csv_path.string());
    const std::vector<LatencyRow> rows = read_bench_csv(in);
    std::filesystem::create_directories(out_dir);

    // (algorithm, model, N) -> (serial mean, parallel mean)
    std::map<std::string, std::map<std::pair<std::string, int>, std::pair<double, double>>> by_alg;
    std::set<std::string> models;
    for (const auto& r : rows) {
        auto& m = by_alg[r.algorithm][{r.model, r.n}];
        (r.mode == BatchMode::serial ? m.first : m.second) = r.mean_us;
        models.insert(r.model);
    }

    std::vector<std::filesystem::path> written;
    auto open = [&](const std::string& name) {
        written.push_back(out_dir / name);
        std::ofstream out(written.back());
        if (!out) throw std::runtime_error("cannot write " + written.back().string());
        return out;
    };
    for (const auto& [alg, entries] : by_alg) {
        std::ofstream out = open("series_" + alg + ".csv");
        out << "model,N,serial_mean_us,parallel_mean_us,speedup\n";
        for (const auto& [key, m] : entries) {
            const double speedup = m.first > 0.0 && m.second > 0.0 ? m.first / m.second : 0.0;
            out << key.first << "," << key.second << "," << m.first << "," << m.second << "," << speedup << "\n";
        }
    }
    std::ofstream out = open("scaling.csv");
    out << "algorithm,N,mode,model_a,model_b,ratio\n";
    for (const auto& [alg, entries] : by_alg) {
        std::set<int> ns;
        for (const auto& [key, m] : entries) ns.insert(key.second);
        for (int n : ns) {
            for (int mode = 0; mode < 2; ++mode) {
                for (const auto& a : models) {
                    for (const auto& b : models) {
                        auto ia = entries.find({a, n});
                        auto ib = entries.find({b, n});
                        if (ia == entries.end() || ib == entries.end()) continue;
                        const double la = mode == 0 ? ia->second.first : ia->second.second;
                        const double lb = mode == 0 ? ib->second.first : ib->second.second;
                        if (!(la > 0.0) || !(lb > 0.0)) continue;
                        out << alg << "," << n << "," << (mode == 0 ? "serial" : "parallel") << "," << a << "," << b
                            << "," << la / lb << "\n";
                    }
                }
            }
        }
    }
    return written;
}

}  // namespace rbdkit
