#pragma once

// Validation and benchmark drivers behind the command-line tool.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "rbdkit/batch_exec.hpp"
#include "rbdkit/interpreter.hpp"
#include "rbdkit/schedule.hpp"

namespace rbdkit {

struct BenchConfig {
    /// Model specs ("bundled:<name>" or a URDF path); empty means every
    /// bundled model.
    std::vector<std::string> urdfs;
    /// Empty means every algorithm.
    std::vector<Algorithm> algorithms;
    std::vector<int> ns{16, 32, 64, 128, 256};
    int workers = 0;
    int repetitions = 100;
    int warmup = 2;
    std::uint64_t seed = 1;
    long budget = kDefaultBudget;
    bool io_sim = false;
    std::filesystem::path output_path;
    /// Random states per (model, algorithm) in validation.
    int states = 100;
    /// Of which this many also get a finite-difference gradient check.
    int fd_states = 3;
};

/// Throws std::invalid_argument when a field is out of range.
void check_config(const BenchConfig& config);

/// Reference outputs named like the kernel's output segments.
NamedVectors reference_outputs(const RobotModel& model, Algorithm algorithm, const JointState& state);

struct AlgorithmCheck {
    std::string model;
    Algorithm algorithm = Algorithm::id;
    int states = 0;
    bool fused_cross = false;
    double max_abs = 0.0;
    double max_rel = 0.0;
    /// Finite-difference comparison (gradient algorithms only).
    int fd_states = 0;
    double fd_max_abs = 0.0;
    double fd_max_rel = 0.0;
    bool fd_passed = true;
    bool races_clean = true;
    long control_flow = 0;
    bool threads_agree = true;
    bool passed = false;
};

struct ModelCheck {
    std::string model;
    int n_dof = 0;
    Topology topology = Topology::serial_chain;
    std::vector<AlgorithmCheck> algorithms;
    /// Cross-limb blocks of the inverse-dynamics gradient (branched models).
    bool branch_check_run = false;
    bool branch_independent = true;
    std::string error;
};

struct ValidationReport {
    std::vector<ModelCheck> models;

    bool passed() const;
    std::string text() const;
    /// JSON manifest of every (model, algorithm) pair checked.
    std::string coverage_manifest() const;
};

/// Tolerances of the validation suite.
inline constexpr double kOracleTolerance = 1e-12;
inline constexpr double kFdStep = 1e-6;
inline constexpr double kFdRelTolerance = 1e-5;
inline constexpr double kFdAbsTolerance = 1e-7;

/// Model load and budget errors are recorded per model, not thrown. Writes
/// the coverage manifest to output_path when it is set.
ValidationReport cmd_validate(const BenchConfig& config);

/// Runs serial and parallel sweeps for every model and algorithm and writes
/// the CSV (with a speedup column, and io_us when io_sim) to output_path.
std::vector<LatencyRow> cmd_bench(const BenchConfig& config);

/// CSV with the bench schema, speedup appended as serial_mean/parallel_mean.
void write_bench_csv(std::ostream& out, const std::vector<LatencyRow>& rows, bool io_column);
std::vector<LatencyRow> read_bench_csv(std::istream& in);

/// Writes series_<algorithm>.csv per algorithm and scaling.csv into out_dir;
/// returns the written paths. Throws std::invalid_argument on malformed CSV.
std::vector<std::filesystem::path> cmd_report(const std::filesystem::path& csv_path,
                                              const std::filesystem::path& out_dir);

}  // namespace rbdkit
