#pragma once

// Coarse-grained parallel execution of N independent kernel evaluations.

#include <cstdint>
#include <memory>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "rbdkit/interpreter.hpp"

namespace rbdkit {

enum class BatchMode { serial, parallel };

std::string_view to_string(BatchMode mode);
BatchMode parse_batch_mode(std::string_view name);

/// Physical cores (distinct core ids per package); falls back to the
/// hardware thread count.
int physical_core_count();

struct BatchRequest {
    std::shared_ptr<const Interpreter> program;
    std::vector<NamedVectors> inputs;
    /// 0 selects physical_core_count().
    int workers = 0;
    BatchMode mode = BatchMode::parallel;
    /// Adds a timed copy of inputs and outputs through staging buffers.
    bool io_sim = false;
};

struct BatchResult {
    std::vector<NamedVectors> outputs;
    double wall_time = 0.0;
    /// Serial mode only; one entry per item.
    std::vector<double> per_item_time;
    /// Simulated marshaling time; zero unless io_sim.
    double io_time = 0.0;
    int workers = 1;
    bool oversubscribed = false;
};

/// Every item runs on its own zero-initialized arena. Throws
/// std::invalid_argument naming the item index on input mismatch.
BatchResult run_batch(const BatchRequest& request);

/// Uniform values in [-1, 1] for every input except external forces.
NamedVectors random_inputs(const Interpreter& program, std::mt19937_64& rng);

struct SweepOptions {
    BatchMode mode = BatchMode::parallel;
    int workers = 0;
    int repetitions = 100;
    int warmup = 2;
    std::uint64_t seed = 1;
    bool io_sim = false;
};

struct LatencyRow {
    std::string algorithm;
    std::string model;
    int n = 0;
    BatchMode mode = BatchMode::serial;
    int workers = 1;
    double mean_us = 0.0;
    double std_us = 0.0;
    int reps = 0;
    double io_us = 0.0;
};

/// Mean and standard deviation of the batch wall time per N.
std::vector<LatencyRow> sweep(const KernelProgram& program, const std::vector<int>& ns, const SweepOptions& options);

/// Columns: algorithm, model, N, mode, workers, mean_us, std_us, reps.
void write_latency_csv(std::ostream& out, const std::vector<LatencyRow>& rows);

}  // namespace rbdkit
