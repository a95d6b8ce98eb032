#include "rbdkit/batch_exec.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <latch>
#include <mutex>
#include <set>
#include <stdexcept>
#include <thread>
#include <utility>

#include <boost/accumulators/accumulators.hpp>
#include <boost/accumulators/statistics/mean.hpp>
#include <boost/accumulators/statistics/stats.hpp>
#include <boost/accumulators/statistics/variance.hpp>

namespace rbdkit {

namespace {

using Clock = std::chrono::steady_clock;

double seconds(Clock::time_point a, Clock::time_point b) { return std::chrono::duration<double>(b - a).count(); }

}  // namespace

std::string_view to_string(BatchMode mode) { return mode == BatchMode::serial ? "serial" : "parallel"; }

BatchMode parse_batch_mode(std::string_view name) {
    if (name == "serial") return BatchMode::serial;
    if (name == "parallel") return BatchMode::parallel;
    throw std::invalid_argument("unknown batch mode '" + std::string(name) + "'");
}

int physical_core_count() {
    std::ifstream in("/proc/cpuinfo");
    std::set<std::pair<std::string, std::string>> cores;
    std::string line, package = "0";
    while (std::getline(in, line)) {
        const auto colon = line.find(':');
        if (colon == std::string::npos) continue;
        std::string key = line.substr(0, colon);
        key.erase(key.find_last_not_of(" \t") + 1);
        const std::string value = colon + 2 <= line.size() ? line.substr(colon + 2) : std::string();
        if (key == "physical id") package = value;
        if (key == "core id") cores.insert({package, value});
    }
    if (!cores.empty()) return static_cast<int>(cores.size());
    return std::max(1u, std::thread::hardware_concurrency());
}

BatchResult run_batch(const BatchRequest& request) {
    if (!request.program) throw std::invalid_argument("batch request has no program");
    const Interpreter& program = *request.program;
    const size_t n = request.inputs.size();
    if (n == 0) throw std::invalid_argument("batch request has no items");

    BatchResult result;
    const int cores = physical_core_count();
    result.workers = request.mode == BatchMode::serial ? 1 : (request.workers > 0 ? request.workers : cores);
    result.oversubscribed = result.workers > cores;

    // Marshaling (outside the compute timing): private arenas per item.
    const size_t arena = static_cast<size_t>(program.arena_size());
    std::vector<std::vector<double>> arenas(n, std::vector<double>(arena));
    for (size_t k = 0; k < n; ++k) {
        try {
            program.load_inputs(request.inputs[k], arenas[k]);
        } catch (const std::invalid_argument& e) {
            throw std::invalid_argument("batch item " + std::to_string(k) + ": " + e.what());
        }
    }

    // Simulated transfer: arenas are staged through a contiguous buffer.
    std::vector<double> staging;
    auto stage = [&](bool inbound) {
        const auto t0 = Clock::now();
        staging.resize(n * arena);
        for (size_t k = 0; k < n; ++k) {
            double* host = staging.data() + k * arena;
            if (inbound) {
                std::memcpy(host, arenas[k].data(), arena * sizeof(double));
                std::memcpy(arenas[k].data(), host, arena * sizeof(double));
            } else {
                for (const auto& s : program.outputs())
                    std::memcpy(host + s.offset, arenas[k].data() + s.offset, static_cast<size_t>(s.extent) * sizeof(double));
            }
        }
        result.io_time += seconds(t0, Clock::now());
    };
    if (request.io_sim) stage(true);

    if (request.mode == BatchMode::serial) {
        result.per_item_time.resize(n);
        const auto t0 = Clock::now();
        for (size_t k = 0; k < n; ++k) {
            const auto s = Clock::now();
            program.execute(arenas[k], 1);
            result.per_item_time[k] = seconds(s, Clock::now());
        }
        result.wall_time = seconds(t0, Clock::now());
    } else {
        const int workers = result.workers;
        std::atomic<size_t> next{0};
        std::latch start(1), ready(workers), done(workers);
        std::exception_ptr error;
        std::mutex error_mutex;
        auto worker = [&] {
            ready.count_down();
            start.wait();
            for (size_t k = next.fetch_add(1); k < n; k = next.fetch_add(1)) {
                try {
                    program.execute(arenas[k], 1);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
            done.count_down();
        };
        std::vector<std::jthread> pool;
        pool.reserve(static_cast<size_t>(workers));
        for (int t = 0; t < workers; ++t) pool.emplace_back(worker);
        ready.wait();
        const auto t0 = Clock::now();
        start.count_down();
        done.wait();
        result.wall_time = seconds(t0, Clock::now());
        pool.clear();
        if (error) std::rethrow_exception(error);
    }

    if (request.io_sim) stage(false);
    result.outputs.reserve(n);
    for (size_t k = 0; k < n; ++k) result.outputs.push_back(program.read_outputs(arenas[k]));
    return result;
}

NamedVectors random_inputs(const Interpreter& program, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    NamedVectors in;
    for (const auto& s : program.inputs()) {
        if (s.name == "fext" || s.name == "fext_flag") continue;
        auto& v = in[s.name];
        v.resize(static_cast<size_t>(s.extent));
        for (double& x : v) x = dist(rng);
    }
    return in;
}

std::vector<LatencyRow> sweep(const KernelProgram& program, const std::vector<int>& ns, const SweepOptions& options) {
    if (ns.empty()) throw std::invalid_argument("sweep needs at least one batch size");
    if (options.repetitions < 1) throw std::invalid_argument("sweep needs at least one repetition");
    auto interp = std::make_shared<const Interpreter>(program);
    std::vector<LatencyRow> rows;
    for (int n : ns) {
        if (n < 1) throw std::invalid_argument("batch size must be positive");
        std::mt19937_64 rng(options.seed);
        BatchRequest request;
        request.program = interp;
        request.mode = options.mode;
        request.workers = options.workers;
        request.io_sim = options.io_sim;
        for (int k = 0; k < n; ++k) request.inputs.push_back(random_inputs(*interp, rng));

        namespace acc = boost::accumulators;
        acc::accumulator_set<double, acc::stats<acc::tag::mean, acc::tag::variance>> wall, io;
        int workers = 1;
        for (int r = 0; r < options.warmup + options.repetitions; ++r) {
            const BatchResult res = run_batch(request);
            workers = res.workers;
            if (r < options.warmup) continue;
            wall(res.wall_time * 1e6);
            io(res.io_time * 1e6);
        }
        LatencyRow row;
        row.algorithm = std::string(to_string(program.algorithm));
        row.model = program.model_name;
        row.n = n;
        row.mode = options.mode;
        row.workers = workers;
        row.mean_us = acc::mean(wall);
        row.std_us = std::sqrt(acc::variance(wall));
        row.reps = options.repetitions;
        row.io_us = acc::mean(io);
        rows.push_back(row);
    }
    return rows;
}

void write_latency_csv(std::ostream& out, const std::vector<LatencyRow>& rows) {
    out << "algorithm,model,N,mode,workers,mean_us,std_us,reps\n";
    for (const auto& r : rows) {
        out << r.algorithm << "," << r.model << "," << r.n << "," << to_string(r.mode) << "," << r.workers << ","
            << r.mean_us << "," << r.std_us << "," << r.reps << "\n";
    }
}

}  // namespace rbdkit
