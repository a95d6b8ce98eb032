#pragma once

// Executes KernelPrograms. Work items of a phase are pulled dynamically by a
// set of workers; a barrier separates consecutive phases.

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "rbdkit/kernel_ir.hpp"
#include "rbdkit/refdyn.hpp"

namespace rbdkit {

using NamedVectors = std::map<std::string, std::vector<double>>;

/// Program lowered into a compact form; immutable and shareable between threads.
class Interpreter {
  public:
    explicit Interpreter(const KernelProgram& program);

    int arena_size() const { return arena_size_; }
    const std::vector<IoSegment>& inputs() const { return inputs_; }
    const std::vector<IoSegment>& outputs() const { return outputs_; }

    /// Zero-fills the arena and copies inputs in. Every input segment must be
    /// supplied except fext and fext_flag; supplying fext without a flag sets
    /// the flag. Throws std::invalid_argument on unknown names or extents.
    void load_inputs(const NamedVectors& inputs, std::span<double> arena) const;

    /// Runs every phase in place. Throws std::runtime_error when a select
    /// flag is neither 0 nor 1.
    void execute(std::span<double> arena, int threads = 1) const;

    NamedVectors read_outputs(std::span<const double> arena) const;

    NamedVectors run(const NamedVectors& inputs, int threads = 1) const;

  private:
    struct Code {
        std::uint8_t op;
        std::uint32_t dst;
        std::uint32_t src[3];
    };
    struct Item {
        std::uint32_t begin;
        std::uint32_t end;
    };
    struct PhaseRange {
        std::uint32_t begin;
        std::uint32_t end;
    };

    void run_item(const Item& item, double* ws, double* regs) const;

    int arena_size_ = 0;
    int max_regs_ = 0;
    std::vector<IoSegment> inputs_;
    std::vector<IoSegment> outputs_;
    std::vector<Code> code_;
    std::vector<Item> items_;
    std::vector<PhaseRange> phases_;
    std::vector<double> constants_;
};

/// One evaluation of a program; thread_count >= 1.
NamedVectors interpret(const KernelProgram& program, const NamedVectors& inputs, int thread_count = 1);

/// Input vectors for a program from a joint state (u is qdd or tau).
NamedVectors kernel_inputs(const KernelProgram& program, const JointState& state);

}  // namespace rbdkit
