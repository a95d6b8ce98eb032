#pragma once

// Straight-line, barrier-phased data-parallel kernel IR.
//
// A program is a list of phases separated by barriers. Each phase holds
// independent work items (one per thread); a work item is an ordered list of
// instructions with no control flow. Operands name a slot of the shared
// arena, a private register of the executing work item, or an immediate.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "rbdkit/schedule.hpp"
#include "rbdkit/urdf_model.hpp"

namespace rbdkit {

enum class Op : std::uint8_t { load_const, mov, add, sub, mul, fma, neg, sin, cos, recip, select };

std::string_view to_string(Op op);
Op parse_op(std::string_view name);
/// Number of source operands.
int arity(Op op);
/// Whether an opcode transfers control. No opcode of this IR does.
bool is_control_flow(Op op);

enum class OperandKind : std::uint8_t { none, arena, reg, imm };

struct Operand {
    OperandKind kind = OperandKind::none;
    std::uint32_t index = 0;
    double imm = 0.0;

    static Operand arena(std::uint32_t slot) { return {OperandKind::arena, slot, 0.0}; }
    static Operand reg(std::uint32_t r) { return {OperandKind::reg, r, 0.0}; }
    static Operand constant(double v) { return {OperandKind::imm, 0, v}; }
    bool operator==(const Operand& o) const;
};

/// dst = op(src...). `fma a b c` is a*b+c; `select f a b` is f*a+(1-f)*b.
struct Instr {
    Op op = Op::mov;
    Operand dst;
    Operand src[3];
};

/// Generator metadata attached to a work item (-1 when not applicable).
struct WorkItem {
    std::string tag;
    int frame = -1;
    int column = -1;
    /// 0: derivative with respect to q, 1: with respect to qd.
    int wrt = -1;
    int n_regs = 0;
    std::vector<Instr> instrs;
};

struct Phase {
    std::string name;
    std::vector<WorkItem> items;
};

/// Named arena segment used for inputs and outputs.
struct IoSegment {
    std::string name;
    int offset = 0;
    int extent = 0;
    int stride = 0;
};

struct KernelProgram {
    std::string model_name;
    Algorithm algorithm = Algorithm::id;
    int n_dof = 0;
    Topology topology = Topology::serial_chain;
    std::vector<int> parent;
    bool fused_cross = false;
    bool dense_columns = false;
    int arena_size = 0;
    /// Every layout segment, for listings; inputs/outputs are the I/O subset.
    std::vector<IoSegment> segments;
    std::vector<IoSegment> inputs;
    std::vector<IoSegment> outputs;
    std::vector<Phase> phases;

    long instruction_count() const;
    int max_items_per_phase() const;
    int max_registers() const;
    const IoSegment* find_input(std::string_view name) const;
    const IoSegment* find_output(std::string_view name) const;
};

struct RaceViolation {
    int phase = 0;
    int slot = 0;
    int writer_item = 0;
    int other_item = 0;
    bool other_writes = false;
};

struct RaceReport {
    std::vector<RaceViolation> violations;
    bool clean() const { return violations.empty(); }
};

/// Lists every arena slot written by one item and read or written by another
/// item of the same phase.
RaceReport check_races(const KernelProgram& program);

/// Counts control-flow instructions (always zero for well-formed programs).
long count_control_flow(const KernelProgram& program);

/// Structural validation: slot bounds, register bounds, operand kinds,
/// metadata consistency. Throws std::invalid_argument.
void validate_program(const KernelProgram& program);

/// Versioned text serialization, stable across runs.
std::string serialize(const KernelProgram& program);
KernelProgram deserialize(std::string_view text);

enum class Dialect { portable_c, annotated_listing };

std::string emit_source(const KernelProgram& program, Dialect dialect);

}  // namespace rbdkit
