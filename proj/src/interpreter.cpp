#include "rbdkit/interpreter.hpp"

#include <atomic>
#include <barrier>
#include <cmath>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <thread>

namespace rbdkit {

namespace {

// Operand encoding: the top two bits select arena (0), register (1) or
// constant pool (2); the remaining bits are the index.
constexpr std::uint32_t kKindShift = 30;
constexpr std::uint32_t kIndexMask = (1u << kKindShift) - 1;

inline double fetch(std::uint32_t e, const double* ws, const double* regs, const double* consts) {
    const std::uint32_t index = e & kIndexMask;
    switch (e >> kKindShift) {
        case 0: return ws[index];
        case 1: return regs[index];
        default: return consts[index];
    }
}

}  // namespace

Interpreter::Interpreter(const KernelProgram& program)
    : arena_size_(program.arena_size), inputs_(program.inputs), outputs_(program.outputs) {
    validate_program(program);
    auto encode = [&](const Operand& o) -> std::uint32_t {
        switch (o.kind) {
            case OperandKind::arena: return o.index;
            case OperandKind::reg: return (1u << kKindShift) | o.index;
            case OperandKind::imm:
                constants_.push_back(o.imm);
                return (2u << kKindShift) | static_cast<std::uint32_t>(constants_.size() - 1);
            case OperandKind::none: break;
        }
        return 0;
    };
    for (const auto& phase : program.phases) {
        PhaseRange range{static_cast<std::uint32_t>(items_.size()), 0};
        for (const auto& item : phase.items) {
            Item lowered{static_cast<std::uint32_t>(code_.size()), 0};
            for (const auto& ins : item.instrs) {
                Code c{static_cast<std::uint8_t>(ins.op), encode(ins.dst), {0, 0, 0}};
                for (int s = 0; s < arity(ins.op); ++s) c.src[s] = encode(ins.src[s]);
                code_.push_back(c);
            }
            lowered.end = static_cast<std::uint32_t>(code_.size());
            items_.push_back(lowered);
            max_regs_ = std::max(max_regs_, item.n_regs);
        }
        range.end = static_cast<std::uint32_t>(items_.size());
        phases_.push_back(range);
    }
}

void Interpreter::run_item(const Item& item, double* ws, double* regs) const {
    const double* k = constants_.data();
    for (std::uint32_t pc = item.begin; pc < item.end; ++pc) {
        const Code& c = code_[pc];
        auto s = [&](int i) { return fetch(c.src[i], ws, regs, k); };
        double r = 0.0;
        switch (static_cast<Op>(c.op)) {
            case Op::load_const:
            case Op::mov: r = s(0); break;
            case Op::add: r = s(0) + s(1); break;
            case Op::sub: r = s(0) - s(1); break;
            case Op::mul: r = s(0) * s(1); break;
            case Op::fma: {
                const double product = s(0) * s(1);
                r = product + s(2);
                break;
            }
            case Op::neg: r = -s(0); break;
            case Op::sin: r = std::sin(s(0)); break;
            case Op::cos: r = std::cos(s(0)); break;
            case Op::recip: r = 1.0 / s(0); break;
            case Op::select: {
                const double flag = s(0);
                if (flag != 0.0 && flag != 1.0)
                    throw std::runtime_error("select flag " + std::to_string(flag) + " is outside {0, 1}");
                r = flag * s(1) + (1.0 - flag) * s(2);
                break;
            }
        }
        const std::uint32_t index = c.dst & kIndexMask;
        if ((c.dst >> kKindShift) == 0) {
            ws[index] = r;
        } else {
            regs[index] = r;
        }
    }
}

void Interpreter::load_inputs(const NamedVectors& inputs, std::span<double> arena) const {
    if (static_cast<int>(arena.size()) != arena_size_)
        throw std::invalid_argument("arena has " + std::to_string(arena.size()) + " slots, program needs " +
                                    std::to_string(arena_size_));
    std::fill(arena.begin(), arena.end(), 0.0);
    for (const auto& [name, values] : inputs) {
        const IoSegment* seg = nullptr;
        for (const auto& s : inputs_)
            if (s.name == name) seg = &s;
        if (!seg) throw std::invalid_argument("program has no input '" + name + "'");
        if (static_cast<int>(values.size()) != seg->extent)
            throw std::invalid_argument("input '" + name + "' has " + std::to_string(values.size()) +
                                        " values, expected " + std::to_string(seg->extent));
        std::copy(values.begin(), values.end(), arena.begin() + seg->offset);
    }
    for (const auto& s : inputs_) {
        if (inputs.count(s.name)) continue;
        if (s.name == "fext_flag") {
            if (inputs.count("fext")) arena[s.offset] = 1.0;
        } else if (s.name != "fext") {
            throw std::invalid_argument("missing input '" + s.name + "'");
        }
    }
}

void Interpreter::execute(std::span<double> arena, int threads) const {
    if (threads < 1) throw std::invalid_argument("thread count must be positive");
    if (static_cast<int>(arena.size()) != arena_size_) throw std::invalid_argument("arena size mismatch");
    double* ws = arena.data();
    if (threads == 1) {
        std::vector<double> regs(static_cast<size_t>(std::max(max_regs_, 1)));
        for (const Item& item : items_) run_item(item, ws, regs.data());
        return;
    }

    std::vector<std::atomic<std::uint32_t>> next(phases_.size());
    for (size_t p = 0; p < phases_.size(); ++p) next[p].store(phases_[p].begin, std::memory_order_relaxed);
    std::barrier sync(threads);
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex error_mutex;

    auto worker = [&] {
        std::vector<double> regs(static_cast<size_t>(std::max(max_regs_, 1)));
        for (size_t p = 0; p < phases_.size(); ++p) {
            const std::uint32_t end = phases_[p].end;
            while (!failed.load(std::memory_order_relaxed)) {
                const std::uint32_t k = next[p].fetch_add(1, std::memory_order_relaxed);
                if (k >= end) break;
                try {
                    run_item(items_[k], ws, regs.data());
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                    failed.store(true);
                }
            }
            sync.arrive_and_wait();
        }
    };
    std::vector<std::jthread> pool;
    pool.reserve(static_cast<size_t>(threads - 1));
    for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    pool.clear();
    if (error) std::rethrow_exception(error);
}

NamedVectors Interpreter::read_outputs(std::span<const double> arena) const {
    NamedVectors out;
    for (const auto& s : outputs_)
        out[s.name].assign(arena.begin() + s.offset, arena.begin() + s.offset + s.extent);
    return out;
}

NamedVectors Interpreter::run(const NamedVectors& inputs, int threads) const {
    std::vector<double> arena(static_cast<size_t>(arena_size_));
    load_inputs(inputs, arena);
    execute(arena, threads);
    return read_outputs(arena);
}

NamedVectors interpret(const KernelProgram& program, const NamedVectors& inputs, int thread_count) {
    return Interpreter(program).run(inputs, thread_count);
}

NamedVectors kernel_inputs(const KernelProgram& program, const JointState& state) {
    NamedVectors in;
    auto put = [&](const char* name, const VectorXd& x) {
        if (program.find_input(name)) in[name].assign(x.data(), x.data() + x.size());
    };
    put("q", state.q);
    put("qd", state.qd);
    put("qdd", state.u);
    put("tau", state.u);
    if (state.f_ext && program.find_input("fext")) {
        std::vector<double>& f = in["fext"];
        for (const auto& w : *state.f_ext) f.insert(f.end(), w.c.begin(), w.c.end());
        in["fext_flag"] = {1.0};
    }
    return in;
}

}  // namespace rbdkit
