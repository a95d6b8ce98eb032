#include "rbdkit/kernel_ir.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <tuple>
#include <unordered_map>

namespace rbdkit {

namespace {

constexpr std::array<std::string_view, 11> kOpNames{"load_const", "mov", "add", "sub",   "mul",   "fma",
                                                     "neg",        "sin", "cos", "recip", "select"};
constexpr std::array<int, 11> kArity{1, 1, 2, 2, 2, 3, 1, 1, 1, 1, 3};

constexpr std::string_view kMagic = "rbdkit-kernel";
constexpr int kFormatVersion = 1;

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string operand_text(const Operand& o) {
    switch (o.kind) {
        case OperandKind::arena: return "a" + std::to_string(o.index);
        case OperandKind::reg: return "r" + std::to_string(o.index);
        case OperandKind::imm: return "#" + format_double(o.imm);
        case OperandKind::none: return "_";
    }
    return "_";
}

[[noreturn]] void parse_error(int line, const std::string& what) {
    throw std::invalid_argument("kernel text line " + std::to_string(line) + ": " + what);
}

Operand parse_operand(const std::string& tok, int line) {
    if (tok == "_") return {};
    if (tok.size() < 2) parse_error(line, "bad operand '" + tok + "'");
    if (tok[0] == '#') {
        try {
            size_t used = 0;
            const double v = std::stod(tok.substr(1), &used);
            if (used != tok.size() - 1) parse_error(line, "bad immediate '" + tok + "'");
            return Operand::constant(v);
        } catch (const std::logic_error&) {
            parse_error(line, "bad immediate '" + tok + "'");
        }
    }
    std::uint32_t index = 0;
    const char* first = tok.data() + 1;
    const char* last = tok.data() + tok.size();
    const auto [ptr, ec] = std::from_chars(first, last, index);
    if (ec != std::errc() || ptr != last) parse_error(line, "bad operand '" + tok + "'");
    if (tok[0] == 'a') return Operand::arena(index);
    if (tok[0] == 'r') return Operand::reg(index);
    parse_error(line, "bad operand '" + tok + "'");
}

struct LineReader {
    std::istringstream in;
    int line = 0;

    explicit LineReader(std::string_view text) : in(std::string(text)) {}

    std::string next() {
        std::string s;
        while (std::getline(in, s)) {
            ++line;
            if (!s.empty()) return s;
        }
        parse_error(line, "unexpected end of input");
    }

    /// Reads "<key> <rest>" and returns rest.
    std::string field(std::string_view key) {
        const std::string s = next();
        if (s.compare(0, key.size(), key) != 0 || (s.size() > key.size() && s[key.size()] != ' '))
            parse_error(line, "expected '" + std::string(key) + "'");
        return s.size() > key.size() ? s.substr(key.size() + 1) : std::string();
    }

    long number(std::string_view key) {
        const std::string s = field(key);
        try {
            return std::stol(s);
        } catch (const std::logic_error&) {
            parse_error(line, "expected a number after '" + std::string(key) + "'");
        }
    }
};

void write_io(std::ostringstream& out, const char* key, const std::vector<IoSegment>& segs) {
    out << key << "s " << segs.size() << "\n";
    for (const auto& s : segs) out << key << " " << s.name << " " << s.offset << " " << s.extent << " " << s.stride << "\n";
}

std::vector<IoSegment> read_io(LineReader& r, const char* key) {
    const long count = r.number(std::string(key) + "s");
    std::vector<IoSegment> out;
    for (long k = 0; k < count; ++k) {
        std::istringstream fields(r.field(key));
        IoSegment s;
        if (!(fields >> s.name >> s.offset >> s.extent >> s.stride)) parse_error(r.line, "bad segment record");
        out.push_back(s);
    }
    return out;
}

}  // namespace

std::string_view to_string(Op op) { return kOpNames[static_cast<size_t>(op)]; }

Op parse_op(std::string_view name) {
    for (size_t k = 0; k < kOpNames.size(); ++k)
        if (kOpNames[k] == name) return static_cast<Op>(k);
    throw std::invalid_argument("unknown opcode '" + std::string(name) + "'");
}

int arity(Op op) { return kArity[static_cast<size_t>(op)]; }

bool is_control_flow(Op) { return false; }

bool Operand::operator==(const Operand& o) const {
    if (kind != o.kind) return false;
    if (kind == OperandKind::imm) return std::bit_cast<std::uint64_t>(imm) == std::bit_cast<std::uint64_t>(o.imm);
    return kind == OperandKind::none || index == o.index;
}

long KernelProgram::instruction_count() const {
    long n = 0;
    for (const auto& p : phases)
        for (const auto& it : p.items) n += static_cast<long>(it.instrs.size());
    return n;
}

int KernelProgram::max_items_per_phase() const {
    size_t n = 0;
    for (const auto& p : phases) n = std::max(n, p.items.size());
    return static_cast<int>(n);
}

int KernelProgram::max_registers() const {
    int n = 0;
    for (const auto& p : phases)
        for (const auto& it : p.items) n = std::max(n, it.n_regs);
    return n;
}

const IoSegment* KernelProgram::find_input(std::string_view name) const {
    for (const auto& s : inputs)
        if (s.name == name) return &s;
    return nullptr;
}

const IoSegment* KernelProgram::find_output(std::string_view name) const {
    for (const auto& s : outputs)
        if (s.name == name) return &s;
    return nullptr;
}

RaceReport check_races(const KernelProgram& program) {
    RaceReport report;
    for (size_t p = 0; p < program.phases.size(); ++p) {
        const auto& items = program.phases[p].items;
        std::unordered_map<std::uint32_t, int> writer;
        std::set<std::tuple<std::uint32_t, int, int>> seen;
        auto report_once = [&](std::uint32_t slot, int w, int other, bool writes) {
            if (seen.insert({slot, w, other}).second)
                report.violations.push_back({static_cast<int>(p), static_cast<int>(slot), w, other, writes});
        };
        for (size_t k = 0; k < items.size(); ++k) {
            for (const auto& ins : items[k].instrs) {
                if (ins.dst.kind != OperandKind::arena) continue;
                auto [it, fresh] = writer.emplace(ins.dst.index, static_cast<int>(k));
                if (!fresh && it->second != static_cast<int>(k)) report_once(ins.dst.index, it->second, static_cast<int>(k), true);
            }
        }
        for (size_t k = 0; k < items.size(); ++k) {
            for (const auto& ins : items[k].instrs) {
                for (int s = 0; s < arity(ins.op); ++s) {
                    if (ins.src[s].kind != OperandKind::arena) continue;
                    auto it = writer.find(ins.src[s].index);
                    if (it != writer.end() && it->second != static_cast<int>(k))
                        report_once(ins.src[s].index, it->second, static_cast<int>(k), false);
                }
            }
        }
    }
    return report;
}

long count_control_flow(const KernelProgram& program) {
    long n = 0;
    for (const auto& p : program.phases)
        for (const auto& it : p.items)
            for (const auto& ins : it.instrs) n += is_control_flow(ins.op) ? 1 : 0;
    return n;
}

void validate_program(const KernelProgram& program) {
    auto fail = [](const std::string& what) { throw std::invalid_argument("invalid kernel program: " + what); };
    if (program.n_dof <= 0) fail("no degrees of freedom");
    if (static_cast<int>(program.parent.size()) != program.n_dof) fail("parent table length differs from n_dof");
    for (int i = 0; i < program.n_dof; ++i)
        if (program.parent[i] >= i) fail("parent table is not topologically ordered");
    if (program.arena_size <= 0) fail("empty arena");
    if (program.phases.empty()) fail("no phases");
    for (const auto* group : {&program.segments, &program.inputs, &program.outputs}) {
        for (const auto& s : *group) {
            if (s.offset < 0 || s.extent < 0 || s.offset + s.extent > program.arena_size)
                fail("segment '" + s.name + "' lies outside the arena");
        }
    }
    for (const auto& phase : program.phases) {
        for (const auto& item : phase.items) {
            if (item.n_regs < 0) fail("negative register count");
            auto check = [&](const Operand& o, bool is_dst) {
                switch (o.kind) {
                    case OperandKind::arena:
                        if (o.index >= static_cast<std::uint32_t>(program.arena_size))
                            fail("arena slot " + std::to_string(o.index) + " out of range in phase '" + phase.name + "'");
                        break;
                    case OperandKind::reg:
                        if (o.index >= static_cast<std::uint32_t>(item.n_regs))
                            fail("register " + std::to_string(o.index) + " out of range in phase '" + phase.name + "'");
                        break;
                    case OperandKind::imm:
                        if (is_dst) fail("immediate destination");
                        break;
                    case OperandKind::none: fail("missing operand");
                }
            };
            for (const auto& ins : item.instrs) {
                if (static_cast<size_t>(ins.op) >= kOpNames.size()) fail("unknown opcode");
                check(ins.dst, true);
                for (int s = 0; s < 3; ++s) {
                    if (s < arity(ins.op)) {
                        check(ins.src[s], false);
                    } else if (ins.src[s].kind != OperandKind::none) {
                        fail("extra operand on " + std::string(to_string(ins.op)));
                    }
                }
                if (ins.op == Op::load_const && ins.src[0].kind != OperandKind::imm) fail("load_const needs an immediate");
            }
        }
    }
}

std::string serialize(const KernelProgram& program) {
    std::ostringstream out;
    out << kMagic << " " << kFormatVersion << "\n";
    out << "model " << program.model_name << "\n";
    out << "algorithm " << to_string(program.algorithm) << "\n";
    out << "n_dof " << program.n_dof << "\n";
    out << "topology " << to_string(program.topology) << "\n";
    out << "fused_cross " << (program.fused_cross ? 1 : 0) << "\n";
    out << "dense_columns " << (program.dense_columns ? 1 : 0) << "\n";
    out << "arena " << program.arena_size << "\n";
    out << "parent";
    for (int p : program.parent) out << " " << p;
    out << "\n";
    write_io(out, "segment", program.segments);
    write_io(out, "input", program.inputs);
    write_io(out, "output", program.outputs);
    out << "phases " << program.phases.size() << "\n";
    for (const auto& phase : program.phases) {
        out << "phase " << phase.items.size() << " " << phase.name << "\n";
        for (const auto& item : phase.items) {
            out << "item " << item.frame << " " << item.column << " " << item.wrt << " " << item.n_regs << " "
                << item.instrs.size() << " " << item.tag << "\n";
            for (const auto& ins : item.instrs) {
                out << to_string(ins.op) << " " << operand_text(ins.dst);
                for (int s = 0; s < arity(ins.op); ++s) out << " " << operand_text(ins.src[s]);
                out << "\n";
            }
        }
    }
    out << "end\n";
    return out.str();
}

KernelProgram deserialize(std::string_view text) {
    LineReader r(text);
    KernelProgram program;
    {
        std::istringstream header(r.next());
        std::string magic;
        int version = 0;
        if (!(header >> magic >> version) || magic != kMagic) parse_error(r.line, "not a serialized kernel");
        if (version != kFormatVersion)
            parse_error(r.line, "unsupported kernel format version " + std::to_string(version));
    }
    program.model_name = r.field("model");
    program.algorithm = parse_algorithm(r.field("algorithm"));
    program.n_dof = static_cast<int>(r.number("n_dof"));
    const std::string topology = r.field("topology");
    if (topology == to_string(Topology::serial_chain)) {
        program.topology = Topology::serial_chain;
    } else if (topology == to_string(Topology::branched_tree)) {
        program.topology = Topology::branched_tree;
    } else {
        parse_error(r.line, "unknown topology '" + topology + "'");
    }
    program.fused_cross = r.number("fused_cross") != 0;
    program.dense_columns = r.number("dense_columns") != 0;
    program.arena_size = static_cast<int>(r.number("arena"));
    {
        std::istringstream fields(r.field("parent"));
        int p = 0;
        while (fields >> p) program.parent.push_back(p);
    }
    program.segments = read_io(r, "segment");
    program.inputs = read_io(r, "input");
    program.outputs = read_io(r, "output");
    const long n_phases = r.number("phases");
    for (long p = 0; p < n_phases; ++p) {
        Phase phase;
        const std::string header = r.field("phase");
        const size_t space = header.find(' ');
        const long n_items = std::stol(header.substr(0, space));
        phase.name = space == std::string::npos ? std::string() : header.substr(space + 1);
        for (long k = 0; k < n_items; ++k) {
            WorkItem item;
            std::istringstream fields(r.field("item"));
            long n_instrs = 0;
            if (!(fields >> item.frame >> item.column >> item.wrt >> item.n_regs >> n_instrs))
                parse_error(r.line, "bad item header");
            fields >> item.tag;
            item.instrs.reserve(static_cast<size_t>(n_instrs));
            for (long t = 0; t < n_instrs; ++t) {
                std::istringstream tokens(r.next());
                std::string op, dst;
                tokens >> op >> dst;
                Instr ins;
                try {
                    ins.op = parse_op(op);
                } catch (const std::invalid_argument& e) {
                    parse_error(r.line, e.what());
                }
                ins.dst = parse_operand(dst, r.line);
                for (int s = 0; s < arity(ins.op); ++s) {
                    std::string tok;
                    if (!(tokens >> tok)) parse_error(r.line, "missing operand");
                    ins.src[s] = parse_operand(tok, r.line);
                }
                item.instrs.push_back(ins);
            }
            phase.items.push_back(std::move(item));
        }
        program.phases.push_back(std::move(phase));
    }
    if (r.next() != "end") parse_error(r.line, "expected 'end'");
    validate_program(program);
    return program;
}

// ---------------------------------------------------------------------------
// Source emission
// ---------------------------------------------------------------------------

namespace {

struct SlotInfo {
    const IoSegment* segment = nullptr;
    int frame = -1;
    int offset = 0;
};

class SlotNamer {
  public:
    explicit SlotNamer(const KernelProgram& program) : program_(program) {
        for (const auto& s : program.segments) by_offset_[s.offset] = &s;
    }

    SlotInfo locate(std::uint32_t slot) const {
        auto it = by_offset_.upper_bound(static_cast<int>(slot));
        if (it == by_offset_.begin()) return {};
        --it;
        const IoSegment* s = it->second;
        const int rel = static_cast<int>(slot) - s->offset;
        if (rel >= s->extent) return {};
        if (s->stride > 0) return {s, rel / s->stride, rel % s->stride};
        return {s, -1, rel};
    }

    static std::string macro(const IoSegment& s) {
        std::string out = "SEG_";
        for (char c : s.name) out += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
        return out;
    }

    /// C expression for an arena slot relative to the item's frame variables.
    std::string c_slot(std::uint32_t slot, int frame) const {
        const SlotInfo info = locate(slot);
        if (!info.segment) return "ws[" + std::to_string(slot) + "]";
        const std::string base = macro(*info.segment);
        if (info.frame < 0) return "ws[" + base + " + " + std::to_string(info.offset) + "]";
        std::string index;
        const int parent = frame >= 0 ? program_.parent[frame] : -1;
        if (info.frame == frame) {
            index = "i";
        } else if (parent >= 0 && info.frame == parent) {
            index = "p";
        } else if (program_.topology == Topology::serial_chain && info.frame == frame + 1) {
            index = "i + 1";
        } else {
            index = std::to_string(info.frame);
        }
        return "ws[" + base + " + " + std::to_string(info.segment->stride) + " * (" + index + ") + " +
               std::to_string(info.offset) + "]";
    }

    std::string listing_slot(std::uint32_t slot) const {
        const SlotInfo info = locate(slot);
        if (!info.segment) return "?";
        if (info.frame < 0) return info.segment->name + "+" + std::to_string(info.offset);
        return info.segment->name + "[" + std::to_string(info.frame) + "]." + std::to_string(info.offset);
    }

  private:
    const KernelProgram& program_;
    std::map<int, const IoSegment*> by_offset_;
};

std::string c_operand(const Operand& o, const SlotNamer& namer, int frame) {
    switch (o.kind) {
        case OperandKind::arena: return namer.c_slot(o.index, frame);
        case OperandKind::reg: return "r[" + std::to_string(o.index) + "]";
        case OperandKind::imm: {
            std::string v = format_double(o.imm);
            if (v.find_first_of(".eni") == std::string::npos) v += ".0";
            return o.imm < 0 ? "(" + v + ")" : v;
        }
        case OperandKind::none: break;
    }
    return "0";
}

std::string c_expression(const Instr& ins, const SlotNamer& namer, int frame) {
    auto s = [&](int k) { return c_operand(ins.src[k], namer, frame); };
    switch (ins.op) {
        case Op::load_const:
        case Op::mov: return s(0);
        case Op::add: return s(0) + " + " + s(1);
        case Op::sub: return s(0) + " - " + s(1);
        case Op::mul: return s(0) + " * " + s(1);
        case Op::fma: return "RBD_FMA(" + s(0) + ", " + s(1) + ", " + s(2) + ")";
        case Op::neg: return "-" + s(0);
        case Op::sin: return "sin(" + s(0) + ")";
        case Op::cos: return "cos(" + s(0) + ")";
        case Op::recip: return "1.0 / " + s(0);
        case Op::select: return "RBD_SELECT(" + s(0) + ", " + s(1) + ", " + s(2) + ")";
    }
    return "0";
}

std::string emit_c(const KernelProgram& program) {
    const SlotNamer namer(program);
    const bool branched = program.topology == Topology::branched_tree;
    std::ostringstream out;
    out << "/* " << program.model_name << " " << to_string(program.algorithm) << ": " << program.phases.size()
        << " phases, " << program.instruction_count() << " instructions, arena " << program.arena_size
        << " slots */\n";
    out << "/* Build without floating-point contraction to reproduce the interpreter bit for bit. */\n";
    out << "#include <math.h>\n\n";
    out << "#define RBD_FMA(a, b, c) ((double)((a) * (b)) + (c))\n";
    out << "#define RBD_SELECT(f, a, b) ((f) * (a) + (1.0 - (f)) * (b))\n\n";
    out << "enum {\n";
    for (const auto& s : program.segments) out << "    " << SlotNamer::macro(s) << " = " << s.offset << ",\n";
    out << "    ARENA_SIZE = " << program.arena_size << "\n};\n\n";
    if (branched) {
        out << "static const int kParent[" << program.n_dof << "] = {";
        for (int i = 0; i < program.n_dof; ++i) out << (i ? ", " : "") << program.parent[i];
        out << "};\n\n";
    }
    out << "typedef void (*rbd_work_item)(double* ws);\n\n";
    for (size_t p = 0; p < program.phases.size(); ++p) {
        const Phase& phase = program.phases[p];
        for (size_t k = 0; k < phase.items.size(); ++k) {
            const WorkItem& item = phase.items[k];
            out << "/* " << phase.name << ": " << item.tag;
            if (item.frame >= 0) out << " frame " << item.frame;
            if (item.column >= 0) out << " column " << item.column;
            if (item.wrt >= 0) out << (item.wrt == 0 ? " wrt q" : " wrt qd");
            out << " */\n";
            out << "static void phase" << p << "_item" << k << "(double* ws) {\n";
            if (item.frame >= 0) {
                out << "    const int i = " << item.frame << ";\n";
                if (program.parent[item.frame] >= 0) {
                    out << "    const int p = " << (branched ? "kParent[i]" : "i - 1") << ";\n";
                    out << "    (void)p;\n";
                }
                out << "    (void)i;\n";
            }
            if (item.n_regs > 0) out << "    double r[" << item.n_regs << "];\n";
            for (const auto& ins : item.instrs) {
                const std::string dst = ins.dst.kind == OperandKind::reg ? c_operand(ins.dst, namer, item.frame)
                                                                         : namer.c_slot(ins.dst.index, item.frame);
                out << "    " << dst << " = " << c_expression(ins, namer, item.frame) << ";\n";
            }
            out << "}\n\n";
        }
        out << "static const rbd_work_item kPhase" << p << "[] = {";
        for (size_t k = 0; k < phase.items.size(); ++k) out << (k ? ", " : "") << "phase" << p << "_item" << k;
        if (phase.items.empty()) out << "0";
        out << "};\n\n";
    }
    out << "/* Phases in order; every item of a phase may run concurrently, phases are separated by barriers. */\n";
    out << "static const struct { const rbd_work_item* items; int count; } kPhases[" << program.phases.size()
        << "] = {\n";
    for (size_t p = 0; p < program.phases.size(); ++p)
        out << "    {kPhase" << p << ", " << program.phases[p].items.size() << "},\n";
    out << "};\n\n";
    out << "void rbd_kernel_serial(double* ws) {\n";
    out << "    for (int p = 0; p < " << program.phases.size() << "; ++p)\n";
    out << "        for (int k = 0; k < kPhases[p].count; ++k) kPhases[p].items[k](ws);\n";
    out << "}\n";
    return out.str();
}

std::string emit_listing(const KernelProgram& program) {
    const SlotNamer namer(program);
    std::ostringstream out;
    out << "; kernel " << program.model_name << " " << to_string(program.algorithm) << "\n";
    out << "; " << program.n_dof << " dof, " << to_string(program.topology) << ", arena " << program.arena_size
        << " slots, " << (program.fused_cross ? "fused" : "materialized") << " cross products, "
        << (program.dense_columns ? "dense" : "compressed") << " columns\n";
    for (const auto& s : program.segments) {
        out << ";   segment " << s.name << " @" << s.offset << " extent " << s.extent;
        if (s.stride > 0) out << " stride " << s.stride;
        out << "\n";
    }
    for (size_t p = 0; p < program.phases.size(); ++p) {
        const Phase& phase = program.phases[p];
        out << "\nphase " << p << " \"" << phase.name << "\" ; " << phase.items.size() << " items\n";
        for (size_t k = 0; k < phase.items.size(); ++k) {
            const WorkItem& item = phase.items[k];
            out << "  item " << k << " ; " << item.tag;
            if (item.frame >= 0) out << " frame " << item.frame;
            if (item.column >= 0) out << " column " << item.column;
            if (item.wrt >= 0) out << (item.wrt == 0 ? " wrt q" : " wrt qd");
            out << ", " << item.n_regs << " registers\n";
            for (size_t t = 0; t < item.instrs.size(); ++t) {
                const Instr& ins = item.instrs[t];
                std::string line = "    " + std::to_string(t) + ": " + std::string(to_string(ins.op)) + " " +
                                   operand_text(ins.dst);
                std::string note;
                auto annotate = [&](const Operand& o) {
                    if (o.kind != OperandKind::arena) return;
                    note += (note.empty() ? "" : ", ") + operand_text(o) + " = " + namer.listing_slot(o.index);
                };
                annotate(ins.dst);
                for (int s = 0; s < arity(ins.op); ++s) {
                    line += " " + operand_text(ins.src[s]);
                    annotate(ins.src[s]);
                }
                if (!note.empty()) {
                    if (line.size() < 48) line.resize(48, ' ');
                    line += " ; " + note;
                }
                out << line << "\n";
            }
        }
        out << "barrier\n";
    }
    return out.str();
}

}  // namespace

std::string emit_source(const KernelProgram& program, Dialect dialect) {
    return dialect == Dialect::portable_c ? emit_c(program) : emit_listing(program);
}

}  // namespace rbdkit
