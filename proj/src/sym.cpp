#include "sym.hpp"

#include <algorithm>
#include <bit>
#include <climits>
#include <cmath>
#include <stdexcept>
#include <string>

namespace rbdkit::gen {

namespace {

thread_local ItemBuilder* g_current = nullptr;

std::uint64_t encode(const Sym& s) {
    if (s.is_const()) return std::bit_cast<std::uint64_t>(s.value());
    return static_cast<std::uint64_t>(s.id());
}

bool is(const Sym& s, double v) { return s.is_const() && s.value() == v; }

bool commutative(Op op) { return op == Op::add || op == Op::mul; }

}  // namespace

bool ItemBuilder::Key::operator==(const Key& o) const {
    for (int k = 0; k < 7; ++k)
        if (w[k] != o.w[k]) return false;
    return true;
}

std::size_t ItemBuilder::KeyHash::operator()(const Key& k) const {
    std::uint64_t h = 1469598103934665603ull;
    for (std::uint64_t x : k.w) {
        h ^= x + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    }
    return static_cast<std::size_t>(h);
}

ItemBuilder& ItemBuilder::current() {
    if (!g_current) throw std::logic_error("symbolic arithmetic outside of a work item");
    return *g_current;
}

ItemScope::ItemScope(ItemBuilder& builder) : previous_(g_current) { g_current = &builder; }
ItemScope::~ItemScope() { g_current = previous_; }

Sym ItemBuilder::load(int slot) {
    if (auto it = stored_.find(slot); it != stored_.end()) return it->second;
    if (auto it = read_cache_.find(slot); it != read_cache_.end()) return Sym::node(it->second);
    Node n;
    n.is_read = true;
    n.slot = slot;
    nodes_.push_back(n);
    const int id = static_cast<int>(nodes_.size()) - 1;
    read_cache_[slot] = id;
    return Sym::node(id);
}

void ItemBuilder::store(int slot, const Sym& value) {
    check_fresh(value);
    if (!stored_.emplace(slot, value).second) {
        throw std::logic_error("work item stores slot " + std::to_string(slot) + " twice");
    }
    // Writing back the value just read from the same slot changes nothing.
    if (!value.is_const() && nodes_[value.id()].is_read && nodes_[value.id()].slot == slot) return;
    if (auto it = read_cache_.find(slot); it != read_cache_.end()) {
        nodes_[it->second].stale_at = static_cast<int>(events_.size());
        read_cache_.erase(it);
    }
    events_.push_back({-1, slot, value});
}

void ItemBuilder::check_fresh(const Sym& s) const {
    if (s.is_const()) return;
    const Node& n = nodes_[s.id()];
    if (n.is_read && n.stale_at >= 0) {
        throw std::logic_error("read of slot " + std::to_string(n.slot) + " used after the slot was overwritten");
    }
}

Sym ItemBuilder::fold(Op op, const Sym& a, const Sym& b, const Sym& c) {
    const bool all_const = a.is_const() && (arity(op) < 2 || b.is_const()) && (arity(op) < 3 || c.is_const());
    switch (op) {
        case Op::add:
            if (all_const) return a.value() + b.value();
            if (is(a, 0.0)) return b;
            if (is(b, 0.0)) return a;
            break;
        case Op::sub:
            if (all_const) return a.value() - b.value();
            if (is(b, 0.0)) return a;
            if (is(a, 0.0)) return apply(Op::neg, b);
            break;
        case Op::mul:
            if (all_const) return a.value() * b.value();
            if (is(a, 0.0) || is(b, 0.0)) return 0.0;
            if (is(a, 1.0)) return b;
            if (is(b, 1.0)) return a;
            if (is(a, -1.0)) return apply(Op::neg, b);
            if (is(b, -1.0)) return apply(Op::neg, a);
            break;
        case Op::neg:
            if (all_const) return -a.value();
            if (!nodes_[a.id()].is_read && nodes_[a.id()].op == Op::neg) return nodes_[a.id()].src[0];
            break;
        case Op::sin:
            if (all_const) return std::sin(a.value());
            break;
        case Op::cos:
            if (all_const) return std::cos(a.value());
            break;
        case Op::recip:
            if (all_const) return 1.0 / a.value();
            break;
        case Op::select:
            if (all_const) return a.value() * b.value() + (1.0 - a.value()) * c.value();
            break;
        case Op::fma:
            if (all_const) return a.value() * b.value() + c.value();
            break;
        case Op::load_const:
        case Op::mov:
            break;
    }
    return Sym::node(-2);
}

Sym ItemBuilder::apply(Op op, const Sym& a, const Sym& b, const Sym& c) {
    const Sym folded = fold(op, a, b, c);
    if (folded.id() != -2) return folded;

    const int nsrc = arity(op);
    Sym src[3] = {a, b, c};
    for (int k = 0; k < nsrc; ++k) check_fresh(src[k]);
    if (commutative(op)) {
        const auto ka = std::make_pair(src[0].is_const(), encode(src[0]));
        const auto kb = std::make_pair(src[1].is_const(), encode(src[1]));
        if (kb < ka) std::swap(src[0], src[1]);
    }
    Key key{};
    key.w[0] = static_cast<std::uint64_t>(op);
    for (int k = 0; k < nsrc; ++k) {
        key.w[1 + 2 * k] = src[k].is_const() ? 1 : 2;
        key.w[2 + 2 * k] = encode(src[k]);
    }
    if (auto it = cse_.find(key); it != cse_.end()) return Sym::node(it->second);

    Node n;
    n.op = op;
    n.nsrc = nsrc;
    for (int k = 0; k < nsrc; ++k) n.src[k] = src[k];
    n.event = static_cast<int>(events_.size());
    nodes_.push_back(n);
    const int id = static_cast<int>(nodes_.size()) - 1;
    events_.push_back({id, -1, Sym()});
    cse_.emplace(key, id);
    return Sym::node(id);
}

void ItemBuilder::finish(WorkItem& item) {
    const int n_nodes = static_cast<int>(nodes_.size());
    std::vector<char> alive(static_cast<size_t>(n_nodes), 0);
    std::vector<int> uses(static_cast<size_t>(n_nodes), 0);

    auto mark_alive = [&]() {
        std::fill(alive.begin(), alive.end(), 0);
        std::fill(uses.begin(), uses.end(), 0);
        for (const Event& e : events_) {
            if (e.node < 0 && !e.value.is_const()) {
                alive[e.value.id()] = 1;
                ++uses[e.value.id()];
            }
        }
        for (int id = n_nodes - 1; id >= 0; --id) {
            if (!alive[id] || nodes_[id].is_read) continue;
            for (int k = 0; k < nodes_[id].nsrc; ++k) {
                const Sym& s = nodes_[id].src[k];
                if (s.is_const()) continue;
                alive[s.id()] = 1;
                ++uses[s.id()];
            }
        }
    };
    mark_alive();

    // Fuse a single-use product into the sum consuming it.
    for (int id = 0; id < n_nodes; ++id) {
        Node& add = nodes_[id];
        if (!alive[id] || add.is_read || add.op != Op::add) continue;
        for (int k = 0; k < 2; ++k) {
            const Sym& s = add.src[k];
            if (s.is_const()) continue;
            const Node& m = nodes_[s.id()];
            if (m.is_read || m.op != Op::mul || uses[s.id()] != 1) continue;
            bool valid = true;
            for (int j = 0; j < 2; ++j) {
                const Sym& ms = m.src[j];
                if (ms.is_const()) continue;
                const Node& r = nodes_[ms.id()];
                if (r.is_read && r.stale_at >= 0 && r.stale_at <= add.event) valid = false;
            }
            if (!valid) continue;
            const Sym other = add.src[1 - k];
            const Sym m0 = m.src[0], m1 = m.src[1];
            add.op = Op::fma;
            add.nsrc = 3;
            add.src[0] = m0;
            add.src[1] = m1;
            add.src[2] = other;
            uses[s.id()] = 0;
            alive[s.id()] = 0;
            break;
        }
    }
    mark_alive();

    // Sequence of emitted entries: live instructions and stores.
    struct Entry {
        int node = -1;
        int slot = -1;
        Sym value;
    };
    std::vector<Entry> seq;
    std::vector<int> pos_of(static_cast<size_t>(n_nodes), -1);
    for (const Event& e : events_) {
        if (e.node >= 0) {
            if (!alive[e.node]) continue;
            pos_of[e.node] = static_cast<int>(seq.size());
            seq.push_back({e.node, -1, Sym()});
        } else {
            seq.push_back({-1, e.slot, e.value});
        }
    }

    auto for_each_operand = [&](const Entry& en, auto&& fn) {
        if (en.node >= 0) {
            const Node& n = nodes_[en.node];
            for (int k = 0; k < n.nsrc; ++k) fn(n.src[k]);
        } else {
            fn(en.value);
        }
    };

    std::vector<int> last_use(static_cast<size_t>(n_nodes), -1);
    std::unordered_map<int, int> slot_last_read;
    for (int p = 0; p < static_cast<int>(seq.size()); ++p) {
        for_each_operand(seq[p], [&](const Sym& s) {
            if (s.is_const()) return;
            last_use[s.id()] = p;
            if (nodes_[s.id()].is_read) {
                int& lr = slot_last_read[nodes_[s.id()].slot];
                lr = std::max(lr, p);
            }
        });
    }

    // Let an instruction write its stored slot directly when no earlier read
    // of that slot is still pending.
    std::vector<int> home(static_cast<size_t>(n_nodes), -1);
    std::vector<char> elided(seq.size(), 0);
    for (int p = 0; p < static_cast<int>(seq.size()); ++p) {
        const Entry& en = seq[p];
        if (en.node >= 0 || en.value.is_const()) continue;
        const int id = en.value.id();
        if (nodes_[id].is_read || home[id] >= 0) continue;
        auto it = slot_last_read.find(en.slot);
        const int pending = it == slot_last_read.end() ? -1 : it->second;
        if (pending > pos_of[id]) continue;
        home[id] = en.slot;
        elided[p] = 1;
    }
    // Uses by elided stores do not keep a register alive.
    std::fill(last_use.begin(), last_use.end(), -1);
    for (int p = 0; p < static_cast<int>(seq.size()); ++p) {
        if (elided[p]) continue;
        for_each_operand(seq[p], [&](const Sym& s) {
            if (!s.is_const()) last_use[s.id()] = p;
        });
    }

    std::vector<int> reg_of(static_cast<size_t>(n_nodes), -1);
    std::vector<int> free_regs;
    int n_regs = 0;
    auto operand = [&](const Sym& s) -> Operand {
        if (s.is_const()) return Operand::constant(s.value());
        const Node& n = nodes_[s.id()];
        if (n.is_read) return Operand::arena(static_cast<std::uint32_t>(n.slot));
        if (home[s.id()] >= 0) return Operand::arena(static_cast<std::uint32_t>(home[s.id()]));
        return Operand::reg(static_cast<std::uint32_t>(reg_of[s.id()]));
    };

    item.instrs.clear();
    for (int p = 0; p < static_cast<int>(seq.size()); ++p) {
        if (elided[p]) continue;
        const Entry& en = seq[p];
        Instr ins;
        if (en.node >= 0) {
            const Node& n = nodes_[en.node];
            ins.op = n.op;
            for (int k = 0; k < n.nsrc; ++k) ins.src[k] = operand(n.src[k]);
        } else if (en.value.is_const()) {
            ins.op = Op::load_const;
            ins.src[0] = Operand::constant(en.value.value());
        } else {
            ins.op = Op::mov;
            ins.src[0] = operand(en.value);
        }
        // Registers whose last use is this instruction become free before
        // the destination is assigned; operands are read before the write.
        for_each_operand(en, [&](const Sym& s) {
            if (s.is_const()) return;
            const int id = s.id();
            if (reg_of[id] >= 0 && last_use[id] == p) {
                free_regs.push_back(reg_of[id]);
                reg_of[id] = -1 - reg_of[id];
            }
        });
        if (en.node >= 0) {
            const int id = en.node;
            if (home[id] >= 0) {
                ins.dst = Operand::arena(static_cast<std::uint32_t>(home[id]));
            } else {
                int r;
                if (!free_regs.empty()) {
                    r = free_regs.back();
                    free_regs.pop_back();
                } else {
                    r = n_regs++;
                }
                reg_of[id] = r;
                ins.dst = Operand::reg(static_cast<std::uint32_t>(r));
            }
        } else {
            ins.dst = Operand::arena(static_cast<std::uint32_t>(en.slot));
        }
        item.instrs.push_back(ins);
    }
    item.n_regs = n_regs;
}

Sym operator+(const Sym& a, const Sym& b) {
    if (a.is_const() && b.is_const()) return a.value() + b.value();
    return ItemBuilder::current().apply(Op::add, a, b);
}

Sym operator-(const Sym& a, const Sym& b) {
    if (a.is_const() && b.is_const()) return a.value() - b.value();
    return ItemBuilder::current().apply(Op::sub, a, b);
}

Sym operator*(const Sym& a, const Sym& b) {
    if (a.is_const() && b.is_const()) return a.value() * b.value();
    if (is(a, 0.0) || is(b, 0.0)) return 0.0;
    return ItemBuilder::current().apply(Op::mul, a, b);
}

Sym operator-(const Sym& a) {
    if (a.is_const()) return -a.value();
    return ItemBuilder::current().apply(Op::neg, a);
}

Sym recip(const Sym& a) {
    if (a.is_const()) return 1.0 / a.value();
    return ItemBuilder::current().apply(Op::recip, a);
}

Sym sin(const Sym& a) {
    if (a.is_const()) return std::sin(a.value());
    return ItemBuilder::current().apply(Op::sin, a);
}

Sym cos(const Sym& a) {
    if (a.is_const()) return std::cos(a.value());
    return ItemBuilder::current().apply(Op::cos, a);
}

Sym select(const Sym& flag, const Sym& a, const Sym& b) {
    return ItemBuilder::current().apply(Op::select, flag, a, b);
}

}  // namespace rbdkit::gen
