#pragma once

// Symbolic scalar used to trace the templated spatial algebra into IR.
//
// Each arithmetic operation on Sym appends a node to the work item currently
// being built (see ItemScope). Only exact identities are folded (constant
// arithmetic, x+0, x*0, x*1, x*-1, 0-x, -(-x)), so a traced computation
// rounds exactly like the same code run on doubles.

#include <cstdint>
#include <unordered_map>
#include <vector>

#include "rbdkit/kernel_ir.hpp"

namespace rbdkit::gen {

class Sym {
  public:
    Sym() = default;
    Sym(double c) : c_(c) {}  // NOLINT: implicit by design

    static Sym node(int id) {
        Sym s;
        s.id_ = id;
        return s;
    }

    bool is_const() const { return id_ < 0; }
    double value() const { return c_; }
    int id() const { return id_; }

  private:
    int id_ = -1;
    double c_ = 0.0;
};

Sym operator+(const Sym& a, const Sym& b);
Sym operator-(const Sym& a, const Sym& b);
Sym operator*(const Sym& a, const Sym& b);
Sym operator-(const Sym& a);
Sym recip(const Sym& a);
Sym sin(const Sym& a);
Sym cos(const Sym& a);
/// flag*a + (1-flag)*b
Sym select(const Sym& flag, const Sym& a, const Sym& b);

/// Records one work item. Stores to a slot may happen once per item; loads
/// after a store see the stored value.
class ItemBuilder {
  public:
    Sym load(int slot);
    void store(int slot, const Sym& value);
    Sym apply(Op op, const Sym& a, const Sym& b = Sym(), const Sym& c = Sym());

    /// Runs per-item CSE results through fma fusion, dead-code elimination
    /// and register allocation, and emits the instruction list.
    void finish(WorkItem& item);

    static ItemBuilder& current();

  private:
    friend class ItemScope;

    struct Node {
        bool is_read = false;
        int slot = -1;
        Op op = Op::mov;
        Sym src[3];
        int nsrc = 0;
        int event = -1;
        int stale_at = -1;
    };
    struct Event {
        int node = -1;
        int slot = -1;
        Sym value;
    };
    struct Key {
        std::uint64_t w[7];
        bool operator==(const Key& o) const;
    };
    struct KeyHash {
        std::size_t operator()(const Key& k) const;
    };

    Sym fold(Op op, const Sym& a, const Sym& b, const Sym& c);
    void check_fresh(const Sym& s) const;

    std::vector<Node> nodes_;
    std::vector<Event> events_;
    std::unordered_map<Key, int, KeyHash> cse_;
    std::unordered_map<int, int> read_cache_;
    std::unordered_map<int, Sym> stored_;
};

/// Makes a builder current for the calling thread.
class ItemScope {
  public:
    explicit ItemScope(ItemBuilder& builder);
    ~ItemScope();
    ItemScope(const ItemScope&) = delete;
    ItemScope& operator=(const ItemScope&) = delete;

  private:
    ItemBuilder* previous_;
};

}  // namespace rbdkit::gen
