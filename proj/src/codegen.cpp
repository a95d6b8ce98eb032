#include "rbdkit/codegen.hpp"

#include <algorithm>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>

#include "rbdkit/refdyn.hpp"
#include "rbdkit/spatial.hpp"
#include "sym.hpp"

namespace rbdkit {

namespace {

using gen::ItemBuilder;
using gen::ItemScope;
using gen::Sym;
using SV = spatial::SpatialVector<Sym>;
using SX = spatial::Transform<Sym>;
using SM = spatial::Matrix6<Sym>;
using PhaseList = std::vector<Phase>;

enum class QddSource { zero, arena };

std::string level_name(const std::string& pass, int level) { return pass + " L" + std::to_string(level); }

/// Phase-wise union; the shorter list is padded with nothing.
PhaseList zip(PhaseList a, PhaseList b) {
    PhaseList out(std::max(a.size(), b.size()));
    for (size_t t = 0; t < out.size(); ++t) {
        std::vector<std::string> names;
        for (PhaseList* src : {&a, &b}) {
            if (t >= src->size()) continue;
            Phase& p = (*src)[t];
            names.push_back(p.name);
            for (auto& item : p.items) out[t].items.push_back(std::move(item));
        }
        out[t].name = names[0];
        for (size_t k = 1; k < names.size(); ++k) out[t].name += " | " + names[k];
    }
    return out;
}

void append(PhaseList& dst, PhaseList src) {
    for (auto& p : src) dst.push_back(std::move(p));
}

class Generator {
  public:
    Generator(const RobotModel& model, Algorithm algorithm, const LevelSchedule& schedule, const ColumnMap& columns,
              const WorkspaceLayout& layout, const GenerateOptions& options)
        : model_(model), alg_(algorithm), columns_(columns), layout_(layout), n_(model.n_frames) {
        levels_ = schedule.levels;
        if (options.shuffle_levels) {
            std::mt19937_64 rng(options.shuffle_seed);
            for (auto& level : levels_) std::shuffle(level.begin(), level.end(), rng);
        }
        children_ = model.children();
        for (auto& c : children_) std::sort(c.rbegin(), c.rend());
        for (int i = 0; i < n_; ++i) {
            S_.push_back(spatial::motion_subspace(model.joints[i]));
            I_.push_back(spatial::spatial_inertia(model.inertias[i]));
        }
        a0_ = gravity_acceleration(model);
    }

    PhaseList run();

  private:
    // ---- slot addressing -------------------------------------------------
    int seg(const char* name) const { return layout_.segment(name).offset; }
    int at(const char* name, int frame, int k = 0) const {
        const Segment& s = layout_.segment(name);
        return s.offset + s.stride * frame + k;
    }
    int col_slot(const char* name, int frame, int column, int k = 0) const {
        return seg(name) + 6 * columns_.set(name).index[frame][column] + k;
    }
    bool retained(const char* name, int frame, int column) const {
        return columns_.set(name).retained(frame, column);
    }
    int cross_slot(const char* seg_name, const char* set_name, int frame, int column, int r, int c) const {
        return seg(seg_name) + 36 * columns_.set(set_name).index[frame][column] + 6 * r + c;
    }

    // ---- symbolic access (inside an item) ----------------------------------
    static ItemBuilder& b() { return ItemBuilder::current(); }
    static Sym load(int slot) { return b().load(slot); }
    static void store(int slot, const Sym& v) { b().store(slot, v); }
    static SV load_vec(int base) {
        SV v;
        for (int k = 0; k < 6; ++k) v[k] = load(base + k);
        return v;
    }
    static void store_vec(int base, const SV& v) {
        for (int k = 0; k < 6; ++k) store(base + k, v[k]);
    }
    SX load_xform(int frame) const {
        SX X;
        const int base = at("xform", frame);
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) X.E[r][c] = load(base + 3 * r + c);
        for (int k = 0; k < 3; ++k) X.r[k] = load(base + 9 + k);
        return X;
    }
    SV S(int frame) const { return spatial::convert<Sym>(S_[frame]); }
    SM I(int frame) const { return spatial::convert<Sym>(I_[frame]); }
    SV zero() const { return SV{}; }
    /// Entries of crm(v_i) from the materialized matrix.
    SM load_cross(int base) const {
        SM m;
        for (int r = 0; r < 6; ++r)
            for (int c = 0; c < 6; ++c)
                m[r][c] = spatial::kMotionCrossPattern[r][c] ? load(base + 6 * r + c) : Sym(0.0);
        return m;
    }
    static void store_cross(int base, const SM& m) {
        for (int r = 0; r < 6; ++r)
            for (int c = 0; c < 6; ++c)
                if (spatial::kMotionCrossPattern[r][c]) store(base + 6 * r + c, m[r][c]);
    }
    bool has_children(int frame) const { return !children_[frame].empty(); }
    int packed(int i, int j) const { return seg("minv_packed") + packed_upper(n_, std::min(i, j), std::max(i, j)); }
    int packed_a(int i, int j, int k) const { return seg("minv_A") + 6 * packed_strict_upper(n_, i, j) + k; }

    template <class Fn>
    WorkItem item(const char* tag, int frame, int column, int wrt, Fn&& body) const {
        ItemBuilder builder;
        {
            ItemScope scope(builder);
            body();
        }
        WorkItem w;
        w.tag = tag;
        w.frame = frame;
        w.column = column;
        w.wrt = wrt;
        builder.finish(w);
        return w;
    }

    // ---- passes ----------------------------------------------------------
    Phase setup();
    PhaseList rnea_fwd(const std::string& pass, QddSource qdd, bool reuse_v, bool store_vcross);
    PhaseList rnea_bwd(const std::string& pass);
    Phase tau_output();
    PhaseList minv_bwd();
    PhaseList minv_fwd();
    Phase minv_output();
    Phase bias();
    Phase solve_qdd(const char* dst);
    PhaseList grad_fwd();
    PhaseList grad_bwd();
    Phase dqdd_output();

    const RobotModel& model_;
    Algorithm alg_;
    const ColumnMap& columns_;
    const WorkspaceLayout& layout_;
    int n_;
    std::vector<std::vector<int>> levels_;
    std::vector<std::vector<int>> children_;
    std::vector<spatial::SpatialVec> S_;
    std::vector<spatial::SpatialInertia> I_;
    spatial::SpatialVec a0_;
};


Phase Generator::setup() {
    Phase phase{"setup", {}};
    for (const auto& level : levels_) {
        for (int i : level) {
            phase.items.push_back(item("xform", i, -1, -1, [&] {
                const JointSpec& joint = model_.joints[i];
                const Sym q = load(at("q", i));
                const bool revolute = joint.kind == JointKind::revolute;
                const Sym s = revolute ? gen::sin(q) : Sym(0.0);
                const Sym c = revolute ? gen::cos(q) : Sym(0.0);
                const SX X = spatial::xform_from_joint<Sym>(joint, q, s, c);
                const int base = at("xform", i);
                for (int r = 0; r < 3; ++r)
                    for (int k = 0; k < 3; ++k) store(base + 3 * r + k, X.E[r][k]);
                for (int k = 0; k < 3; ++k) store(base + 9 + k, X.r[k]);
            }));
        }
    }
    return phase;
}

PhaseList Generator::rnea_fwd(const std::string& pass, QddSource qdd_source, bool reuse_v, bool store_vcross) {
    PhaseList phases;
    for (size_t k = 0; k < levels_.size(); ++k) {
        Phase phase{level_name(pass, static_cast<int>(k)), {}};
        for (int i : levels_[k]) {
            phase.items.push_back(item("rnea_fwd", i, -1, -1, [&] {
                const int p = model_.parent[i];
                const SX X = load_xform(i);
                const SM I = this->I(i);
                const SV s_qd = spatial::scale(S_[i], load(at("qd", i)));
                SV v;
                if (reuse_v) {
                    v = load_vec(at("v", i));
                } else {
                    v = p < 0 ? s_qd : spatial::apply_motion(X, load_vec(at("v", p))) + s_qd;
                }
                const SV xa = spatial::apply_motion(X, p < 0 ? spatial::convert<Sym>(a0_) : load_vec(at("a", p)));
                const Sym qdd = qdd_source == QddSource::zero ? Sym(0.0) : load(at("qdd", i));
                const SV a = xa + spatial::scale(S_[i], qdd) + spatial::cross_motion(v, s_qd);
                SV f = spatial::mul(I, a) + spatial::cross_force(v, spatial::mul(I, v));
                const Sym flag = load(seg("fext_flag"));
                for (int c = 0; c < 6; ++c) f[c] = f[c] - gen::select(flag, load(at("fext", i, c)), Sym(0.0));
                if (!reuse_v) store_vec(at("v", i), v);
                store_vec(at("a", i), a);
                store_vec(at("f", i), f);
                if (store_vcross) store_cross(at("vcross", i), spatial::crm(v));
            }));
        }
        phases.push_back(std::move(phase));
    }
    return phases;
}

PhaseList Generator::rnea_bwd(const std::string& pass) {
    PhaseList phases;
    for (int k = static_cast<int>(levels_.size()) - 1; k >= 0; --k) {
        Phase phase{level_name(pass, k), {}};
        for (int i : levels_[k]) {
            if (!has_children(i)) continue;
            phase.items.push_back(item("rnea_bwd", i, -1, -1, [&] {
                SV f = load_vec(at("f", i));
                for (int c : children_[i]) f = f + spatial::apply_transpose(load_xform(c), load_vec(at("f", c)));
                store_vec(at("f", i), f);
            }));
        }
        phases.push_back(std::move(phase));
    }
    return phases;
}

Phase Generator::tau_output() {
    Phase phase{"output", {}};
    for (int i = 0; i < n_; ++i) {
        phase.items.push_back(item("tau", i, -1, -1, [&] {
            store(at("tau", i), spatial::dot(S(i), load_vec(at("f", i))));
        }));
    }
    return phase;
}

PhaseList Generator::minv_bwd() {
    const ColumnSet& fset = columns_.set("minv_F");
    const int depth = static_cast<int>(levels_.size());
    // Level k articulated inertias (a) precede level k unit-force columns (b),
    // which in turn feed level k-1 columns; a of level k-1 runs alongside b of
    // level k.
    auto phase_a = [&](int k) {
        Phase phase{level_name("minv_bwd_a", k), {}};
        for (int i : levels_[k]) {
            phase.items.push_back(item("minv_bwd_a", i, -1, -1, [&] {
                const int p = model_.parent[i];
                SM IA = I(i);
                for (int c : children_[i]) {
                    const int base = at("minv_Ia", c);
                    for (int r = 0; r < 6; ++r)
                        for (int q = 0; q < 6; ++q) IA[r][q] = IA[r][q] + load(base + 6 * r + q);
                }
                const SV Si = S(i);
                const SV U = spatial::mul(IA, Si);
                const Sym Dinv = gen::recip(spatial::dot(Si, U));
                store_vec(at("minv_U", i), U);
                store(at("minv_Dinv", i), Dinv);
                if (p < 0) return;
                SM Ia;
                for (int r = 0; r < 6; ++r)
                    for (int q = 0; q < 6; ++q) Ia[r][q] = IA[r][q] - U[r] * (Dinv * U[q]);
                const SM up = spatial::inertia_to_parent(load_xform(i), Ia);
                const int base = at("minv_Ia", i);
                for (int r = 0; r < 6; ++r)
                    for (int q = 0; q < 6; ++q) store(base + 6 * r + q, up[r][q]);
            }));
        }
        return phase;
    };
    auto phase_b = [&](int k) {
        Phase phase{level_name("minv_bwd_b", k), {}};
        for (int i : levels_[k]) {
            for (int j : fset.columns[i]) {
                if (j < i) continue;
                phase.items.push_back(item("minv_bwd_b", i, j, -1, [&] {
                    SV F;
                    for (int c : children_[i]) {
                        if (fset.retained(c, j))
                            F = F + spatial::apply_transpose(load_xform(c), load_vec(col_slot("minv_F", c, j)));
                    }
                    const Sym unit = j == i ? 1.0 : 0.0;
                    const Sym m = load(at("minv_Dinv", i)) * (unit - spatial::dot(S(i), F));
                    store(packed(i, j), m);
                    if (model_.parent[i] >= 0) {
                        F = F + spatial::scale(load_vec(at("minv_U", i)), m);
                        store_vec(col_slot("minv_F", i, j), F);
                    }
                }));
            }
        }
        return phase;
    };
    PhaseList phases;
    phases.push_back(phase_a(depth - 1));
    for (int k = depth - 1; k >= 1; --k) {
        PhaseList merged = zip({phase_a(k - 1)}, {phase_b(k)});
        phases.push_back(std::move(merged[0]));
    }
    phases.push_back(phase_b(0));
    return phases;
}

PhaseList Generator::minv_fwd() {
    const ColumnSet& fset = columns_.set("minv_F");
    PhaseList phases;
    for (size_t k = 0; k < levels_.size(); ++k) {
        Phase phase{level_name("minv_fwd", static_cast<int>(k)), {}};
        for (int i : levels_[k]) {
            for (int j = i; j < n_; ++j) {
                phase.items.push_back(item("minv_fwd", i, j, -1, [&] {
                    const int p = model_.parent[i];
                    Sym m = fset.retained(i, j) ? load(packed(i, j)) : Sym(0.0);
                    SV t;
                    if (p >= 0) {
                        SV Ap;
                        for (int c = 0; c < 6; ++c) Ap[c] = load(packed_a(p, j, c));
                        t = spatial::apply_motion(load_xform(i), Ap);
                        m = m - load(at("minv_Dinv", i)) * spatial::dot(load_vec(at("minv_U", i)), t);
                    }
                    store(packed(i, j), m);
                    if (j > i && has_children(i)) {
                        const SV A = p >= 0 ? spatial::scale(S_[i], m) + t : spatial::scale(S_[i], m);
                        for (int c = 0; c < 6; ++c) store(packed_a(i, j, c), A[c]);
                    }
                }));
            }
        }
        phases.push_back(std::move(phase));
    }
    return phases;
}

Phase Generator::minv_output() {
    Phase phase{"output", {}};
    const int base = seg("minv");
    for (int i = 0; i < n_; ++i) {
        phase.items.push_back(item("minv_out", i, -1, -1, [&] {
            for (int j = 0; j < n_; ++j) store(base + i * n_ + j, load(packed(i, j)));
        }));
    }
    return phase;
}

Phase Generator::bias() {
    Phase phase{"bias", {}};
    for (int i = 0; i < n_; ++i) {
        phase.items.push_back(item("bias", i, -1, -1, [&] {
            store(at("bias", i), spatial::dot(S(i), load_vec(at("f", i))));
        }));
    }
    return phase;
}

Phase Generator::solve_qdd(const char* name) {
    Phase phase{name, {}};
    for (int i = 0; i < n_; ++i) {
        phase.items.push_back(item("qdd", i, -1, -1, [&] {
            auto u = [&](int j) { return load(at("tau", j)) - load(at("bias", j)); };
            Sym acc = load(packed(i, 0)) * u(0);
            for (int j = 1; j < n_; ++j) acc = acc + load(packed(i, j)) * u(j);
            store(at("qdd", i), acc);
        }));
    }
    return phase;
}

PhaseList Generator::grad_fwd() {
    const bool fused = layout_.fused_cross;
    PhaseList phases;
    for (size_t k = 0; k < levels_.size(); ++k) {
        const int level = static_cast<int>(k);
        Phase dv_phase{level_name(fused ? "grad_fwd" : "grad_dv", level), {}};
        Phase daf_phase{level_name("grad_daf", level), {}};
        for (int i : levels_[k]) {
            for (int wrt = 0; wrt < 2; ++wrt) {
                const char* dv_name = wrt == 0 ? "dv_dq" : "dv_dqd";
                const char* da_name = wrt == 0 ? "da_dq" : "da_dqd";
                const char* df_name = wrt == 0 ? "df_dq" : "df_dqd";
                const char* cross_name = wrt == 0 ? "dvcross_dq" : "dvcross_dqd";
                for (int j : columns_.set(dv_name).columns[i]) {
                    const int p = model_.parent[i];
                    auto compute_dv = [&] {
                        SV dvj;
                        if (p >= 0 && retained(dv_name, p, j))
                            dvj = spatial::apply_motion(load_xform(i), load_vec(col_slot(dv_name, p, j)));
                        if (j == i) {
                            if (wrt == 0) {
                                if (p >= 0)
                                    dvj = dvj + spatial::cross_motion(
                                                    spatial::apply_motion(load_xform(i), load_vec(at("v", p))), S(i));
                            } else {
                                dvj = dvj + S(i);
                            }
                        }
                        return dvj;
                    };
                    auto compute_daf = [&](const SV& dvj, const SM& crm_dv, const SM& crm_v, const SV& v) {
                        const SM I = this->I(i);
                        const SV s_qd = spatial::scale(S_[i], load(at("qd", i)));
                        SV daj;
                        if (p >= 0 && retained(da_name, p, j))
                            daj = spatial::apply_motion(load_xform(i), load_vec(col_slot(da_name, p, j)));
                        daj = daj + spatial::crm_mul(crm_dv, s_qd);
                        if (j == i) {
                            if (wrt == 0) {
                                const SV ap = p >= 0 ? load_vec(at("a", p)) : spatial::convert<Sym>(a0_);
                                daj = daj + spatial::cross_motion(spatial::apply_motion(load_xform(i), ap), S(i));
                            } else {
                                daj = daj + spatial::crm_mul(crm_v, S(i));
                            }
                        }
                        const SV Iv = spatial::mul(I, v);
                        const SV df = spatial::mul(I, daj) + spatial::crf_mul(crm_dv, Iv) +
                                      spatial::crf_mul(crm_v, spatial::mul(I, dvj));
                        store_vec(col_slot(da_name, i, j), daj);
                        store_vec(col_slot(df_name, i, j), df);
                    };
                    if (fused) {
                        dv_phase.items.push_back(item("grad_fwd", i, j, wrt, [&] {
                            const SV dvj = compute_dv();
                            store_vec(col_slot(dv_name, i, j), dvj);
                            const SV v = load_vec(at("v", i));
                            compute_daf(dvj, spatial::crm(dvj), spatial::crm(v), v);
                        }));
                    } else {
                        const int cross_base = seg(cross_name) + 36 * columns_.set(dv_name).index[i][j];
                        dv_phase.items.push_back(item("grad_dv", i, j, wrt, [&] {
                            const SV dvj = compute_dv();
                            store_vec(col_slot(dv_name, i, j), dvj);
                            store_cross(cross_base, spatial::crm(dvj));
                        }));
                        daf_phase.items.push_back(item("grad_daf", i, j, wrt, [&] {
                            const SV dvj = load_vec(col_slot(dv_name, i, j));
                            compute_daf(dvj, load_cross(cross_base), load_cross(at("vcross", i)),
                                        load_vec(at("v", i)));
                        }));
                    }
                }
            }
        }
        phases.push_back(std::move(dv_phase));
        if (!fused) phases.push_back(std::move(daf_phase));
    }
    return phases;
}

PhaseList Generator::grad_bwd() {
    PhaseList phases;
    for (int k = static_cast<int>(levels_.size()) - 1; k >= 0; --k) {
        Phase phase{level_name("grad_bwd", k), {}};
        for (int i : levels_[k]) {
            for (int wrt = 0; wrt < 2; ++wrt) {
                const char* dv_name = wrt == 0 ? "dv_dq" : "dv_dqd";
                const char* df_name = wrt == 0 ? "df_dq" : "df_dqd";
                const int out = seg(wrt == 0 ? "dtau_dq" : "dtau_dqd");
                for (int j : columns_.set(df_name).columns[i]) {
                    phase.items.push_back(item("grad_bwd", i, j, wrt, [&] {
                        SV acc;
                        if (retained(dv_name, i, j)) acc = load_vec(col_slot(df_name, i, j));
                        for (int c : children_[i]) {
                            const SX Xc = load_xform(c);
                            if (retained(df_name, c, j))
                                acc = acc + spatial::apply_transpose(Xc, load_vec(col_slot(df_name, c, j)));
                            if (wrt == 0 && j == c)
                                acc = acc + spatial::apply_transpose(Xc, spatial::cross_force(S(c), load_vec(at("f", c))));
                        }
                        if (model_.parent[i] >= 0 && has_children(i)) store_vec(col_slot(df_name, i, j), acc);
                        store(out + i * n_ + j, spatial::dot(S(i), acc));
                    }));
                }
            }
        }
        phases.push_back(std::move(phase));
    }
    return phases;
}

Phase Generator::dqdd_output() {
    Phase phase{"output", {}};
    for (int i = 0; i < n_; ++i) {
        for (int wrt = 0; wrt < 2; ++wrt) {
            const char* df_name = wrt == 0 ? "df_dq" : "df_dqd";
            const int src = seg(wrt == 0 ? "dtau_dq" : "dtau_dqd");
            const int dst = seg(wrt == 0 ? "dqdd_dq" : "dqdd_dqd");
            phase.items.push_back(item("dqdd", i, -1, wrt, [&] {
                auto d = [&](int k, int j) { return retained(df_name, k, j) ? load(src + k * n_ + j) : Sym(0.0); };
                for (int j = 0; j < n_; ++j) {
                    Sym acc = load(packed(i, 0)) * d(0, j);
                    for (int k = 1; k < n_; ++k) acc = acc + load(packed(i, k)) * d(k, j);
                    store(dst + i * n_ + j, -acc);
                }
            }));
        }
    }
    return phase;
}

PhaseList Generator::run() {
    PhaseList phases;
    const bool full = is_gradient(alg_) && !layout_.fused_cross;
    switch (alg_) {
        case Algorithm::id:
            phases.push_back(setup());
            append(phases, rnea_fwd("rnea_fwd", QddSource::arena, false, false));
            append(phases, rnea_bwd("rnea_bwd"));
            phases.push_back(tau_output());
            break;
        case Algorithm::minv:
            phases.push_back(setup());
            append(phases, minv_bwd());
            append(phases, minv_fwd());
            phases.push_back(minv_output());
            break;
        case Algorithm::fd:
        case Algorithm::grad_fd:
            phases.push_back(setup());
            append(phases, zip(rnea_fwd("rnea_fwd", QddSource::zero, false, false), minv_bwd()));
            append(phases, zip(rnea_bwd("rnea_bwd"), minv_fwd()));
            phases.push_back(bias());
            phases.push_back(solve_qdd(alg_ == Algorithm::fd ? "output" : "qdd"));
            if (alg_ == Algorithm::fd) break;
            append(phases, rnea_fwd("rnea2_fwd", QddSource::arena, true, full));
            append(phases, zip(grad_fwd(), rnea_bwd("rnea2_bwd")));
            append(phases, grad_bwd());
            phases.push_back(dqdd_output());
            break;
        case Algorithm::grad_id:
            phases.push_back(setup());
            append(phases, rnea_fwd("rnea_fwd", QddSource::arena, false, full));
            append(phases, zip(grad_fwd(), rnea_bwd("rnea_bwd")));
            append(phases, grad_bwd());
            break;
    }
    return phases;
}

std::vector<IoSegment> io_segments(const WorkspaceLayout& layout, SegmentRole role, bool all) {
    std::vector<IoSegment> out;
    for (const auto& s : layout.segments) {
        if (all || s.role == role) out.push_back({s.name, s.offset, s.extent, s.stride});
    }
    return out;
}

}  // namespace

KernelProgram generate_kernel(const RobotModel& model, Algorithm algorithm, const LevelSchedule& schedule,
                              const ColumnMap& columns, const WorkspaceLayout& layout, const GenerateOptions& options) {
    if (static_cast<int>(schedule.level_of.size()) != model.n_frames)
        throw std::invalid_argument("level schedule does not match the model");
    if (columns.n_frames != model.n_frames || columns.algorithm != algorithm)
        throw std::invalid_argument("column map does not match the model and algorithm");
    if (layout.n_frames != model.n_frames || layout.algorithm != algorithm || layout.dense_columns != columns.dense)
        throw std::invalid_argument("workspace layout does not match the model, algorithm and column map");
    for (const auto& set : columns.sets) {
        const Segment* s = layout.find(set.name);
        if (s == nullptr || s->extent != 6 * set.count)
            throw std::invalid_argument("workspace layout does not match column set '" + set.name + "'");
    }

    Generator generator(model, algorithm, schedule, columns, layout, options);
    KernelProgram program;
    program.model_name = model.name;
    program.algorithm = algorithm;
    program.n_dof = model.n_dof;
    program.topology = classify_topology(model);
    program.parent = model.parent;
    program.fused_cross = layout.fused_cross;
    program.dense_columns = columns.dense;
    program.arena_size = static_cast<int>(layout.total_size);
    program.segments = io_segments(layout, SegmentRole::input, true);
    program.inputs = io_segments(layout, SegmentRole::input, false);
    program.outputs = io_segments(layout, SegmentRole::output, false);
    program.phases = generator.run();
    validate_program(program);
    return program;
}

KernelProgram build_kernel(const RobotModel& model, Algorithm algorithm, const KernelConfig& config) {
    const LevelSchedule schedule = build_levels(model);
    const ColumnMap columns =
        config.dense_columns ? dense_columns(model, algorithm) : analyze_sparsity(model, algorithm);
    const WorkspaceLayout layout = plan_workspace(model, algorithm, columns, config.budget);
    return generate_kernel(model, algorithm, schedule, columns, layout, config.options);
}

}  // namespace rbdkit
