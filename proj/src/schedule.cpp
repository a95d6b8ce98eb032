#include "rbdkit/schedule.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include <nlohmann/json.hpp>

namespace rbdkit {

namespace {

constexpr int kXformSlots = 12;
constexpr int kCrossSlots = 36;

std::string lower(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

bool related(const RobotModel& model, int frame, int column) {
    return model.is_ancestor_or_self(column, frame) || model.is_ancestor_or_self(frame, column);
}

enum class Retention { ancestors, related, subtree, all };

ColumnSet make_set(const RobotModel& model, std::string name, Retention rule) {
    const int n = model.n_frames;
    ColumnSet set;
    set.name = std::move(name);
    set.columns.resize(static_cast<size_t>(n));
    set.index.assign(static_cast<size_t>(n), std::vector<int>(static_cast<size_t>(n), -1));
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            bool keep = false;
            switch (rule) {
                case Retention::ancestors: keep = model.is_ancestor_or_self(j, i); break;
                case Retention::related: keep = related(model, i, j); break;
                case Retention::subtree: keep = model.is_ancestor_or_self(i, j); break;
                case Retention::all: keep = true; break;
            }
            if (!keep) continue;
            set.columns[i].push_back(j);
            set.index[i][j] = set.count++;
        }
    }
    return set;
}

ColumnMap build_columns(const RobotModel& model, Algorithm algorithm, bool dense) {
    ColumnMap map;
    map.algorithm = algorithm;
    map.dense = dense;
    map.n_frames = model.n_frames;
    auto rule = [&](Retention r) { return dense ? Retention::all : r; };
    if (algorithm == Algorithm::minv || algorithm == Algorithm::fd || algorithm == Algorithm::grad_fd) {
        map.sets.push_back(make_set(model, "minv_F", rule(Retention::subtree)));
    }
    if (is_gradient(algorithm)) {
        for (const char* wrt : {"dq", "dqd"}) {
            map.sets.push_back(make_set(model, std::string("dv_") + wrt, rule(Retention::ancestors)));
            map.sets.push_back(make_set(model, std::string("da_") + wrt, rule(Retention::ancestors)));
            map.sets.push_back(make_set(model, std::string("df_") + wrt, rule(Retention::related)));
        }
    }
    return map;
}

class LayoutBuilder {
  public:
    void add(std::string name, SegmentRole role, int extent, int stride = 0) {
        segments_.push_back({std::move(name), role, static_cast<int>(size_), extent, stride});
        size_ += extent;
    }
    long size() const { return size_; }
    std::vector<Segment> take() { return std::move(segments_); }

  private:
    std::vector<Segment> segments_;
    long size_ = 0;
};

std::vector<Segment> build_segments(const RobotModel& model, Algorithm algorithm, const ColumnMap& columns,
                                    bool materialize_cross, long* total) {
    const int n = model.n_frames;
    LayoutBuilder b;
    const bool minv_parts = algorithm == Algorithm::minv || algorithm == Algorithm::fd || algorithm == Algorithm::grad_fd;
    const bool rnea_parts = algorithm != Algorithm::minv;

    b.add("q", SegmentRole::input, n, 1);
    if (rnea_parts) {
        b.add("qd", SegmentRole::input, n, 1);
        const bool takes_tau = algorithm == Algorithm::fd || algorithm == Algorithm::grad_fd;
        b.add(takes_tau ? "tau" : "qdd", SegmentRole::input, n, 1);
        b.add("fext", SegmentRole::input, 6 * n, 6);
        b.add("fext_flag", SegmentRole::input, 1);
    }

    b.add("xform", SegmentRole::temporary, kXformSlots * n, kXformSlots);
    if (rnea_parts) {
        b.add("v", SegmentRole::temporary, 6 * n, 6);
        b.add("a", SegmentRole::temporary, 6 * n, 6);
        b.add("f", SegmentRole::temporary, 6 * n, 6);
    }
    if (is_gradient(algorithm) && materialize_cross) b.add("vcross", SegmentRole::temporary, kCrossSlots * n, kCrossSlots);
    if (minv_parts) {
        b.add("minv_U", SegmentRole::temporary, 6 * n, 6);
        b.add("minv_Dinv", SegmentRole::temporary, n, 1);
        b.add("minv_Ia", SegmentRole::temporary, 36 * n, 36);
        b.add("minv_F", SegmentRole::temporary, 6 * columns.set("minv_F").count);
        b.add("minv_A", SegmentRole::temporary, 6 * (n * (n - 1) / 2));
        b.add("minv_packed", SegmentRole::temporary, n * (n + 1) / 2);
    }
    if (algorithm == Algorithm::fd || algorithm == Algorithm::grad_fd) b.add("bias", SegmentRole::temporary, n, 1);
    if (algorithm == Algorithm::grad_fd) b.add("qdd", SegmentRole::temporary, n, 1);
    if (is_gradient(algorithm)) {
        for (const char* name : {"dv_dq", "da_dq", "df_dq", "dv_dqd", "da_dqd", "df_dqd"}) {
            b.add(name, SegmentRole::temporary, 6 * columns.set(name).count);
        }
        if (materialize_cross) {
            b.add("dvcross_dq", SegmentRole::temporary, kCrossSlots * columns.set("dv_dq").count);
            b.add("dvcross_dqd", SegmentRole::temporary, kCrossSlots * columns.set("dv_dqd").count);
        }
    }
    if (algorithm == Algorithm::grad_fd) {
        b.add("dtau_dq", SegmentRole::temporary, n * n);
        b.add("dtau_dqd", SegmentRole::temporary, n * n);
    }

    switch (algorithm) {
        case Algorithm::id: b.add("tau", SegmentRole::output, n, 1); break;
        case Algorithm::minv: b.add("minv", SegmentRole::output, n * n); break;
        case Algorithm::fd: b.add("qdd", SegmentRole::output, n, 1); break;
        case Algorithm::grad_id:
            b.add("dtau_dq", SegmentRole::output, n * n);
            b.add("dtau_dqd", SegmentRole::output, n * n);
            break;
        case Algorithm::grad_fd:
            b.add("dqdd_dq", SegmentRole::output, n * n);
            b.add("dqdd_dqd", SegmentRole::output, n * n);
            break;
    }
    *total = b.size();
    return b.take();
}

void check_columns(const RobotModel& model, Algorithm algorithm, const ColumnMap& columns) {
    if (columns.algorithm != algorithm || columns.n_frames != model.n_frames) {
        throw std::invalid_argument("column map was built for a different model or algorithm");
    }
}

}  // namespace

std::string_view to_string(Algorithm algorithm) {
    switch (algorithm) {
        case Algorithm::id: return "ID";
        case Algorithm::minv: return "Minv";
        case Algorithm::fd: return "FD";
        case Algorithm::grad_id: return "gradID";
        case Algorithm::grad_fd: return "gradFD";
    }
    return "?";
}

Algorithm parse_algorithm(std::string_view name) {
    const std::string key = lower(name);
    for (Algorithm a : all_algorithms()) {
        if (lower(to_string(a)) == key) return a;
    }
    throw std::invalid_argument("unknown algorithm '" + std::string(name) + "' (expected ID, Minv, FD, gradID, gradFD)");
}

const std::vector<Algorithm>& all_algorithms() {
    static const std::vector<Algorithm> all = {Algorithm::id, Algorithm::minv, Algorithm::fd, Algorithm::grad_id,
                                               Algorithm::grad_fd};
    return all;
}

bool is_gradient(Algorithm algorithm) { return algorithm == Algorithm::grad_id || algorithm == Algorithm::grad_fd; }

LevelSchedule build_levels(const RobotModel& model) {
    LevelSchedule s;
    s.level_of = model.depths();
    for (int i = 0; i < model.n_frames; ++i) {
        const int d = s.level_of[i];
        if (d >= s.depth()) s.levels.resize(static_cast<size_t>(d) + 1);
        s.levels[d].push_back(i);
    }
    return s;
}

std::vector<int> level_order(const LevelSchedule& schedule) {
    std::vector<int> out;
    for (const auto& level : schedule.levels) out.insert(out.end(), level.begin(), level.end());
    return out;
}

const ColumnSet& ColumnMap::set(std::string_view name) const {
    if (const ColumnSet* s = find(name)) return *s;
    throw std::out_of_range("column map has no temporary '" + std::string(name) + "'");
}

const ColumnSet* ColumnMap::find(std::string_view name) const {
    for (const auto& s : sets) {
        if (s.name == name) return &s;
    }
    return nullptr;
}

long ColumnMap::retained() const {
    long total = 0;
    for (const auto& s : sets) total += s.count;
    return total;
}

long ColumnMap::dense_total() const { return static_cast<long>(sets.size()) * n_frames * n_frames; }

double ColumnMap::retained_fraction() const {
    const long dense = dense_total();
    return dense == 0 ? 1.0 : static_cast<double>(retained()) / static_cast<double>(dense);
}

ColumnMap analyze_sparsity(const RobotModel& model, Algorithm algorithm) { return build_columns(model, algorithm, false); }

ColumnMap dense_columns(const RobotModel& model, Algorithm algorithm) { return build_columns(model, algorithm, true); }

std::string_view to_string(SegmentRole role) {
    switch (role) {
        case SegmentRole::input: return "input";
        case SegmentRole::temporary: return "temporary";
        case SegmentRole::output: return "output";
    }
    return "?";
}

InfeasibleBudgetError::InfeasibleBudgetError(long budget, long floor)
    : std::runtime_error("budget of " + std::to_string(budget) + " scalar slots is below the feasible floor of " +
                         std::to_string(floor)),
      floor_(floor) {}

const Segment& WorkspaceLayout::segment(std::string_view name) const {
    if (const Segment* s = find(name)) return *s;
    throw std::out_of_range("layout has no segment '" + std::string(name) + "'");
}

const Segment* WorkspaceLayout::find(std::string_view name) const {
    for (const auto& s : segments) {
        if (s.name == name) return &s;
    }
    return nullptr;
}

LayoutSizes layout_sizes(const RobotModel& model, Algorithm algorithm, const ColumnMap& columns) {
    check_columns(model, algorithm, columns);
    LayoutSizes sizes;
    build_segments(model, algorithm, columns, true, &sizes.full);
    build_segments(model, algorithm, columns, false, &sizes.reduced);
    return sizes;
}

WorkspaceLayout plan_workspace(const RobotModel& model, Algorithm algorithm, const ColumnMap& columns, long budget) {
    const LayoutSizes sizes = layout_sizes(model, algorithm, columns);
    if (budget < sizes.reduced) throw InfeasibleBudgetError(budget, sizes.reduced);
    WorkspaceLayout layout;
    layout.algorithm = algorithm;
    layout.n_frames = model.n_frames;
    layout.dense_columns = columns.dense;
    layout.budget = budget;
    layout.fused_cross = is_gradient(algorithm) && sizes.full > budget;
    layout.segments = build_segments(model, algorithm, columns, !layout.fused_cross, &layout.total_size);
    return layout;
}

std::string dump_schedule_text(const RobotModel& model, const LevelSchedule& schedule, const ColumnMap& columns,
                               const WorkspaceLayout& layout) {
    std::ostringstream out;
    out << "model " << model.name << " (" << model.n_dof << " dof, " << to_string(classify_topology(model)) << ")\n";
    out << "algorithm " << to_string(layout.algorithm) << "\n";
    out << "levels " << schedule.depth() << "\n";
    for (int k = 0; k < schedule.depth(); ++k) {
        out << "  level " << k << ":";
        for (int f : schedule.levels[k]) out << ' ' << f;
        out << '\n';
    }
    out << "columns " << (columns.dense ? "dense" : "compressed") << " retained " << columns.retained() << " of "
        << columns.dense_total() << "\n";
    for (const auto& s : columns.sets) out << "  " << s.name << ": " << s.count << "\n";
    out << "layout total " << layout.total_size << " budget " << layout.budget
        << " fused_cross " << (layout.fused_cross ? "true" : "false") << "\n";
    for (const auto& s : layout.segments) {
        out << "  " << s.name << " [" << to_string(s.role) << "] offset " << s.offset << " extent " << s.extent;
        if (s.stride > 0) out << " stride " << s.stride;
        out << '\n';
    }
    return out.str();
}

std::string dump_schedule_json(const RobotModel& model, const LevelSchedule& schedule, const ColumnMap& columns,
                               const WorkspaceLayout& layout) {
    nlohmann::json records = nlohmann::json::array();
    records.push_back({{"record", "summary"},
                       {"model", model.name},
                       {"n_dof", model.n_dof},
                       {"topology", to_string(classify_topology(model))},
                       {"algorithm", to_string(layout.algorithm)},
                       {"total_size", layout.total_size},
                       {"budget", layout.budget},
                       {"fused_cross", layout.fused_cross},
                       {"dense_columns", columns.dense},
                       {"retained_columns", columns.retained()},
                       {"dense_columns_total", columns.dense_total()}});
    for (int k = 0; k < schedule.depth(); ++k) {
        records.push_back({{"record", "level"}, {"level", k}, {"frames", schedule.levels[k]}});
    }
    for (const auto& s : columns.sets) {
        records.push_back({{"record", "columns"}, {"temporary", s.name}, {"retained", s.count}, {"columns", s.columns}});
    }
    for (const auto& s : layout.segments) {
        records.push_back({{"record", "segment"},
                           {"name", s.name},
                           {"role", to_string(s.role)},
                           {"offset", s.offset},
                           {"extent", s.extent},
                           {"stride", s.stride}});
    }
    return records.dump(2) + "\n";
}

}  // namespace rbdkit
