#pragma once

// Topology analysis feeding the code generator: breadth-first level
// partitioning, structural zero-column analysis of per-frame column
// temporaries, and the flat workspace layout with generation-time offsets.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "rbdkit/urdf_model.hpp"

namespace rbdkit {

enum class Algorithm { id, minv, fd, grad_id, grad_fd };

/// "ID", "Minv", "FD", "gradID", "gradFD".
std::string_view to_string(Algorithm algorithm);
/// Accepts the names above, case-insensitively.
Algorithm parse_algorithm(std::string_view name);
const std::vector<Algorithm>& all_algorithms();
bool is_gradient(Algorithm algorithm);

struct LevelSchedule {
    /// levels[k] lists the frames at depth k, ascending.
    std::vector<std::vector<int>> levels;
    std::vector<int> level_of;

    int depth() const { return static_cast<int>(levels.size()); }
};

LevelSchedule build_levels(const RobotModel& model);

/// Frame order visiting levels root to leaves.
std::vector<int> level_order(const LevelSchedule& schedule);

/// Retained columns of one per-frame column temporary.
struct ColumnSet {
    std::string name;
    /// columns[frame]: retained column indices, ascending.
    std::vector<std::vector<int>> columns;
    /// index[frame][column]: compressed position, or -1 when dropped.
    std::vector<std::vector<int>> index;
    int count = 0;

    bool retained(int frame, int column) const { return index[frame][column] >= 0; }
};

/// Per-temporary retained (frame, column) pairs. Dropped columns are zero
/// for every input.
///
/// Temporaries: dv_*, da_* keep ancestor-or-self columns; df_* keeps
/// ancestor-or-self and descendant columns (force columns pick up descendant
/// entries during accumulation toward the base); minv_F keeps subtree
/// columns.
struct ColumnMap {
    Algorithm algorithm = Algorithm::id;
    bool dense = false;
    int n_frames = 0;
    std::vector<ColumnSet> sets;

    const ColumnSet& set(std::string_view name) const;
    const ColumnSet* find(std::string_view name) const;
    long retained() const;
    long dense_total() const;
    /// retained / dense_total; 1 when there are no column temporaries.
    double retained_fraction() const;
};

ColumnMap analyze_sparsity(const RobotModel& model, Algorithm algorithm);
/// Same temporaries with every column retained.
ColumnMap dense_columns(const RobotModel& model, Algorithm algorithm);

enum class SegmentRole { input, temporary, output };
std::string_view to_string(SegmentRole role);

struct Segment {
    std::string name;
    SegmentRole role = SegmentRole::temporary;
    int offset = 0;
    int extent = 0;
    /// Slots per frame for per-frame uniform segments, 0 otherwise.
    int stride = 0;
};

/// Default budget in scalar slots: 96 KiB of 4-byte scalars, the per-block
/// shared-memory ceiling of current consumer GPUs.
inline constexpr long kDefaultBudget = 96 * 1024 / 4;

/// Budget below the smallest layout the algorithm admits.
class InfeasibleBudgetError : public std::runtime_error {
  public:
    InfeasibleBudgetError(long budget, long floor);
    long floor() const { return floor_; }

  private:
    long floor_;
};

struct WorkspaceLayout {
    Algorithm algorithm = Algorithm::id;
    int n_frames = 0;
    bool dense_columns = false;
    /// Cross-product matrices of v and of every dv column are not
    /// materialized; consumers evaluate the sparse products in place.
    bool fused_cross = false;
    long total_size = 0;
    long budget = 0;
    std::vector<Segment> segments;

    const Segment& segment(std::string_view name) const;
    const Segment* find(std::string_view name) const;
};

/// Size of the full (materialized cross products) and reduced layouts.
struct LayoutSizes {
    long full = 0;
    long reduced = 0;
};

LayoutSizes layout_sizes(const RobotModel& model, Algorithm algorithm, const ColumnMap& columns);

/// Full layout when it fits the budget, otherwise the reduced layout;
/// throws InfeasibleBudgetError when neither fits.
WorkspaceLayout plan_workspace(const RobotModel& model, Algorithm algorithm, const ColumnMap& columns,
                               long budget = kDefaultBudget);

/// Packed upper-triangle index of (i, j), i <= j.
inline int packed_upper(int n, int i, int j) { return i * n - i * (i - 1) / 2 + (j - i); }
/// Packed strictly-upper index of (i, j), i < j.
inline int packed_strict_upper(int n, int i, int j) { return i * (n - 1) - i * (i - 1) / 2 + (j - i - 1); }

std::string dump_schedule_text(const RobotModel& model, const LevelSchedule& schedule, const ColumnMap& columns,
                               const WorkspaceLayout& layout);
/// JSON array with one record per level, column set and segment.
std::string dump_schedule_json(const RobotModel& model, const LevelSchedule& schedule, const ColumnMap& columns,
                               const WorkspaceLayout& layout);

}  // namespace rbdkit
