#pragma once

// Kernel generation: unrolls an algorithm over a robot's level schedule into
// a barrier-phased KernelProgram with all offsets resolved.

#include <cstdint>

#include "rbdkit/kernel_ir.hpp"
#include "rbdkit/schedule.hpp"
#include "rbdkit/urdf_model.hpp"

namespace rbdkit {

struct GenerateOptions {
    /// Permutes the frames of every level before emitting work items.
    bool shuffle_levels = false;
    std::uint64_t shuffle_seed = 0;
};

/// Throws std::invalid_argument when the schedule, column map or layout was
/// built for another model or algorithm.
KernelProgram generate_kernel(const RobotModel& model, Algorithm algorithm, const LevelSchedule& schedule,
                              const ColumnMap& columns, const WorkspaceLayout& layout,
                              const GenerateOptions& options = {});

struct KernelConfig {
    long budget = kDefaultBudget;
    bool dense_columns = false;
    GenerateOptions options;
};

/// Schedule, sparsity analysis, layout planning and generation in one call.
KernelProgram build_kernel(const RobotModel& model, Algorithm algorithm, const KernelConfig& config = {});

}  // namespace rbdkit
