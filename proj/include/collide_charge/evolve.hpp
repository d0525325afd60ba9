#pragma once

// Repeated collisions: deterministic evolution of the population vector
// and Monte Carlo realisations of the underlying level chain.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

#include "collide_charge/core.hpp"
#include "collide_charge/rng.hpp"
#include "collide_charge/transition.hpp"

namespace collide_charge {

// p'_k = sum_m T_km p_m. Mass pushed above the truncation is added to
// the leaked mass.
BatteryDistribution apply_step(const TransitionMatrix& t, const BatteryDistribution& p);

struct TrajectoryRecord {
    std::size_t step = 0;
    double mean_energy = 0.0;
    double ergotropy = 0.0;
    double leaked_mass = 0.0;
};

struct Snapshot {
    std::size_t step = 0;
    std::vector<double> probs;
};

struct Trajectory {
    std::vector<TrajectoryRecord> records;  // steps 0..m
    std::vector<Snapshot> snapshots;
    std::size_t clamp_count = 0;            // negative rounding residues zeroed
    std::size_t final_truncation = 0;
    BatteryDistribution final_state = BatteryDistribution::delta(1, 1);
};

struct EvolveOptions {
    std::size_t snapshot_every = 0;          // 0: no periodic snapshots
    std::vector<std::size_t> snapshot_at;    // extra explicit steps
    double leakage_budget = 1e-9;
};

// Throws TruncationOverflow when the leaked mass exceeds the budget.
Trajectory evolve(const TransitionMatrix& t, const BatteryDistribution& p0, std::size_t steps,
                  const EvolveOptions& options = {});

using TransitionFactory = std::function<TransitionMatrix(std::size_t n_levels)>;

struct AutoGrowOptions {
    double top_fraction = 0.01;     // share of levels watched at the top
    double trigger_mass = 1e-12;    // doubling threshold for that share
    std::size_t max_levels = std::size_t{1} << 22;
};

// Like evolve, but rebuilds T at twice the truncation whenever the top
// levels start to fill. For chains that drift upward without bound.
Trajectory evolve_autogrow(const TransitionFactory& factory, const BatteryDistribution& p0,
                           std::size_t steps, const EvolveOptions& options = {},
                           const AutoGrowOptions& grow = {});

// Trajectory CSV: step,mean_energy,ergotropy,leaked_mass
void write_trajectory_csv(std::ostream& os, const Trajectory& traj);
// Snapshot CSV: step,level,prob
void write_snapshots_csv(std::ostream& os, const Trajectory& traj);

enum class PathStatus { Completed, EdgeReached };

struct PathSample {
    std::vector<std::size_t> levels;  // k_0, k_1, ...
    std::uint64_t seed = 0;
    PathStatus status = PathStatus::Completed;
};

// One jump from `level` drawn from column `level` of T. Empty when the
// draw falls into the column's truncation deficit.
std::optional<std::size_t> draw_next_level(const TransitionMatrix& t, std::size_t level,
                                           SplitMix64& rng);

PathSample sample_path(const TransitionMatrix& t, std::size_t start_level, std::size_t horizon,
                       std::uint64_t seed);

}  // namespace collide_charge
