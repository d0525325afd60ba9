#include "collide_charge/evolve.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <set>

#include "collide_charge/errors.hpp"

namespace collide_charge {

namespace {

struct StepOutcome {
    double leaked = 0.0;
    std::size_t clamped = 0;
};

StepOutcome step_into(const TransitionMatrix& t, const std::vector<double>& in,
                      std::vector<double>& out) {
    const std::size_t n = t.size();
    const std::size_t reach = t.reach();
    std::fill(out.begin(), out.end(), 0.0);
    StepOutcome outcome;
    for (std::size_t m = 1; m <= n; ++m) {
        const double w = in[m - 1];
        if (w == 0.0) continue;
        const auto band = t.column_band(m);
        // band[o] is the entry for level m - reach + o
        const std::size_t o_lo = m > reach ? 0 : reach + 1 - m;
        const std::size_t o_hi = std::min(band.size(), n + reach + 1 - m);
        double* dst = out.data() + (m + o_lo - reach - 1);
        for (std::size_t o = o_lo; o < o_hi; ++o) *dst++ += band[o] * w;
        if (m > t.interior_columns()) outcome.leaked += t.column_deficit(m) * w;
    }
    for (double& v : out) {
        if (v < 0.0) {
            v = 0.0;
            ++outcome.clamped;
        }
    }
    return outcome;
}

TrajectoryRecord record_of(std::size_t step, const std::vector<double>& probs, double leaked) {
    return {step, mean_energy(probs).value, ergotropy(probs).value, leaked};
}

class SnapshotSchedule {
public:
    explicit SnapshotSchedule(const EvolveOptions& o)
        : every_(o.snapshot_every), at_(o.snapshot_at.begin(), o.snapshot_at.end()) {}

    bool due(std::size_t step) const { return (every_ > 0 && step % every_ == 0) || at_.contains(step); }

private:
    std::size_t every_;
    std::set<std::size_t> at_;
};

// Shared loop; `regrow` may swap in a larger matrix between steps.
template <class Regrow>
Trajectory run(const TransitionMatrix& initial, const BatteryDistribution& p0, std::size_t steps,
               const EvolveOptions& options, Regrow&& regrow) {
    if (initial.size() != p0.size()) throw DimensionError("distribution and transition matrix sizes differ");
    const TransitionMatrix* t = &initial;
    TransitionMatrix grown = initial;
    const SnapshotSchedule schedule(options);

    std::vector<double> cur(p0.probs().begin(), p0.probs().end());
    std::vector<double> next(cur.size());
    double leaked = p0.leaked_mass();

    Trajectory traj;
    traj.records.reserve(steps + 1);
    traj.records.push_back(record_of(0, cur, leaked));
    if (schedule.due(0)) traj.snapshots.push_back({0, cur});

    for (std::size_t step = 1; step <= steps; ++step) {
        const StepOutcome o = step_into(*t, cur, next);
        cur.swap(next);
        leaked += o.leaked;
        traj.clamp_count += o.clamped;
        if (leaked > options.leakage_budget) throw TruncationOverflow(step, leaked);
        traj.records.push_back(record_of(step, cur, leaked));
        if (schedule.due(step)) traj.snapshots.push_back({step, cur});
        if (regrow(grown, cur)) {
            t = &grown;
            next.resize(cur.size());
        }
    }
    traj.final_truncation = cur.size();
    traj.final_state = BatteryDistribution::assume_valid(std::move(cur), leaked);
    return traj;
}

void write_double(std::ostream& os, double v) {
    if (v == 0.0) {
        os << '0';
    } else {
        os << v;
    }
}

}  // namespace

BatteryDistribution apply_step(const TransitionMatrix& t, const BatteryDistribution& p) {
    if (t.size() != p.size()) throw DimensionError("distribution and transition matrix sizes differ");
    std::vector<double> in(p.probs().begin(), p.probs().end());
    std::vector<double> out(in.size());
    const StepOutcome o = step_into(t, in, out);
    return BatteryDistribution::assume_valid(std::move(out), p.leaked_mass() + o.leaked);
}

Trajectory evolve(const TransitionMatrix& t, const BatteryDistribution& p0, std::size_t steps,
                  const EvolveOptions& options) {
    return run(t, p0, steps, options, [](TransitionMatrix&, std::vector<double>&) { return false; });
}

Trajectory evolve_autogrow(const TransitionFactory& factory, const BatteryDistribution& p0,
                           std::size_t steps, const EvolveOptions& options,
                           const AutoGrowOptions& grow) {
    const TransitionMatrix first = factory(p0.size());
    if (first.size() != p0.size()) throw DimensionError("factory returned a matrix of the wrong size");
    const std::size_t reach = first.reach();

    auto regrow = [&](TransitionMatrix& t, std::vector<double>& probs) {
        const std::size_t n = probs.size();
        const auto share = static_cast<std::size_t>(std::ceil(grow.top_fraction * static_cast<double>(n)));
        const std::size_t watch = std::min(n, std::max(share, 2 * reach));
        double top = 0.0;
        for (std::size_t i = n - watch; i < n; ++i) top += probs[i];
        if (top <= grow.trigger_mass) return false;
        const std::size_t bigger = 2 * n;
        if (bigger > grow.max_levels) return false;
        t = factory(bigger);
        if (t.size() != bigger) throw DimensionError("factory returned a matrix of the wrong size");
        probs.resize(bigger, 0.0);
        return true;
    };
    return run(first, p0, steps, options, regrow);
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
    const auto old = os.precision(17);
    os << "step,mean_energy,ergotropy,leaked_mass\n";
    for (const auto& r : traj.records) {
        os << r.step << ',';
        write_double(os, r.mean_energy);
        os << ',';
        write_double(os, r.ergotropy);
        os << ',';
        write_double(os, r.leaked_mass);
        os << '\n';
    }
    os.precision(old);
}

void write_snapshots_csv(std::ostream& os, const Trajectory& traj) {
    const auto old = os.precision(17);
    os << "step,level,prob\n";
    for (const auto& s : traj.snapshots) {
        for (std::size_t i = 0; i < s.probs.size(); ++i) {
            os << s.step << ',' << i + 1 << ',';
            write_double(os, s.probs[i]);
            os << '\n';
        }
    }
    os.precision(old);
}

std::optional<std::size_t> draw_next_level(const TransitionMatrix& t, std::size_t level,
                                           SplitMix64& rng) {
    const auto band = t.column_band(level);
    const std::size_t reach = t.reach();
    const double u = rng.uniform();
    double cum = 0.0;
    std::optional<std::size_t> last;
    for (std::size_t o = 0; o < band.size(); ++o) {
        if (band[o] <= 0.0) continue;
        const std::size_t k = level + o - reach;  // slots outside 1..N are zero
        cum += band[o];
        last = k;
        if (u < cum) return k;
    }
    // Rounding can leave an interior column a hair short of one.
    if (level <= t.interior_columns()) return last;
    return std::nullopt;
}

PathSample sample_path(const TransitionMatrix& t, std::size_t start_level, std::size_t horizon,
                       std::uint64_t seed) {
    if (start_level < 1 || start_level > t.size()) throw ValidationError("start level outside truncation");
    if (horizon < 1) throw ValidationError("horizon must be >= 1");
    SplitMix64 rng(seed);
    PathSample path;
    path.seed = seed;
    path.levels.reserve(horizon + 1);
    path.levels.push_back(start_level);
    std::size_t k = start_level;
    for (std::size_t step = 0; step < horizon; ++step) {
        const auto next = draw_next_level(t, k, rng);
        if (!next) {
            path.status = PathStatus::EdgeReached;
            break;
        }
        k = *next;
        path.levels.push_back(k);
    }
    return path;
}

}  // namespace collide_charge
