#pragma once

// Recurrence/transience analysis of charging chains.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "collide_charge/core.hpp"
#include "collide_charge/transition.hpp"

namespace collide_charge {

enum class ChainVerdict { Transient, PositiveRecurrent, NullRecurrent, Inconclusive };

std::string to_string(ChainVerdict v);

// One rung of the empirical horizon ladder.
struct HorizonEstimate {
    std::uint64_t horizon = 0;
    double return_probability = 0.0;
    double return_probability_halfwidth = 0.0;
    double mean_return_time = 0.0;  // among paths that returned
    std::uint64_t edge_count = 0;
};

struct ChainClass {
    ChainVerdict verdict = ChainVerdict::Inconclusive;
    bool analytic = false;
    std::string evidence;
    std::vector<HorizonEstimate> ladder;  // empty for analytic verdicts
    std::vector<std::pair<std::string, std::string>> settings;
};

// Strong connectivity of the retained levels under T_km > 0. This only
// speaks for the truncated chain.
bool check_irreducible(const TransitionMatrix& t);

// Positive f on levels 1..N with a finite exempt set A. Stored as f_1 and
// the successive ratios f_{k+1}/f_k so that functions growing far beyond
// the double range (f ~ (s1/s2)^k) stay exact in the comparisons that
// matter.
class LyapunovFunction {
public:
    static LyapunovFunction from_values(std::vector<double> values, std::vector<std::size_t> exempt);
    static LyapunovFunction from_ratios(double first, std::vector<double> ratios,
                                        std::vector<std::size_t> exempt);

    std::size_t size() const { return ratios_.size() + 1; }
    const std::vector<std::size_t>& exempt() const { return exempt_; }
    bool is_exempt(std::size_t level) const;

    // f_k / f_m
    double ratio(std::size_t k, std::size_t m) const;
    // log f_k
    double log_value(std::size_t k) const;
    // f_k; +inf once it leaves the double range
    double value(std::size_t k) const;

private:
    LyapunovFunction(double first, std::vector<double> ratios, std::vector<std::size_t> exempt);

    double first_;
    std::vector<double> ratios_;
    std::vector<double> log_values_;
    std::vector<std::size_t> exempt_;
};

enum class LyapunovConclusion { RecurrenceForm, TransienceForm, Neither };

std::string to_string(LyapunovConclusion c);

struct DriftReport {
    // max over checked columns of (sum_k T_km f_k - f_m) / f_m, floored at 0
    double max_violation = 0.0;
    std::size_t worst_column = 0;
    std::size_t columns_checked = 0;
    bool satisfied = false;
    LyapunovConclusion mode = LyapunovConclusion::Neither;
};

inline constexpr double kDriftSlack = 1e-12;
inline constexpr double kRecurrenceGrowth = 10.0;

// Checks sum_k T_km f_k <= f_m for every interior column m outside A
// (relative slack), then reports which side condition f meets:
// non-decreasing with f_N / f_{max A + 1} >= growth (recurrence form), or
// some f_k below min_A f (transience form).
DriftReport foster_drift_check(const TransitionMatrix& t, const LyapunovFunction& f,
                               double slack = kDriftSlack, double growth = kRecurrenceGrowth);

// f_1 = 0, f_n = 1 + alpha_2 sum_{k=2}^{n-1} (s1/s2)^{k-1} / alpha_{k+1}, all lifted by floor; A = {1}.
LyapunovFunction recurrent_lyapunov_qubit(const QubitSwapParams& params, const QuditState& xi,
                                          std::size_t n_levels, double floor = 1e-9);

// Smallest decay rate a for which the decreasing witness below has
// non-positive drift: (s1/s2) max_m alpha_m / alpha_{m+1} over the stored shells.
double transient_rate_bound(const QubitSwapParams& params, const QuditState& xi);

// f_k = f_1 - delta_1 sum_{i=0}^{k-2} a^i; A = {1}. Without params the
// collision is the full swap and a must lie in [s1/s2, 1).
LyapunovFunction transient_lyapunov_qubit(const QubitSwapParams& params, const QuditState& xi, double a,
                                          double f1, double delta1, std::size_t n_levels);
LyapunovFunction transient_lyapunov_qubit(const QuditState& xi, double a, double f1, double delta1,
                                          std::size_t n_levels);

// Closed-form verdicts for qubit fuel. Active fuel with a partial swap
// somewhere is returned as a non-analytic Inconclusive: it needs the
// empirical estimator.
ChainClass classify_qubit_chain(const QubitSwapParams& params, const QuditState& xi,
                                double tol = kProbabilityTolerance);

struct ReturnStats {
    std::size_t origin = 1;
    std::uint64_t trials = 0;
    std::uint64_t horizon = 0;
    std::uint64_t seed = 0;
    std::vector<std::uint64_t> return_times;  // ascending, one per returning path
    std::vector<std::uint64_t> edge_times;    // ascending, steps at which paths hit the edge

    std::uint64_t return_count() const { return return_times.size(); }
    std::uint64_t edge_count() const { return edge_times.size(); }
    double return_probability() const;
    double return_probability_stderr() const;
    double mean_return_time() const;  // NaN without returns

    // The statistics the same paths would have produced with a shorter horizon.
    ReturnStats truncated(std::uint64_t shorter_horizon) const;
};

// First-return Monte Carlo from `origin`. Trial i uses the stream
// derive_seed(seed, i), so results do not depend on thread count and are
// nested across horizons.
ReturnStats estimate_return_stats(const TransitionMatrix& t, std::size_t origin,
                                  std::uint64_t trials, std::uint64_t horizon, std::uint64_t seed);

struct EstimationBudget {
    std::vector<std::uint64_t> horizons{1000, 10000, 100000};
    std::uint64_t trials = 10000;
    std::uint64_t seed = 1;
    double return_gap = 0.02;       // transient iff return probability < 1 - gap
    double null_growth = 1.5;       // mean return time growth per rung
    double stable_change = 0.05;    // relative change for positive recurrence
    double z = 3.0;                 // confidence multiplier

    void validate() const;
};

// Throws ReducibleChain if the truncated chain is not irreducible.
ChainClass classify_empirical(const TransitionMatrix& t, std::size_t origin,
                              const EstimationBudget& budget = {});

struct StationaryResult {
    std::optional<BatteryDistribution> distribution;
    double residual = 0.0;   // ||T p - p||_1 at exit
    std::size_t iterations = 0;
    double escaped_mass = 0.0;
};

inline constexpr double kEscapeThreshold = 1e-6;

// Lazy power iteration p <- (p + T p) / 2 from p_start (default the ground
// level) until ||T p - p||_1 < tol. No distribution when more than
// escape_threshold of the mass leaks through the truncation edge.
// Throws ReducibleChain, or ConvergenceFailure after max_iters.
StationaryResult stationary_distribution(const TransitionMatrix& t, double tol = 1e-13,
                                         std::size_t max_iters = 1000000,
                                         std::optional<BatteryDistribution> p_start = std::nullopt,
                                         double escape_threshold = kEscapeThreshold);

inline constexpr std::size_t kDirectSolveLimit = 2000;

// Sparse LU solve of (T - I) p = 0 with sum p = 1. Cross-check for
// N < kDirectSolveLimit.
BatteryDistribution stationary_direct(const TransitionMatrix& t);

// key: value lines
void write_classification_report(std::ostream& os, const ChainClass& c);

}  // namespace collide_charge
