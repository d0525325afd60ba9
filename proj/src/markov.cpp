#include "collide_charge/markov.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <queue>
#include <sstream>

#include "collide_charge/errors.hpp"
#include "collide_charge/evolve.hpp"
#include "collide_charge/parallel.hpp"
#include "collide_charge/rng.hpp"

namespace collide_charge {

namespace {

std::vector<bool> reachable_from_first(const TransitionMatrix& t, bool reverse) {
    const std::size_t n = t.size();
    const std::size_t reach = t.reach();
    std::vector<bool> seen(n + 1, false);
    std::queue<std::size_t> frontier;
    seen[1] = true;
    frontier.push(1);
    while (!frontier.empty()) {
        const std::size_t at = frontier.front();
        frontier.pop();
        const std::size_t lo = at > reach ? at - reach : 1;
        const std::size_t hi = std::min(n, at + reach);
        for (std::size_t other = lo; other <= hi; ++other) {
            // forward edge at -> other is T(other, at)
            const double w = reverse ? t(at, other) : t(other, at);
            if (w > 0.0 && !seen[other]) {
                seen[other] = true;
                frontier.push(other);
            }
        }
    }
    return seen;
}

std::string format_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

}  // namespace

std::string to_string(ChainVerdict v) {
    switch (v) {
        case ChainVerdict::Transient: return "transient";
        case ChainVerdict::PositiveRecurrent: return "positive-recurrent";
        case ChainVerdict::NullRecurrent: return "null-recurrent";
        case ChainVerdict::Inconclusive: return "inconclusive";
    }
    return "unknown";
}

std::string to_string(LyapunovConclusion c) {
    switch (c) {
        case LyapunovConclusion::RecurrenceForm: return "recurrence";
        case LyapunovConclusion::TransienceForm: return "transience";
        case LyapunovConclusion::Neither: return "neither";
    }
    return "unknown";
}

bool check_irreducible(const TransitionMatrix& t) {
    for (const auto& seen : {reachable_from_first(t, false), reachable_from_first(t, true)}) {
        if (std::count(seen.begin() + 1, seen.end(), true) != static_cast<long>(t.size())) return false;
    }
    return true;
}

LyapunovFunction::LyapunovFunction(double first, std::vector<double> ratios,
                                   std::vector<std::size_t> exempt)
    : first_(first), ratios_(std::move(ratios)), exempt_(std::move(exempt)) {
    if (!(first_ > 0.0) || !std::isfinite(first_)) throw ValidationError("Lyapunov function must be positive");
    for (double r : ratios_) {
        if (!(r > 0.0) || !std::isfinite(r)) throw ValidationError("Lyapunov function must be positive");
    }
    if (exempt_.empty()) throw ValidationError("exempt set must be non-empty");
    std::sort(exempt_.begin(), exempt_.end());
    exempt_.erase(std::unique(exempt_.begin(), exempt_.end()), exempt_.end());
    if (exempt_.front() < 1 || exempt_.back() > size()) throw ValidationError("exempt level outside the window");
    log_values_.resize(size());
    log_values_[0] = std::log(first_);
    for (std::size_t i = 0; i < ratios_.size(); ++i) log_values_[i + 1] = log_values_[i] + std::log(ratios_[i]);
}

LyapunovFunction LyapunovFunction::from_values(std::vector<double> values, std::vector<std::size_t> exempt) {
    if (values.empty()) throw ValidationError("Lyapunov function needs at least one level");
    for (double v : values) {
        if (!(v > 0.0) || !std::isfinite(v)) throw ValidationError("Lyapunov function must be positive");
    }
    std::vector<double> ratios(values.size() - 1);
    for (std::size_t i = 0; i + 1 < values.size(); ++i) ratios[i] = values[i + 1] / values[i];
    return LyapunovFunction(values[0], std::move(ratios), std::move(exempt));
}

LyapunovFunction LyapunovFunction::from_ratios(double first, std::vector<double> ratios,
                                               std::vector<std::size_t> exempt) {
    return LyapunovFunction(first, std::move(ratios), std::move(exempt));
}

bool LyapunovFunction::is_exempt(std::size_t level) const {
    return std::binary_search(exempt_.begin(), exempt_.end(), level);
}

double LyapunovFunction::ratio(std::size_t k, std::size_t m) const {
    if (k < 1 || k > size() || m < 1 || m > size()) throw DimensionError("level outside Lyapunov window");
    double r = 1.0;
    for (std::size_t i = std::min(k, m); i < std::max(k, m); ++i) r *= ratios_[i - 1];
    return k >= m ? r : 1.0 / r;
}

double LyapunovFunction::log_value(std::size_t k) const {
    if (k < 1 || k > size()) throw DimensionError("level outside Lyapunov window");
    return log_values_[k - 1];
}

double LyapunovFunction::value(std::size_t k) const { return std::exp(log_value(k)); }

DriftReport foster_drift_check(const TransitionMatrix& t, const LyapunovFunction& f, double slack,
                               double growth) {
    if (f.size() != t.size()) throw DimensionError("Lyapunov function must cover every retained level");
    DriftReport report;
    double worst = -std::numeric_limits<double>::infinity();
    const std::size_t reach = t.reach();
    for (std::size_t m = 1; m <= t.interior_columns(); ++m) {
        if (f.is_exempt(m)) continue;
        double drift = -1.0;
        const std::size_t lo = m > reach ? m - reach : 1;
        const std::size_t hi = std::min(t.size(), m + reach);
        for (std::size_t k = lo; k <= hi; ++k) {
            const double w = t(k, m);
            if (w != 0.0) drift += w * f.ratio(k, m);
        }
        ++report.columns_checked;
        if (drift > worst) {
            worst = drift;
            report.worst_column = m;
        }
    }
    report.max_violation = std::max(0.0, worst);
    report.satisfied = report.max_violation <= slack;

    const auto& a = f.exempt();
    const std::size_t lowest_exempt =
        *std::min_element(a.begin(), a.end(), [&](std::size_t x, std::size_t y) { return f.log_value(x) < f.log_value(y); });
    const std::size_t start = a.back() + 1;
    if (start < f.size()) {
        bool monotone = true;
        for (std::size_t k = start; k < f.size() && monotone; ++k) monotone = f.ratio(k + 1, k) >= 1.0;
        if (monotone && f.log_value(f.size()) - f.log_value(start) >= std::log(growth)) {
            report.mode = LyapunovConclusion::RecurrenceForm;
            return report;
        }
    }
    for (std::size_t k = 1; k <= f.size(); ++k) {
        if (!f.is_exempt(k) && f.ratio(k, lowest_exempt) < 1.0) {
            report.mode = LyapunovConclusion::TransienceForm;
            break;
        }
    }
    return report;
}

LyapunovFunction recurrent_lyapunov_qubit(const QubitSwapParams& params, const QuditState& xi,
                                          std::size_t n_levels, double floor) {
    if (xi.dim() != 2) throw DimensionError("qubit Lyapunov function needs a two-level fuel");
    const double s1 = xi.level_prob(1);
    const double s2 = xi.level_prob(2);
    if (s1 < s2) throw ValidationError("recurrent Lyapunov function needs s1 >= s2");
    if (!(s2 > 0.0)) throw ValidationError("recurrent Lyapunov function needs s2 > 0");
    if (n_levels < 2) throw ValidationError("Lyapunov window needs at least two levels");
    if (!(floor > 0.0)) throw ValidationError("floor must be positive");
    if (params.last_shell() < n_levels + 1) throw DimensionError("swap weights needed up to shell N + 1");
    for (std::size_t n = 2; n <= n_levels + 1; ++n) {
        if (!(params.alpha(n) > 0.0)) {
            throw ValidationError("alpha_" + std::to_string(n) + " = 0: function undefined and chain reducible");
        }
    }

    const double rho = s1 / s2;
    std::vector<double> ratios;
    ratios.reserve(n_levels - 1);
    // The whole function is lifted by the floor so that f_1 > 0; a constant
    // shift leaves the drift of every stochastic column unchanged.
    ratios.push_back((1.0 + floor) / floor);
    // q_n = (f_{n+1} - f_n) / f_n
    double q = params.alpha(2) * rho / params.alpha(3) / (1.0 + floor);
    for (std::size_t n = 2; n < n_levels; ++n) {
        ratios.push_back(1.0 + q);
        q = q * rho * params.alpha(n + 1) / (params.alpha(n + 2) * (1.0 + q));
    }
    return LyapunovFunction::from_ratios(floor, std::move(ratios), {1});
}

double transient_rate_bound(const QubitSwapParams& params, const QuditState& xi) {
    if (xi.dim() != 2) throw DimensionError("qubit Lyapunov function needs a two-level fuel");
    const double s2 = xi.level_prob(2);
    if (!(s2 > 0.0)) throw ValidationError("transient witness needs s2 > 0");
    double worst = 1.0;
    for (std::size_t m = 2; m < params.last_shell(); ++m) {
        worst = std::max(worst, params.alpha(m) / params.alpha(m + 1));
    }
    return xi.level_prob(1) / s2 * worst;
}

LyapunovFunction transient_lyapunov_qubit(const QubitSwapParams& params, const QuditState& xi, double a,
                                          double f1, double delta1, std::size_t n_levels) {
    if (xi.dim() != 2) throw DimensionError("qubit Lyapunov function needs a two-level fuel");
    if (!(xi.level_prob(2) > 0.5)) throw ValidationError("transient Lyapunov function needs s2 > 1/2");
    const double bound = transient_rate_bound(params, xi);
    if (!(bound < 1.0)) {
        throw ValidationError("no decreasing witness: alpha profile needs a >= " + format_double(bound));
    }
    if (!(a >= bound - 1e-15) || !(a < 1.0)) {
        throw ValidationError("decay rate a must lie in [" + format_double(bound) + ", 1)");
    }
    if (!(delta1 > 0.0)) throw ValidationError("delta_1 must be positive");
    if (!(f1 > delta1 / (1.0 - a))) throw ValidationError("f_1 must exceed delta_1 / (1 - a) for positivity");
    if (n_levels < 2) throw ValidationError("Lyapunov window needs at least two levels");

    std::vector<double> values(n_levels);
    double partial = 0.0;  // sum_{i=0}^{k-2} a^i
    double power = 1.0;
    values[0] = f1;
    for (std::size_t k = 2; k <= n_levels; ++k) {
        partial += power;
        power *= a;
        values[k - 1] = f1 - delta1 * partial;
    }
    return LyapunovFunction::from_values(std::move(values), {1});
}

LyapunovFunction transient_lyapunov_qubit(const QuditState& xi, double a, double f1, double delta1,
                                          std::size_t n_levels) {
    return transient_lyapunov_qubit(QubitSwapParams::constant(1.0, 2), xi, a, f1, delta1, n_levels);
}

ChainClass classify_qubit_chain(const QubitSwapParams& params, const QuditState& xi, double tol) {
    if (xi.dim() != 2) throw DimensionError("qubit classification needs a two-level fuel");
    for (std::size_t n = 2; n <= params.last_shell(); ++n) {
        if (params.alpha(n) == 0.0) {
            throw ReducibleChain("alpha_" + std::to_string(n) +
                                 " = 0 severs the chain; analyse each component separately");
        }
    }
    const double s1 = xi.level_prob(1);
    const double s2 = xi.level_prob(2);
    ChainClass c;
    c.analytic = true;
    c.settings = {{"s1", format_double(s1)}, {"s2", format_double(s2)}, {"tolerance", format_double(tol)}};
    if (std::abs(s1 - s2) <= tol) {
        c.verdict = ChainVerdict::NullRecurrent;
        c.evidence = "s1 = s2: recurrent by the linear Lyapunov function f_n = 1 + alpha_2 sum 1/alpha_{k+1}; "
                     "the stationary profile is flat and not normalisable";
    } else if (s1 > s2) {
        c.verdict = ChainVerdict::PositiveRecurrent;
        c.evidence = "s1 > s2: recurrent by the Lyapunov function f_n = 1 + alpha_2 sum (s1/s2)^(k-1)/alpha_{k+1}; "
                     "Gibbs stationary state with ratio s2/s1 = " + format_double(s2 / s1);
    } else if (const double bound = transient_rate_bound(params, xi); bound < 1.0) {
        const double a = 0.5 * (bound + 1.0);
        c.verdict = ChainVerdict::Transient;
        c.evidence = "s1 < s2: decreasing Lyapunov witness f_k = f_1 - delta_1 sum a^i with a = " + format_double(a) +
                     " >= (s1/s2) max alpha_m/alpha_{m+1} = " + format_double(bound);
        if (!params.is_full_swap()) {
            c.evidence += " (checked over shells up to " + std::to_string(params.last_shell()) + ")";
        }
    } else {
        c.verdict = ChainVerdict::Inconclusive;
        c.analytic = false;
        c.evidence = "s1 < s2 but the alpha profile defeats the decreasing witness (needs a >= " +
                     format_double(bound) + "); active fuel only allows transience, escalate to the empirical estimator";
    }
    return c;
}

double ReturnStats::return_probability() const {
    return trials == 0 ? 0.0 : static_cast<double>(return_count()) / static_cast<double>(trials);
}

double ReturnStats::return_probability_stderr() const {
    if (trials == 0) return 0.0;
    const double p = return_probability();
    return std::sqrt(p * (1.0 - p) / static_cast<double>(trials));
}

double ReturnStats::mean_return_time() const {
    if (return_times.empty()) return std::numeric_limits<double>::quiet_NaN();
    double sum = 0.0;
    for (auto t : return_times) sum += static_cast<double>(t);
    return sum / static_cast<double>(return_times.size());
}

ReturnStats ReturnStats::truncated(std::uint64_t shorter_horizon) const {
    if (shorter_horizon > horizon) throw ValidationError("cannot extend a horizon by truncation");
    ReturnStats out = *this;
    out.horizon = shorter_horizon;
    auto cut = [&](std::vector<std::uint64_t>& v) {
        v.erase(std::upper_bound(v.begin(), v.end(), shorter_horizon), v.end());
    };
    cut(out.return_times);
    cut(out.edge_times);
    return out;
}

ReturnStats estimate_return_stats(const TransitionMatrix& t, std::size_t origin, std::uint64_t trials,
                                  std::uint64_t horizon, std::uint64_t seed) {
    if (origin < 1 || origin > t.size()) throw ValidationError("origin outside truncation");
    if (trials < 1 || horizon < 1) throw ValidationError("trials and horizon must be >= 1");

    std::vector<std::vector<std::uint64_t>> returns(worker_count());
    std::vector<std::vector<std::uint64_t>> edges(worker_count());
    parallel_chunks(trials, [&](std::size_t worker, std::size_t begin, std::size_t end) {
        auto& ret = returns[worker];
        auto& edge = edges[worker];
        for (std::size_t trial = begin; trial < end; ++trial) {
            SplitMix64 rng(derive_seed(seed, trial));
            std::size_t k = origin;
            for (std::uint64_t step = 1; step <= horizon; ++step) {
                const auto next = draw_next_level(t, k, rng);
                if (!next) {
                    edge.push_back(step);
                    break;
                }
                k = *next;
                if (k == origin) {
                    ret.push_back(step);
                    break;
                }
            }
        }
    });

    ReturnStats stats;
    stats.origin = origin;
    stats.trials = trials;
    stats.horizon = horizon;
    stats.seed = seed;
    for (auto& v : returns) stats.return_times.insert(stats.return_times.end(), v.begin(), v.end());
    for (auto& v : edges) stats.edge_times.insert(stats.edge_times.end(), v.begin(), v.end());
    std::sort(stats.return_times.begin(), stats.return_times.end());
    std::sort(stats.edge_times.begin(), stats.edge_times.end());
    return stats;
}

void EstimationBudget::validate() const {
    if (horizons.size() < 2) throw ValidationError("horizon ladder needs at least two rungs");
    if (!std::is_sorted(horizons.begin(), horizons.end()) || horizons.front() < 1) {
        throw ValidationError("horizon ladder must be ascending and positive");
    }
    if (trials < 1) throw ValidationError("budget needs at least one trial");
    if (!(return_gap > 0.0 && return_gap < 1.0)) throw ValidationError("return gap must lie in (0, 1)");
    if (!(null_growth > 1.0) || !(stable_change > 0.0) || !(z > 0.0)) {
        throw ValidationError("growth, stability and confidence settings must be positive");
    }
}

ChainClass classify_empirical(const TransitionMatrix& t, std::size_t origin, const EstimationBudget& budget) {
    budget.validate();
    if (!check_irreducible(t)) {
        throw ReducibleChain("transition matrix is reducible on the retained levels; analyse each component");
    }
    const ReturnStats full = estimate_return_stats(t, origin, budget.trials, budget.horizons.back(), budget.seed);

    ChainClass c;
    c.analytic = false;
    for (auto h : budget.horizons) {
        const ReturnStats s = full.truncated(h);
        c.ladder.push_back({h, s.return_probability(), budget.z * s.return_probability_stderr(),
                            s.mean_return_time(), s.edge_count()});
    }
    c.settings = {{"origin", std::to_string(origin)},
                  {"trials", std::to_string(budget.trials)},
                  {"seed", std::to_string(budget.seed)},
                  {"truncation", std::to_string(t.size())},
                  {"return_gap", format_double(budget.return_gap)},
                  {"null_growth", format_double(budget.null_growth)},
                  {"stable_change", format_double(budget.stable_change)},
                  {"z", format_double(budget.z)}};

    const HorizonEstimate& top = c.ladder.back();
    const HorizonEstimate& prev = c.ladder[c.ladder.size() - 2];
    const double plateau_band = std::hypot(top.return_probability_halfwidth, prev.return_probability_halfwidth);
    std::ostringstream ev;
    ev.precision(6);
    ev << "return probability " << top.return_probability << " +/- " << top.return_probability_halfwidth
       << " at horizon " << top.horizon;

    if (top.return_probability + top.return_probability_halfwidth < 1.0 - budget.return_gap &&
        std::abs(top.return_probability - prev.return_probability) <= plateau_band) {
        c.verdict = ChainVerdict::Transient;
        ev << "; plateau below 1 - " << budget.return_gap;
    } else if (top.return_probability >= 1.0 - budget.return_gap) {
        const double change = top.mean_return_time / prev.mean_return_time;
        bool growing = true;
        for (std::size_t i = 1; i < c.ladder.size(); ++i) {
            growing = growing && c.ladder[i].mean_return_time >= budget.null_growth * c.ladder[i - 1].mean_return_time;
        }
        ev << "; mean return time " << top.mean_return_time << " (x" << change << " over the previous rung)";
        if (std::abs(change - 1.0) < budget.stable_change) {
            c.verdict = ChainVerdict::PositiveRecurrent;
            ev << ", stable";
        } else if (growing) {
            c.verdict = ChainVerdict::NullRecurrent;
            ev << ", growing >= x" << budget.null_growth << " per rung";
        } else {
            c.verdict = ChainVerdict::Inconclusive;
            ev << ", neither stable nor steadily growing";
        }
    } else {
        c.verdict = ChainVerdict::Inconclusive;
        ev << "; no plateau and not close to 1";
    }
    if (top.edge_count > 0) ev << "; " << top.edge_count << " paths reached the truncation edge";
    c.evidence = ev.str();
    return c;
}

StationaryResult stationary_distribution(const TransitionMatrix& t, double tol, std::size_t max_iters,
                                         std::optional<BatteryDistribution> p_start, double escape_threshold) {
    if (!check_irreducible(t)) {
        throw ReducibleChain("stationary state needs an irreducible chain; every distribution of a reducible chain "
                             "may be stationary");
    }
    BatteryDistribution p = p_start ? *p_start : BatteryDistribution::delta(1, t.size());
    if (p.size() != t.size()) throw DimensionError("start vector and transition matrix sizes differ");

    StationaryResult result;
    for (std::size_t iter = 0; iter < max_iters; ++iter) {
        const BatteryDistribution q = apply_step(t, p);
        double residual = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) residual += std::abs(q.probs()[i] - p.probs()[i]);
        result.residual = residual;
        result.iterations = iter;
        result.escaped_mass = p.leaked_mass();
        if (p.leaked_mass() > escape_threshold) return result;
        if (residual < tol) {
            result.distribution = p;
            return result;
        }
        std::vector<double> lazy(p.size());
        for (std::size_t i = 0; i < p.size(); ++i) lazy[i] = 0.5 * (p.probs()[i] + q.probs()[i]);
        p = BatteryDistribution::assume_valid(std::move(lazy), 0.5 * (p.leaked_mass() + q.leaked_mass()));
    }
    throw ConvergenceFailure("power iteration hit " + std::to_string(max_iters) + " iterations", result.residual);
}

BatteryDistribution stationary_direct(const TransitionMatrix& t) {
    const std::size_t n = t.size();
    if (n >= kDirectSolveLimit) throw ValidationError("direct stationary solve is limited to N < 2000");
    std::vector<Eigen::Triplet<double>> entries;
    const std::size_t reach = t.reach();
    for (std::size_t m = 1; m <= n; ++m) {
        entries.emplace_back(0, static_cast<int>(m - 1), 1.0);
        const std::size_t lo = m > reach ? m - reach : 1;
        const std::size_t hi = std::min(n, m + reach);
        for (std::size_t k = std::max<std::size_t>(lo, 2); k <= hi; ++k) {
            const double v = t(k, m) - (k == m ? 1.0 : 0.0);
            if (v != 0.0) entries.emplace_back(static_cast<int>(k - 1), static_cast<int>(m - 1), v);
        }
    }
    Eigen::SparseMatrix<double> a(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    a.setFromTriplets(entries.begin(), entries.end());
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(a);
    if (lu.info() != Eigen::Success) throw ConvergenceFailure("sparse LU factorisation failed", 0.0);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    rhs(0) = 1.0;
    const Eigen::VectorXd x = lu.solve(rhs);
    std::vector<double> probs(n);
    for (std::size_t i = 0; i < n; ++i) probs[i] = std::max(0.0, x(static_cast<Eigen::Index>(i)));
    return BatteryDistribution::assume_valid(std::move(probs), 0.0);
}

void write_classification_report(std::ostream& os, const ChainClass& c) {
    os << "verdict: " << to_string(c.verdict) << '\n';
    os << "analytic: " << (c.analytic ? "true" : "false") << '\n';
    os << "evidence: " << c.evidence << '\n';
    for (const auto& [key, value] : c.settings) os << key << ": " << value << '\n';
    for (const auto& h : c.ladder) {
        const std::string prefix = "horizon." + std::to_string(h.horizon) + ".";
        os << prefix << "return_probability: " << format_double(h.return_probability) << '\n';
        os << prefix << "return_probability_halfwidth: " << format_double(h.return_probability_halfwidth) << '\n';
        os << prefix << "mean_return_time: " << format_double(h.mean_return_time) << '\n';
        os << prefix << "edge_count: " << h.edge_count << '\n';
    }
}

}  // namespace collide_charge
