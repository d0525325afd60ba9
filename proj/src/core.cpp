#include "collide_charge/core.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include "collide_charge/errors.hpp"

namespace collide_charge {

namespace {

void check_probability_vector(std::span<const double> probs, double extra_mass, const char* what) {
    double sum = extra_mass;
    for (double v : probs) {
        if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
            std::ostringstream os;
            os << what << ": entry " << v << " outside [0, 1]";
            throw ValidationError(os.str());
        }
        sum += v;
    }
    if (std::abs(sum - 1.0) > kProbabilityTolerance) {
        std::ostringstream os;
        os.precision(17);
        os << what << ": total mass " << sum << " differs from 1";
        throw ValidationError(os.str());
    }
}

}  // namespace

std::string to_string(StateClass c) {
    switch (c) {
        case StateClass::Active: return "active";
        case StateClass::StrictlyPassive: return "passive";
        case StateClass::MaximallyMixed: return "mixed";
    }
    return "unknown";
}

QuditState::QuditState(std::vector<double> probs) : probs_(std::move(probs)) {
    if (probs_.size() < 2) throw ValidationError("qudit state needs d >= 2");
    check_probability_vector(probs_, 0.0, "qudit state");
}

QuditState QuditState::uniform(std::size_t dim) {
    if (dim < 2) throw ValidationError("qudit state needs d >= 2");
    return QuditState(std::vector<double>(dim, 1.0 / static_cast<double>(dim)));
}

BatteryDistribution::BatteryDistribution(std::vector<double> probs, double leaked_mass)
    : probs_(std::move(probs)), leaked_(leaked_mass) {
    if (probs_.empty()) throw ValidationError("battery distribution needs at least one level");
    if (!std::isfinite(leaked_) || leaked_ < 0.0) throw ValidationError("leaked mass must be >= 0");
    check_probability_vector(probs_, leaked_, "battery distribution");
}

BatteryDistribution BatteryDistribution::assume_valid(std::vector<double> probs, double leaked_mass) {
    BatteryDistribution p;
    p.probs_ = std::move(probs);
    p.leaked_ = leaked_mass;
    return p;
}

BatteryDistribution BatteryDistribution::delta(std::size_t level, std::size_t n_levels) {
    if (level < 1 || level > n_levels) throw ValidationError("delta level outside truncation");
    std::vector<double> probs(n_levels, 0.0);
    probs[level - 1] = 1.0;
    return BatteryDistribution(std::move(probs));
}

double BatteryDistribution::retained_mass() const {
    return std::accumulate(probs_.begin(), probs_.end(), 0.0);
}

BatteryDistribution BatteryDistribution::padded(std::size_t n_levels) const {
    if (n_levels < probs_.size()) throw DimensionError("padding cannot shrink a distribution");
    std::vector<double> probs = probs_;
    probs.resize(n_levels, 0.0);
    return assume_valid(std::move(probs), leaked_);
}

StateClass classify_state(const QuditState& xi, double tol) {
    if (!(tol > 0.0)) throw ValidationError("classification tolerance must be positive");
    const auto s = xi.probs();
    const auto [lo, hi] = std::minmax_element(s.begin(), s.end());
    if (*hi - *lo <= tol) return StateClass::MaximallyMixed;
    for (std::size_t k = 0; k + 1 < s.size(); ++k) {
        if (s[k + 1] > s[k] + tol) return StateClass::Active;
    }
    return StateClass::StrictlyPassive;
}

EnergyValue ergotropy(std::span<const double> probs) {
    // Only the occupied levels need sorting; zeros land at the top of the
    // passive ladder where they contribute nothing.
    std::vector<double> passive;
    passive.reserve(probs.size());
    for (double v : probs) {
        if (v > 0.0) passive.push_back(v);
    }
    std::stable_sort(passive.begin(), passive.end(), std::greater<>());
    passive.resize(probs.size(), 0.0);

    double gap = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        gap += static_cast<double>(i + 1) * (probs[i] - passive[i]);
    }
    return {std::max(gap, 0.0)};
}

EnergyValue ergotropy(const BatteryDistribution& p) { return ergotropy(p.probs()); }

EnergyValue mean_energy(std::span<const double> probs) {
    double e = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) e += static_cast<double>(i + 1) * probs[i];
    return {e};
}

EnergyValue mean_energy(const BatteryDistribution& p) { return mean_energy(p.probs()); }

double tv_distance(const BatteryDistribution& p, const BatteryDistribution& q) {
    if (p.size() != q.size()) throw DimensionError("tv_distance: truncations differ");
    double acc = 0.0;
    const auto a = p.probs();
    const auto b = q.probs();
    for (std::size_t i = 0; i < a.size(); ++i) acc += std::abs(a[i] - b[i]);
    return 0.5 * acc;
}

BatteryDistribution geometric_distribution(double ratio, std::size_t n_levels) {
    if (!(ratio > 0.0) || !(ratio < 1.0)) {
        throw ValidationError("geometric ratio must lie in (0, 1); ratio >= 1 has no normalisable Gibbs state");
    }
    if (n_levels < 1) throw ValidationError("geometric distribution needs at least one level");
    std::vector<double> w(n_levels);
    w[0] = 1.0;
    for (std::size_t k = 1; k < n_levels; ++k) w[k] = w[k - 1] * ratio;
    const double z = std::accumulate(w.begin(), w.end(), 0.0);
    for (double& v : w) v /= z;
    return BatteryDistribution::assume_valid(std::move(w), 0.0);
}

}  // namespace collide_charge
