#pragma once

// States of the charging qudit and the oscillator battery, passivity
// classification and the energy functionals used throughout.
//
// Level conventions: both ladders are 1-based and equally spaced with
// omega = 1, so battery level k carries energy k. Storage is 0-based
// (probs()[k - 1] is level k).

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace collide_charge {

inline constexpr double kProbabilityTolerance = 1e-12;
inline constexpr double kPassivityTolerance = 1e-10;

enum class StateClass { Active, StrictlyPassive, MaximallyMixed };

std::string to_string(StateClass c);

// Diagonal state of the d-level fuel system: s_1 (ground) ... s_d.
class QuditState {
public:
    explicit QuditState(std::vector<double> probs);

    static QuditState uniform(std::size_t dim);

    std::size_t dim() const { return probs_.size(); }
    std::span<const double> probs() const { return probs_; }
    // 1-based level.
    double level_prob(std::size_t level) const { return probs_.at(level - 1); }

private:
    std::vector<double> probs_;
};

struct EnergyValue {
    double value = 0.0;
};

// Populations of the truncated oscillator, plus the mass that has been
// pushed past the truncation edge. Nothing is renormalised: the leaked
// mass stays visible.
class BatteryDistribution {
public:
    explicit BatteryDistribution(std::vector<double> probs, double leaked_mass = 0.0);

    // Skips the normalisation check. Used on the evolution hot path where
    // rounding drift is tracked separately.
    static BatteryDistribution assume_valid(std::vector<double> probs, double leaked_mass);

    static BatteryDistribution delta(std::size_t level, std::size_t n_levels);

    std::size_t size() const { return probs_.size(); }
    std::span<const double> probs() const { return probs_; }
    double level_prob(std::size_t level) const {
        return level >= 1 && level <= probs_.size() ? probs_[level - 1] : 0.0;
    }
    double leaked_mass() const { return leaked_; }
    double retained_mass() const;

    // Same populations on a larger truncation; new levels start empty.
    BatteryDistribution padded(std::size_t n_levels) const;

private:
    BatteryDistribution() = default;

    std::vector<double> probs_;
    double leaked_ = 0.0;
};

StateClass classify_state(const QuditState& xi, double tol = kPassivityTolerance);

// Incoherent ergotropy: energy above the passive rearrangement of the
// populations (sorted non-increasingly against the ascending ladder).
EnergyValue ergotropy(const BatteryDistribution& p);
EnergyValue ergotropy(std::span<const double> probs);

// Sum_k k p_k over retained levels; leaked mass is not included.
EnergyValue mean_energy(const BatteryDistribution& p);
EnergyValue mean_energy(std::span<const double> probs);

double tv_distance(const BatteryDistribution& p, const BatteryDistribution& q);

// Gibbs profile p_{k+1} = ratio * p_k on levels 1..n_levels.
BatteryDistribution geometric_distribution(double ratio, std::size_t n_levels);

}  // namespace collide_charge
