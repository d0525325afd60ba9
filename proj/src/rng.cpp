#include "collide_charge/rng.hpp"

#include <cmath>
#include <numbers>

namespace collide_charge {

double SplitMix64::exponential() { return -std::log(uniform_open()); }

double SplitMix64::normal() {
    // Box-Muller without caching the second variate keeps the stream
    // position a pure function of the number of calls.
    const double r = std::sqrt(-2.0 * std::log(uniform_open()));
    return r * std::cos(2.0 * std::numbers::pi * uniform());
}

}  // namespace collide_charge
