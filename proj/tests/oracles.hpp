#pragma once

// Independent reference computations used only by the tests. None of these
// call into the library's numerics beyond reading matrix entries.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "collide_charge/transition.hpp"

namespace oracle {

using Dense = std::vector<std::vector<double>>;  // [row][col], 0-based

// E(p) minus the smallest energy over all permutations of p. Exhaustive.
double brute_force_ergotropy(const std::vector<double>& p);

double weighted_energy(const std::vector<double>& p);

// Qubit birth-death chain written out entry by entry; alphas[0] = alpha_2.
Dense qubit_dense(const std::vector<double>& alphas, double s1, double s2, std::size_t n);

std::vector<double> dense_apply(const Dense& m, const std::vector<double>& p);

Dense to_dense(const collide_charge::TransitionMatrix& t);

// Probability of coming back to origin, with mass lost at the truncation
// edge counted as escape. Dense linear solve of the hitting equations.
double absorption_return_probability(const collide_charge::TransitionMatrix& t, std::size_t origin);

// Mean level after m steps of the symmetric walk reflected at level 1
// (stays put at 1 with probability 1/2), averaged over walkers.
double reflected_walk_mean(std::size_t m, std::size_t walkers, std::uint64_t seed);

// Normalised geometric profile with p_{k+1}/p_k = r on n levels.
std::vector<double> geometric(double r, std::size_t n);

double tv(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace oracle
