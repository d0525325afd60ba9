#pragma once

// Seeded generation of random collisions and fuel states.

#include <cstddef>
#include <cstdint>
#include <optional>

#include "collide_charge/core.hpp"
#include "collide_charge/rng.hpp"
#include "collide_charge/transition.hpp"

namespace collide_charge {

struct SamplerConfig {
    std::uint64_t master_seed = 0;
    std::size_t qudit_dim = 2;
    std::size_t n_shells = 1;
    std::optional<StateClass> state_class_constraint;
    double sinkhorn_tol = 1e-12;
    std::size_t sinkhorn_max_iters = 10000;

    void validate() const;
};

inline constexpr std::size_t kRejectionBudget = 100000;

// Sinkhorn balancing of an i.i.d. uniform positive matrix.
// Throws ConvergenceFailure if the row sums do not settle within tol.
RealBlock random_bistochastic_block(std::size_t size, SplitMix64& rng, double tol = 1e-12,
                                    std::size_t max_iters = 10000);

// Haar unitary: QR of a complex Ginibre matrix with R's diagonal phases
// moved into Q.
ComplexBlock random_unitary_block(std::size_t size, SplitMix64& rng);

// Flat Dirichlet draw, shaped by the optional class constraint.
QuditState random_qudit_state(std::size_t dim, std::optional<StateClass> constraint, SplitMix64& rng);

// Shell n is drawn from its own stream derive_seed(master_seed, n), so
// the first shells do not change when more are requested.
BlockSpec random_bistochastic_spec(const SamplerConfig& config);
BlockSpec random_unitary_spec(const SamplerConfig& config);

QuditState random_qudit_state(const SamplerConfig& config);

}  // namespace collide_charge
