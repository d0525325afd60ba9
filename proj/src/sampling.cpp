#include "collide_charge/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <string>
#include <vector>

#include "collide_charge/errors.hpp"

namespace collide_charge {

namespace {

// Fuel streams live apart from the per-shell block streams.
constexpr std::uint64_t kFuelStream = 0xf0e1d2c3b4a59687ULL;

}  // namespace

void SamplerConfig::validate() const {
    if (qudit_dim < 2) throw ValidationError("sampler needs d >= 2");
    if (n_shells < 1) throw ValidationError("sampler needs at least one shell");
    if (!(sinkhorn_tol > 0.0)) throw ValidationError("sinkhorn tolerance must be positive");
    if (sinkhorn_max_iters < 1) throw ValidationError("sinkhorn needs at least one iteration");
}

RealBlock random_bistochastic_block(std::size_t size, SplitMix64& rng, double tol,
                                    std::size_t max_iters) {
    if (size < 1) throw ValidationError("block size must be >= 1");
    const auto n = static_cast<Eigen::Index>(size);
    RealBlock b(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index i = 0; i < n; ++i) b(i, j) = rng.uniform_open();
    }
    double residual = 0.0;
    for (std::size_t it = 0; it < max_iters; ++it) {
        b.array().colwise() /= b.rowwise().sum().array();
        b.array().rowwise() /= b.colwise().sum().array();
        // Columns are exact after the last pass; rows carry the residual.
        residual = (b.rowwise().sum().array() - 1.0).abs().maxCoeff();
        if (residual <= tol) return b;
    }
    throw ConvergenceFailure("sinkhorn did not converge for a " + std::to_string(size) + "x" +
                                 std::to_string(size) + " block",
                             residual);
}

ComplexBlock random_unitary_block(std::size_t size, SplitMix64& rng) {
    if (size < 1) throw ValidationError("block size must be >= 1");
    const auto n = static_cast<Eigen::Index>(size);
    for (;;) {
        ComplexBlock z(n, n);
        for (Eigen::Index j = 0; j < n; ++j) {
            for (Eigen::Index i = 0; i < n; ++i) {
                const double re = rng.normal();
                const double im = rng.normal();
                z(i, j) = std::complex<double>(re, im) / std::sqrt(2.0);
            }
        }
        Eigen::HouseholderQR<ComplexBlock> qr(z);
        const ComplexBlock r = qr.matrixQR().triangularView<Eigen::Upper>();
        ComplexBlock q = qr.householderQ() * ComplexBlock::Identity(n, n);
        bool degenerate = false;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double mod = std::abs(r(i, i));
            if (mod < 1e-300) {
                degenerate = true;
                break;
            }
            q.col(i) *= r(i, i) / mod;
        }
        if (!degenerate) return q;
    }
}

QuditState random_qudit_state(std::size_t dim, std::optional<StateClass> constraint, SplitMix64& rng) {
    if (dim < 2) throw ValidationError("qudit state needs d >= 2");
    if (constraint == StateClass::MaximallyMixed) return QuditState::uniform(dim);

    auto draw = [&] {
        std::vector<double> s(dim);
        double total = 0.0;
        for (double& v : s) total += (v = rng.exponential());
        for (double& v : s) v /= total;
        return s;
    };
    for (std::size_t attempt = 0; attempt < kRejectionBudget; ++attempt) {
        std::vector<double> s = draw();
        if (!constraint) return QuditState(std::move(s));
        if (*constraint == StateClass::StrictlyPassive) {
            std::sort(s.begin(), s.end(), std::greater<>());
            if (std::adjacent_find(s.begin(), s.end()) != s.end()) continue;
            QuditState xi(std::move(s));
            if (classify_state(xi) == StateClass::StrictlyPassive) return xi;
            continue;
        }
        QuditState xi(std::move(s));
        if (classify_state(xi) == StateClass::Active) return xi;
    }
    throw ConvergenceFailure("qudit state rejection budget exhausted", 0.0);
}

BlockSpec random_bistochastic_spec(const SamplerConfig& config) {
    config.validate();
    std::vector<RealBlock> blocks;
    blocks.reserve(config.n_shells);
    for (std::size_t n = 1; n <= config.n_shells; ++n) {
        SplitMix64 rng(derive_seed(config.master_seed, n));
        blocks.push_back(random_bistochastic_block(shell_block_size(n, config.qudit_dim), rng,
                                                   config.sinkhorn_tol, config.sinkhorn_max_iters));
    }
    return BlockSpec::bistochastic(config.qudit_dim, std::move(blocks),
                                   "bistochastic:" + std::to_string(config.master_seed));
}

BlockSpec random_unitary_spec(const SamplerConfig& config) {
    config.validate();
    std::vector<ComplexBlock> blocks;
    blocks.reserve(config.n_shells);
    for (std::size_t n = 1; n <= config.n_shells; ++n) {
        SplitMix64 rng(derive_seed(config.master_seed, n));
        blocks.push_back(random_unitary_block(shell_block_size(n, config.qudit_dim), rng));
    }
    return BlockSpec::unitary(config.qudit_dim, std::move(blocks),
                              "haar:" + std::to_string(config.master_seed));
}

QuditState random_qudit_state(const SamplerConfig& config) {
    config.validate();
    SplitMix64 rng(derive_seed(config.master_seed, kFuelStream));
    return random_qudit_state(config.qudit_dim, config.state_class_constraint, rng);
}

}  // namespace collide_charge
