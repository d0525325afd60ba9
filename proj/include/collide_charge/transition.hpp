#pragma once

// Energy-preserving collisions and the level-transition matrices they
// induce on the battery populations.
//
// A collision is block diagonal over total-energy shells. Shell n couples
// the joint states |n + 1 - i>_B |i>_S for i = 1..min(n, d). Within a
// block, row index i is the outgoing fuel level and column index j the
// incoming one, so block entry (i, j) moves the battery from level
// n + 1 - j to level n + 1 - i.

#include <Eigen/Dense>

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "collide_charge/core.hpp"

namespace collide_charge {

inline constexpr double kBlockTolerance = 1e-10;

using ComplexBlock = Eigen::MatrixXcd;
using RealBlock = Eigen::MatrixXd;

enum class BlockKind { Unitary, Bistochastic };

// Size of the shell-n block for a d-level fuel.
constexpr std::size_t shell_block_size(std::size_t shell, std::size_t qudit_dim) {
    return shell < qudit_dim ? shell : qudit_dim;
}

class BlockSpec {
public:
    // Blocks are indexed by shell, blocks[0] being shell 1.
    static BlockSpec unitary(std::size_t qudit_dim, std::vector<ComplexBlock> blocks,
                             std::string label = "unitary");
    static BlockSpec bistochastic(std::size_t qudit_dim, std::vector<RealBlock> blocks,
                                  std::string label = "bistochastic");

    BlockKind kind() const { return kind_; }
    std::size_t qudit_dim() const { return dim_; }
    std::size_t num_shells() const;
    const std::string& label() const { return label_; }

    // 1-based shell index.
    const ComplexBlock& unitary_block(std::size_t shell) const;
    const RealBlock& bistochastic_block(std::size_t shell) const;

private:
    BlockSpec() = default;

    BlockKind kind_ = BlockKind::Bistochastic;
    std::size_t dim_ = 0;
    std::vector<ComplexBlock> unitary_;
    std::vector<RealBlock> bistochastic_;
    std::string label_;
};

struct TransitionProvenance {
    std::string spec_label;
    std::vector<double> qudit_probs;
    std::size_t truncation = 0;
};

// Column-stochastic T on levels 1..N, stored as a band |k - m| < d.
// Column m holds the probabilities of jumping from level m to level k.
// The last d - 1 columns lose whatever would have landed above N.
class TransitionMatrix {
public:
    TransitionMatrix(std::size_t n_levels, std::size_t qudit_dim);

    static TransitionMatrix identity(std::size_t n_levels, std::size_t qudit_dim = 2);

    std::size_t size() const { return n_; }
    std::size_t qudit_dim() const { return d_; }
    std::size_t reach() const { return d_ - 1; }
    // Columns whose full band lies inside the truncation.
    std::size_t interior_columns() const { return n_ > reach() ? n_ - reach() : 0; }

    // 1-based (k, m); zero outside the band or the truncation.
    double operator()(std::size_t k, std::size_t m) const;
    void set(std::size_t k, std::size_t m, double value);
    void add(std::size_t k, std::size_t m, double value);

    // Band of column m: entries for k = m - reach() ... m + reach(); slots
    // outside 1..N are zero.
    std::span<const double> column_band(std::size_t m) const;

    double column_sum(std::size_t m) const;
    // 1 - column_sum, zero for interior columns.
    double column_deficit(std::size_t m) const;

    // Throws ValidationError on entries outside [0, 1] or interior columns
    // that do not sum to one.
    void validate(double tol = kBlockTolerance) const;

    const TransitionProvenance& provenance() const { return provenance_; }
    void set_provenance(TransitionProvenance p) { provenance_ = std::move(p); }

private:
    std::size_t slot(std::size_t k, std::size_t m) const;

    std::size_t n_;
    std::size_t d_;
    std::size_t width_;
    std::vector<double> band_;
    TransitionProvenance provenance_;
};

// Swap weight alpha_n = |u_12^(n)|^2 for each shell n >= 2 of a qubit
// collision. alphas[0] is alpha_2.
class QubitSwapParams {
public:
    explicit QubitSwapParams(std::vector<double> alphas);

    static QubitSwapParams constant(double alpha, std::size_t last_shell);
    // alpha_n = 1/2 + 1/(2n)
    static QubitSwapParams harmonic(std::size_t last_shell);

    double alpha(std::size_t shell) const;
    std::size_t last_shell() const { return alphas_.size() + 1; }
    std::span<const double> alphas() const { return alphas_; }
    bool is_full_swap() const;

    // Equivalent bistochastic blocks [[1 - a, a], [a, 1 - a]].
    BlockSpec to_block_spec() const;

private:
    std::vector<double> alphas_;
};

// The full-swap collision |1,g><1,g| + sum_n (|n,g><n-1,e| + h.c.).
BlockSpec swap_unitary_blocks(std::size_t n_shells);

BlockSpec unistochastic_from_blocks(const BlockSpec& unitary);

// Needs at least N shells; shells up to N + d - 1 are used when present.
TransitionMatrix build_transition_matrix(const BlockSpec& blocks, const QuditState& xi,
                                         std::size_t n_levels);

// Closed-form qubit chain. Needs alpha_n for 2 <= n <= N + 1.
TransitionMatrix qubit_transition_matrix(const QubitSwapParams& params, const QuditState& xi,
                                         std::size_t n_levels);

// Applies the collision on the full truncated joint space: builds the
// (N d) x (N d) unitary from the blocks, evolves the product state
// diag(p) (x) diag(xi) and traces out the fuel. Independent of the
// transition-matrix route; agrees with it on levels k <= N - (d - 1).
BatteryDistribution oracle_collision_step(const BlockSpec& unitary, const QuditState& xi,
                                          const BatteryDistribution& p);

// Text format: "N d" header, then "k m value" per band entry, values with
// 17 significant digits.
void write_transition_matrix(std::ostream& os, const TransitionMatrix& t);
TransitionMatrix read_transition_matrix(std::istream& is);

}  // namespace collide_charge
