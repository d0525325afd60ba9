#include "collide_charge/transition.hpp"

#include <cmath>
#include <complex>
#include <istream>
#include <ostream>
#include <sstream>

#include "collide_charge/errors.hpp"

namespace collide_charge {

namespace {

void check_block_shapes(std::size_t dim, std::size_t count,
                        const auto& rows_of, const auto& cols_of) {
    if (dim < 2) throw ValidationError("block spec needs d >= 2");
    if (count < 1) throw ValidationError("block spec needs at least one shell");
    for (std::size_t n = 1; n <= count; ++n) {
        const auto want = static_cast<Eigen::Index>(shell_block_size(n, dim));
        if (rows_of(n - 1) != want || cols_of(n - 1) != want) {
            std::ostringstream os;
            os << "shell " << n << " block must be " << want << "x" << want;
            throw DimensionError(os.str());
        }
    }
}

}  // namespace

BlockSpec BlockSpec::unitary(std::size_t qudit_dim, std::vector<ComplexBlock> blocks,
                             std::string label) {
    check_block_shapes(
        qudit_dim, blocks.size(), [&](std::size_t i) { return blocks[i].rows(); },
        [&](std::size_t i) { return blocks[i].cols(); });
    for (std::size_t n = 0; n < blocks.size(); ++n) {
        const auto& u = blocks[n];
        const Eigen::MatrixXcd gram = u.adjoint() * u;
        const double err =
            (gram - Eigen::MatrixXcd::Identity(u.rows(), u.cols())).cwiseAbs().maxCoeff();
        if (!(err <= kBlockTolerance)) {
            std::ostringstream os;
            os << "shell " << n + 1 << " block is not unitary (|U^dag U - I| = " << err << ")";
            throw ValidationError(os.str());
        }
    }
    BlockSpec spec;
    spec.kind_ = BlockKind::Unitary;
    spec.dim_ = qudit_dim;
    spec.unitary_ = std::move(blocks);
    spec.label_ = std::move(label);
    return spec;
}

BlockSpec BlockSpec::bistochastic(std::size_t qudit_dim, std::vector<RealBlock> blocks,
                                  std::string label) {
    check_block_shapes(
        qudit_dim, blocks.size(), [&](std::size_t i) { return blocks[i].rows(); },
        [&](std::size_t i) { return blocks[i].cols(); });
    for (std::size_t n = 0; n < blocks.size(); ++n) {
        const auto& b = blocks[n];
        const double row_err = (b.rowwise().sum().array() - 1.0).abs().maxCoeff();
        const double col_err = (b.colwise().sum().array() - 1.0).abs().maxCoeff();
        if (!(b.minCoeff() >= 0.0) || !(row_err <= kBlockTolerance) || !(col_err <= kBlockTolerance)) {
            std::ostringstream os;
            os << "shell " << n + 1 << " block is not bistochastic";
            throw ValidationError(os.str());
        }
    }
    BlockSpec spec;
    spec.kind_ = BlockKind::Bistochastic;
    spec.dim_ = qudit_dim;
    spec.bistochastic_ = std::move(blocks);
    spec.label_ = std::move(label);
    return spec;
}

std::size_t BlockSpec::num_shells() const {
    return kind_ == BlockKind::Unitary ? unitary_.size() : bistochastic_.size();
}

const ComplexBlock& BlockSpec::unitary_block(std::size_t shell) const {
    if (kind_ != BlockKind::Unitary) throw ValidationError("block spec is not unitary");
    if (shell < 1 || shell > unitary_.size()) throw DimensionError("shell index out of range");
    return unitary_[shell - 1];
}

const RealBlock& BlockSpec::bistochastic_block(std::size_t shell) const {
    if (kind_ != BlockKind::Bistochastic) throw ValidationError("block spec is not bistochastic");
    if (shell < 1 || shell > bistochastic_.size()) throw DimensionError("shell index out of range");
    return bistochastic_[shell - 1];
}

TransitionMatrix::TransitionMatrix(std::size_t n_levels, std::size_t qudit_dim)
    : n_(n_levels), d_(qudit_dim), width_(2 * qudit_dim - 1) {
    if (n_levels < 1) throw ValidationError("transition matrix needs at least one level");
    if (qudit_dim < 2) throw ValidationError("transition matrix needs d >= 2");
    band_.assign(n_ * width_, 0.0);
}

TransitionMatrix TransitionMatrix::identity(std::size_t n_levels, std::size_t qudit_dim) {
    TransitionMatrix t(n_levels, qudit_dim);
    for (std::size_t m = 1; m <= n_levels; ++m) t.set(m, m, 1.0);
    t.provenance_ = {"identity", {}, n_levels};
    return t;
}

std::size_t TransitionMatrix::slot(std::size_t k, std::size_t m) const {
    if (k < 1 || k > n_ || m < 1 || m > n_) throw DimensionError("level outside truncation");
    const auto gap = static_cast<long long>(k) - static_cast<long long>(m);
    if (std::llabs(gap) > static_cast<long long>(reach())) {
        throw DimensionError("entry outside the transition band");
    }
    return (m - 1) * width_ + static_cast<std::size_t>(gap + static_cast<long long>(reach()));
}

double TransitionMatrix::operator()(std::size_t k, std::size_t m) const {
    if (k < 1 || k > n_ || m < 1 || m > n_) return 0.0;
    const auto gap = static_cast<long long>(k) - static_cast<long long>(m);
    if (std::llabs(gap) > static_cast<long long>(reach())) return 0.0;
    return band_[slot(k, m)];
}

void TransitionMatrix::set(std::size_t k, std::size_t m, double value) { band_[slot(k, m)] = value; }

void TransitionMatrix::add(std::size_t k, std::size_t m, double value) { band_[slot(k, m)] += value; }

std::span<const double> TransitionMatrix::column_band(std::size_t m) const {
    if (m < 1 || m > n_) throw DimensionError("column outside truncation");
    return std::span<const double>(band_).subspan((m - 1) * width_, width_);
}

double TransitionMatrix::column_sum(std::size_t m) const {
    double s = 0.0;
    for (double v : column_band(m)) s += v;
    return s;
}

double TransitionMatrix::column_deficit(std::size_t m) const {
    if (m <= interior_columns()) return 0.0;
    return std::max(0.0, 1.0 - column_sum(m));
}

void TransitionMatrix::validate(double tol) const {
    for (std::size_t m = 1; m <= n_; ++m) {
        for (double v : column_band(m)) {
            if (!std::isfinite(v) || v < -tol || v > 1.0 + tol) {
                throw ValidationError("transition entry outside [0, 1] in column " + std::to_string(m));
            }
        }
        const double s = column_sum(m);
        if (m <= interior_columns() ? std::abs(s - 1.0) > tol : s > 1.0 + tol) {
            throw ValidationError("column " + std::to_string(m) + " is not stochastic");
        }
    }
}

QubitSwapParams::QubitSwapParams(std::vector<double> alphas) : alphas_(std::move(alphas)) {
    if (alphas_.empty()) throw ValidationError("qubit params need alpha_2 at least");
    for (double a : alphas_) {
        if (!std::isfinite(a) || a < 0.0 || a > 1.0) throw ValidationError("swap weight outside [0, 1]");
    }
}

QubitSwapParams QubitSwapParams::constant(double alpha, std::size_t last_shell) {
    if (last_shell < 2) throw ValidationError("qubit params need last shell >= 2");
    return QubitSwapParams(std::vector<double>(last_shell - 1, alpha));
}

QubitSwapParams QubitSwapParams::harmonic(std::size_t last_shell) {
    if (last_shell < 2) throw ValidationError("qubit params need last shell >= 2");
    std::vector<double> a(last_shell - 1);
    for (std::size_t n = 2; n <= last_shell; ++n) a[n - 2] = 0.5 + 0.5 / static_cast<double>(n);
    return QubitSwapParams(std::move(a));
}

double QubitSwapParams::alpha(std::size_t shell) const {
    if (shell < 2 || shell > last_shell()) {
        throw DimensionError("swap weight requested for shell " + std::to_string(shell) +
                             " outside 2.." + std::to_string(last_shell()));
    }
    return alphas_[shell - 2];
}

bool QubitSwapParams::is_full_swap() const {
    for (double a : alphas_) {
        if (a != 1.0) return false;
    }
    return true;
}

BlockSpec QubitSwapParams::to_block_spec() const {
    std::vector<RealBlock> blocks;
    blocks.reserve(last_shell());
    blocks.push_back(RealBlock::Ones(1, 1));
    for (double a : alphas_) {
        RealBlock b(2, 2);
        b << 1.0 - a, a, a, 1.0 - a;
        blocks.push_back(std::move(b));
    }
    return BlockSpec::bistochastic(2, std::move(blocks), "qubit");
}

BlockSpec swap_unitary_blocks(std::size_t n_shells) {
    if (n_shells < 1) throw ValidationError("swap collision needs at least one shell");
    std::vector<ComplexBlock> blocks;
    blocks.reserve(n_shells);
    blocks.push_back(ComplexBlock::Ones(1, 1));
    for (std::size_t n = 2; n <= n_shells; ++n) {
        ComplexBlock b = ComplexBlock::Zero(2, 2);
        b(0, 1) = 1.0;
        b(1, 0) = 1.0;
        blocks.push_back(std::move(b));
    }
    return BlockSpec::unitary(2, std::move(blocks), "swap");
}

BlockSpec unistochastic_from_blocks(const BlockSpec& unitary) {
    if (unitary.kind() != BlockKind::Unitary) throw ValidationError("expected a unitary block spec");
    std::vector<RealBlock> blocks;
    blocks.reserve(unitary.num_shells());
    for (std::size_t n = 1; n <= unitary.num_shells(); ++n) {
        blocks.push_back(unitary.unitary_block(n).cwiseAbs2());
    }
    return BlockSpec::bistochastic(unitary.qudit_dim(), std::move(blocks), unitary.label());
}

TransitionMatrix build_transition_matrix(const BlockSpec& blocks, const QuditState& xi,
                                         std::size_t n_levels) {
    if (blocks.kind() == BlockKind::Unitary) {
        return build_transition_matrix(unistochastic_from_blocks(blocks), xi, n_levels);
    }
    const std::size_t d = xi.dim();
    if (blocks.qudit_dim() != d) throw DimensionError("block spec and qudit state disagree on d");
    if (n_levels > blocks.num_shells()) {
        throw DimensionError("truncation " + std::to_string(n_levels) + " exceeds the " +
                             std::to_string(blocks.num_shells()) + " shells provided");
    }
    TransitionMatrix t(n_levels, d);
    const std::size_t last_shell = std::min(blocks.num_shells(), n_levels + d - 1);
    for (std::size_t n = 1; n <= last_shell; ++n) {
        const RealBlock& b = blocks.bistochastic_block(n);
        const std::size_t size = shell_block_size(n, d);
        for (std::size_t j = 1; j <= size; ++j) {
            const std::size_t m = n + 1 - j;
            if (m > n_levels) continue;
            const double s = xi.level_prob(j);
            for (std::size_t i = 1; i <= size; ++i) {
                const std::size_t k = n + 1 - i;
                if (k > n_levels) continue;
                t.add(k, m, b(static_cast<Eigen::Index>(i - 1), static_cast<Eigen::Index>(j - 1)) * s);
            }
        }
    }
    std::vector<double> probs(xi.probs().begin(), xi.probs().end());
    t.set_provenance({blocks.label(), std::move(probs), n_levels});
    return t;
}

TransitionMatrix qubit_transition_matrix(const QubitSwapParams& params, const QuditState& xi,
                                         std::size_t n_levels) {
    if (xi.dim() != 2) throw DimensionError("qubit transition matrix needs a two-level fuel");
    if (n_levels < 1) throw ValidationError("transition matrix needs at least one level");
    if (params.last_shell() < n_levels + 1) {
        throw DimensionError("swap weights needed up to shell " + std::to_string(n_levels + 1));
    }
    const double s1 = xi.level_prob(1);
    const double s2 = xi.level_prob(2);
    TransitionMatrix t(n_levels, 2);
    t.set(1, 1, 1.0 - params.alpha(2) * s2);
    if (n_levels >= 2) t.set(2, 1, params.alpha(2) * s2);
    for (std::size_t m = 2; m <= n_levels; ++m) {
        const double down = params.alpha(m) * s1;
        const double up = params.alpha(m + 1) * s2;
        t.set(m - 1, m, down);
        t.set(m, m, 1.0 - down - up);
        if (m + 1 <= n_levels) t.set(m + 1, m, up);
    }
    t.set_provenance({"qubit", {s1, s2}, n_levels});
    return t;
}

BatteryDistribution oracle_collision_step(const BlockSpec& unitary, const QuditState& xi,
                                          const BatteryDistribution& p) {
    if (unitary.kind() != BlockKind::Unitary) throw ValidationError("oracle needs a unitary block spec");
    const std::size_t d = xi.dim();
    const std::size_t n = p.size();
    if (unitary.qudit_dim() != d) throw DimensionError("block spec and qudit state disagree on d");
    if (unitary.num_shells() < n) throw DimensionError("oracle needs a block for every retained shell");

    const auto dim = static_cast<Eigen::Index>(n * d);
    auto joint = [d](std::size_t level, std::size_t fuel) {
        return static_cast<Eigen::Index>((level - 1) * d + (fuel - 1));
    };

    // Shells above N only partly fit; they are left as identity, which
    // only disturbs the top d - 1 battery levels.
    Eigen::MatrixXcd u = Eigen::MatrixXcd::Identity(dim, dim);
    for (std::size_t shell = 1; shell <= n; ++shell) {
        const ComplexBlock& b = unitary.unitary_block(shell);
        const std::size_t size = shell_block_size(shell, d);
        for (std::size_t a = 1; a <= size; ++a) {
            for (std::size_t c = 1; c <= size; ++c) {
                u(joint(shell + 1 - a, a), joint(shell + 1 - c, c)) =
                    b(static_cast<Eigen::Index>(a - 1), static_cast<Eigen::Index>(c - 1));
            }
        }
    }

    Eigen::VectorXcd product_state(dim);
    for (std::size_t k = 1; k <= n; ++k) {
        for (std::size_t i = 1; i <= d; ++i) product_state(joint(k, i)) = p.level_prob(k) * xi.level_prob(i);
    }
    const Eigen::MatrixXcd rho = u * product_state.asDiagonal() * u.adjoint();

    std::vector<double> out(n, 0.0);
    for (std::size_t k = 1; k <= n; ++k) {
        std::complex<double> acc = 0.0;
        for (std::size_t i = 1; i <= d; ++i) acc += rho(joint(k, i), joint(k, i));
        out[k - 1] = acc.real();
    }
    return BatteryDistribution::assume_valid(std::move(out), p.leaked_mass());
}

void write_transition_matrix(std::ostream& os, const TransitionMatrix& t) {
    const auto old_precision = os.precision(17);
    os << t.size() << ' ' << t.qudit_dim() << '\n';
    for (std::size_t m = 1; m <= t.size(); ++m) {
        const std::size_t lo = m > t.reach() ? m - t.reach() : 1;
        const std::size_t hi = std::min(t.size(), m + t.reach());
        for (std::size_t k = lo; k <= hi; ++k) os << k << ' ' << m << ' ' << t(k, m) << '\n';
    }
    os.precision(old_precision);
}

TransitionMatrix read_transition_matrix(std::istream& is) {
    std::size_t n = 0;
    std::size_t d = 0;
    if (!(is >> n >> d)) throw ValidationError("transition matrix: missing 'N d' header");
    TransitionMatrix t(n, d);
    std::size_t k = 0;
    std::size_t m = 0;
    double v = 0.0;
    while (is >> k >> m >> v) t.set(k, m, v);
    if (!is.eof()) throw ValidationError("transition matrix: malformed entry line");
    t.set_provenance({"file", {}, n});
    t.validate();
    return t;
}

}  // namespace collide_charge
