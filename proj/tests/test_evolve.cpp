#include <doctest.h>

#include <cmath>
#include <numeric>
#include <sstream>

#include "collide_charge/errors.hpp"
#include "collide_charge/evolve.hpp"
#include "collide_charge/sampling.hpp"
#include "collide_charge/transition.hpp"
#include "oracles.hpp"

using namespace collide_charge;

namespace {

TransitionMatrix swap_chain(double s1, std::size_t n) {
    return qubit_transition_matrix(QubitSwapParams::constant(1.0, n + 1), QuditState({s1, 1.0 - s1}), n);
}

std::vector<double> to_vector(const BatteryDistribution& p) { return {p.probs().begin(), p.probs().end()}; }

}  // namespace

TEST_CASE("apply_step examples") {
    const BatteryDistribution p({0.1, 0.6, 0.3});
    const auto same = apply_step(TransitionMatrix::identity(3), p);
    for (std::size_t k = 1; k <= 3; ++k) CHECK(same.level_prob(k) == p.level_prob(k));

    const auto t = swap_chain(0.7, 50);
    const auto one = apply_step(t, BatteryDistribution::delta(1, 50));
    CHECK(one.level_prob(1) == doctest::Approx(0.7).epsilon(1e-15));
    CHECK(one.level_prob(2) == doctest::Approx(0.3).epsilon(1e-15));
    const auto two = apply_step(t, one);
    const auto dense = oracle::qubit_dense(std::vector<double>(51, 1.0), 0.7, 0.3, 50);
    const auto expected = oracle::dense_apply(dense, to_vector(one));
    for (std::size_t k = 1; k <= 50; ++k) CHECK(two.level_prob(k) == doctest::Approx(expected[k - 1]).scale(1e-16));
    CHECK(two.level_prob(1) == doctest::Approx(0.70).epsilon(1e-14));
    CHECK(two.level_prob(2) == doctest::Approx(0.21).epsilon(1e-14));
    CHECK(two.level_prob(3) == doctest::Approx(0.09).epsilon(1e-14));

    CHECK_THROWS_AS(apply_step(t, BatteryDistribution::delta(1, 49)), DimensionError);
}

TEST_CASE("zero steps keep only the initial record") {
    const auto traj = evolve(swap_chain(0.7, 20), BatteryDistribution::delta(3, 20), 0);
    REQUIRE(traj.records.size() == 1);
    CHECK(traj.records[0].step == 0);
    CHECK(traj.records[0].mean_energy == 3.0);
    CHECK(traj.records[0].ergotropy == 2.0);
}

TEST_CASE("Gibbs convergence on the swap chain") {
    const std::size_t n = 200;
    const auto traj = evolve(swap_chain(0.7, n), BatteryDistribution::delta(1, n), 3000);
    CHECK(traj.records.size() == 3001);
    const auto gibbs = oracle::geometric(3.0 / 7.0, n);
    CHECK(oracle::tv(to_vector(traj.final_state), gibbs) < 1e-6);
    CHECK(traj.records.back().ergotropy < 1e-9);

    // independent dense power iteration reaches the same state
    const auto dense = oracle::qubit_dense(std::vector<double>(n + 1, 1.0), 0.7, 0.3, n);
    std::vector<double> p(n, 0.0);
    p[0] = 1.0;
    for (int i = 0; i < 3000; ++i) p = oracle::dense_apply(dense, p);
    CHECK(oracle::tv(to_vector(traj.final_state), p) < 1e-12);
}

TEST_CASE("transient drift matches s2 - s1") {
    const std::size_t n = 6000;
    const auto traj = evolve(swap_chain(0.3, n), BatteryDistribution::delta(1, n), 10000);
    const double rate = traj.records.back().mean_energy / 10000.0;
    CHECK(rate == doctest::Approx(0.4).epsilon(0.05));
    CHECK(traj.records.back().leaked_mass <= 1e-12);
}

TEST_CASE("probability is conserved and leakage never decreases") {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        SamplerConfig config;
        config.master_seed = seed;
        config.qudit_dim = 2 + seed % 4;
        const std::size_t n = 15;
        config.n_shells = n + config.qudit_dim - 1;
        const auto t = build_transition_matrix(random_bistochastic_spec(config), random_qudit_state(config), n);
        EvolveOptions options;
        options.snapshot_every = 1;
        options.leakage_budget = 2.0;  // never trips
        const auto traj = evolve(t, BatteryDistribution::delta(1 + seed % n, n), 400, options);
        REQUIRE(traj.snapshots.size() == 401);
        double last_leak = 0.0;
        for (std::size_t i = 0; i < traj.snapshots.size(); ++i) {
            const auto& s = traj.snapshots[i];
            const double mass = std::accumulate(s.probs.begin(), s.probs.end(), 0.0);
            CHECK(std::abs(mass + traj.records[i].leaked_mass - 1.0) <= 1e-10);
            CHECK(traj.records[i].leaked_mass >= last_leak);
            for (double v : s.probs) CHECK(v >= 0.0);
            last_leak = traj.records[i].leaked_mass;
        }
    }
}

TEST_CASE("leakage over budget is reported as truncation overflow") {
    CHECK_THROWS_AS(evolve(swap_chain(0.3, 20), BatteryDistribution::delta(1, 20), 200), TruncationOverflow);
    try {
        evolve(swap_chain(0.3, 20), BatteryDistribution::delta(1, 20), 200);
    } catch (const TruncationOverflow& e) {
        CHECK(e.leaked_mass() > 1e-9);
        CHECK(e.step() >= 19);
    }
}

TEST_CASE("auto-grown evolution matches a generous fixed truncation") {
    const QuditState xi({0.3, 0.7});
    const TransitionFactory factory = [&](std::size_t n) {
        return qubit_transition_matrix(QubitSwapParams::constant(1.0, n + 1), xi, n);
    };
    const auto grown = evolve_autogrow(factory, BatteryDistribution::delta(1, 50), 2000);
    CHECK(grown.final_truncation > 50);
    CHECK(grown.records.back().leaked_mass < 1e-9);
    const auto fixed = evolve(factory(2000), BatteryDistribution::delta(1, 2000), 2000);
    for (std::size_t i = 0; i <= 2000; i += 50) {
        CHECK(grown.records[i].mean_energy == doctest::Approx(fixed.records[i].mean_energy).epsilon(1e-10));
        CHECK(grown.records[i].ergotropy == doctest::Approx(fixed.records[i].ergotropy).epsilon(1e-10));
    }
}

TEST_CASE("strictly passive qubit fuel drives any start to zero ergotropy") {
    SplitMix64 rng(4);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t n = 100;
        std::vector<double> p(n, 0.0);
        double z = 0.0;
        for (std::size_t k = 0; k < 30; ++k) z += (p[k] = rng.exponential());
        for (auto& x : p) x /= z;
        const double s1 = 0.6 + 0.3 * rng.uniform();
        const auto params = trial % 2 == 0 ? QubitSwapParams::constant(1.0, n + 1) : QubitSwapParams::harmonic(n + 1);
        const auto t = qubit_transition_matrix(params, QuditState({s1, 1.0 - s1}), n);
        const auto traj = evolve(t, BatteryDistribution(p), 20000);
        CHECK(traj.records.back().ergotropy < 1e-9);
    }
}

TEST_CASE("csv writers") {
    EvolveOptions options;
    options.snapshot_at = {0, 2};
    const auto traj = evolve(swap_chain(0.7, 5), BatteryDistribution::delta(1, 5), 2, options);
    std::ostringstream a;
    write_trajectory_csv(a, traj);
    std::istringstream in(a.str());
    std::string line;
    std::getline(in, line);
    CHECK(line == "step,mean_energy,ergotropy,leaked_mass");
    std::getline(in, line);
    CHECK(line == "0,1,0,0");
    std::getline(in, line);
    CHECK(line == "1,1.3,0,0");
    std::getline(in, line);
    std::istringstream row(line);
    std::string step, energy;
    std::getline(row, step, ',');
    std::getline(row, energy, ',');
    CHECK(step == "2");
    CHECK(std::stod(energy) == traj.records[2].mean_energy);

    std::ostringstream b;
    write_snapshots_csv(b, traj);
    CHECK(b.str().rfind("step,level,prob\n0,1,1\n", 0) == 0);
    std::ostringstream cell;
    cell.precision(17);
    cell << "\n2,3," << traj.snapshots.back().probs[2] << "\n";
    CHECK(b.str().find(cell.str()) != std::string::npos);
}

TEST_CASE("sample paths") {
    const auto frozen = sample_path(TransitionMatrix::identity(10), 4, 100, 1);
    CHECK(frozen.levels.size() == 101);
    for (auto k : frozen.levels) CHECK(k == 4);

    SamplerConfig config;
    config.master_seed = 5;
    config.qudit_dim = 4;
    config.n_shells = 63;
    const auto t = build_transition_matrix(random_bistochastic_spec(config), random_qudit_state(config), 60);
    const auto a = sample_path(t, 10, 5000, 99);
    const auto b = sample_path(t, 10, 5000, 99);
    CHECK(a.levels == b.levels);
    CHECK(a.seed == 99);
    for (std::size_t i = 1; i < a.levels.size(); ++i) {
        CHECK(a.levels[i] >= 1);
        CHECK(std::llabs(static_cast<long long>(a.levels[i]) - static_cast<long long>(a.levels[i - 1])) < 4);
    }
    CHECK_THROWS_AS(sample_path(t, 0, 10, 1), ValidationError);
}

TEST_CASE("null walk spends a vanishing share of time at the ground level") {
    const auto t = swap_chain(0.5, 4000);
    double previous = 1.0;
    for (std::size_t horizon : {1000u, 10000u, 100000u}) {
        double share = 0.0;
        const int paths = 100;
        for (int i = 0; i < paths; ++i) {
            const auto path = sample_path(t, 1, horizon, derive_seed(horizon, i));
            REQUIRE(path.status == PathStatus::Completed);
            share += static_cast<double>(std::count(path.levels.begin(), path.levels.end(), 1u)) /
                     static_cast<double>(path.levels.size());
        }
        share /= paths;
        CHECK(share < previous);
        previous = share;
    }
    CHECK(previous < 0.01);
}

TEST_CASE("sampled transitions follow the matrix columns") {
    SamplerConfig config;
    config.master_seed = 12;
    config.qudit_dim = 5;
    config.n_shells = 44;
    const auto t = build_transition_matrix(random_bistochastic_spec(config), random_qudit_state(config), 40);
    SplitMix64 rng(2024);
    const std::size_t draws = 1000000;
    for (std::size_t column : {1u, 3u, 20u}) {
        std::vector<double> counts(t.size() + 1, 0.0);
        for (std::size_t i = 0; i < draws; ++i) counts[*draw_next_level(t, column, rng)] += 1.0;
        double chi2 = 0.0;
        int cells = 0;
        for (std::size_t k = 1; k <= t.size(); ++k) {
            const double expected = t(k, column) * draws;
            if (expected == 0.0) {
                CHECK(counts[k] == 0.0);
                continue;
            }
            chi2 += (counts[k] - expected) * (counts[k] - expected) / expected;
            ++cells;
        }
        // at most 8 degrees of freedom; 40 is far in the tail
        CHECK(cells <= 9);
        CHECK(chi2 < 40.0);
    }
}
