#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "collide_charge/core.hpp"
#include "collide_charge/transition.hpp"
#include "commands.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using collide_charge::cli::run;

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result invoke(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = run(args, out, err);
    return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
    const char* root = std::getenv("TEST_SCRATCH");
    fs::path dir = root ? fs::path(root) : fs::temp_directory_path() / "collide_charge_cli_tests";
    dir /= name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Rows of a CSV as column-name -> string maps.
std::vector<std::map<std::string, std::string>> read_csv(const fs::path& p) {
    std::ifstream in(p);
    REQUIRE(in);
    std::string line;
    std::getline(in, line);
    std::vector<std::string> header;
    {
        std::istringstream hs(line);
        std::string cell;
        while (std::getline(hs, cell, ',')) header.push_back(cell);
    }
    std::vector<std::map<std::string, std::string>> rows;
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::map<std::string, std::string> row;
        std::string cell;
        for (const auto& name : header) {
            std::getline(ls, cell, ',');
            row[name] = cell;
        }
        rows.push_back(row);
    }
    return rows;
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

}  // namespace

TEST_CASE("help and bad invocations") {
    CHECK(invoke({"--help"}).code == 0);
    CHECK(invoke({}).code == 2);
    CHECK(invoke({"nonsense"}).code == 2);
    CHECK(invoke({"regimes", "--levels", "abc"}).code == 2);
    CHECK(invoke({"regimes", "--fuel", "0.6", "0.6"}).code == 2);
}

TEST_CASE("regimes writes the three regimes") {
    const auto dir = scratch("regimes");
    const auto r = invoke({"regimes", "--out", dir.string()});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("positive-recurrent") != std::string::npos);
    CHECK(r.out.find("null-recurrent") != std::string::npos);
    CHECK(r.out.find("transient") != std::string::npos);
    CHECK(fs::exists(dir / "regimes_resolved_config.json"));

    // Gibbs snapshot at the last step
    std::vector<double> late;
    for (const auto& row : read_csv(dir / "regimes_positive-recurrent_snapshots.csv")) {
        if (row.at("step") == "1000") late.push_back(std::stod(row.at("prob")));
    }
    CHECK(oracle::tv(late, oracle::geometric(3.0 / 7.0, late.size())) < 1e-6);

    // null regime: no ergotropy at the recorded steps
    std::map<std::size_t, std::vector<double>> null_snaps;
    for (const auto& row : read_csv(dir / "regimes_null-recurrent_snapshots.csv")) {
        null_snaps[std::stoul(row.at("step"))].push_back(std::stod(row.at("prob")));
    }
    REQUIRE(null_snaps.size() == 3);
    for (const auto& [step, probs] : null_snaps) CHECK(collide_charge::ergotropy(probs).value < 1e-9);

    // transient regime: energy grows across the recorded steps
    const auto traj = read_csv(dir / "regimes_transient_trajectory.csv");
    REQUIRE(traj.size() == 1001);
    double previous = 0.0;
    for (std::size_t step : {10u, 100u, 1000u}) {
        const double e = std::stod(traj[step].at("mean_energy"));
        CHECK(e > previous);
        previous = e;
    }
}

TEST_CASE("config file fills options that flags leave open") {
    const auto dir = scratch("config");
    {
        std::ofstream cfg(dir / "cfg.json");
        cfg << R"({"fuel": [0.7, 0.3], "steps": [5, 50], "levels": 300, "out": ")" << (dir / "a").string() << "\"}";
    }
    const auto r = invoke({"regimes", "--config", (dir / "cfg.json").string(), "--levels", "250"});
    REQUIRE(r.code == 0);
    const std::string resolved = slurp(dir / "a" / "regimes_resolved_config.json");
    CHECK(resolved.find("\"levels\": \"250\"") != std::string::npos);
    CHECK(resolved.find("\"5\"") != std::string::npos);
    CHECK(r.out.find("step 50 ") != std::string::npos);
    CHECK(r.out.find("step 1000 ") == std::string::npos);

    {
        std::ofstream cfg(dir / "bad.json");
        cfg << R"({"levles": 10})";
    }
    CHECK(invoke({"regimes", "--config", (dir / "bad.json").string()}).code == 2);
    {
        std::ofstream cfg(dir / "broken.json");
        cfg << "{";
    }
    CHECK(invoke({"regimes", "--config", (dir / "broken.json").string()}).code == 2);
    CHECK(invoke({"regimes", "--config", (dir / "missing.json").string()}).code == 1);
}

TEST_CASE("ensemble summary, determinism and CSV round trip") {
    const auto dir = scratch("ensemble");
    CHECK(invoke({"ensemble", "--out", (dir / "noseed").string()}).code == 2);

    const std::vector<std::string> args{"ensemble", "--dim", "4", "--runs", "6", "--steps", "600", "--seed", "11"};
    auto first = args, second = args;
    first.insert(first.end(), {"--out", (dir / "a").string()});
    second.insert(second.end(), {"--out", (dir / "b").string()});
    const auto a = invoke(first);
    const auto b = invoke(second);
    REQUIRE(a.code == 0);
    REQUIRE(b.code == 0);
    CHECK(slurp(dir / "a" / "ensemble.csv") == slurp(dir / "b" / "ensemble.csv"));
    CHECK(a.out == b.out);
    CHECK(a.out.find("violation_candidates=0") != std::string::npos);

    // recompute the printed summary from the CSV
    std::map<std::size_t, std::map<std::size_t, std::map<std::string, std::string>>> by_run;
    for (const auto& row : read_csv(dir / "a" / "ensemble.csv")) {
        by_run[std::stoul(row.at("run"))][std::stoul(row.at("step"))] = row;
    }
    REQUIRE(by_run.size() == 6);
    std::ostringstream expected;
    std::size_t candidates = 0;
    for (const auto& [run_index, rows] : by_run) {
        REQUIRE(rows.size() == 601);
        const double early = std::stod(rows.at(60).at("ergotropy"));
        const double final = std::stod(rows.at(600).at("ergotropy"));
        const std::string cls = rows.at(0).at("state_class");
        const bool violation = cls != "active" && final - early > 1e-6;
        candidates += violation;
        expected << "run=" << run_index << " class=" << cls << " early_ergotropy=" << fmt(early)
                 << " final_ergotropy=" << fmt(final) << " growth=" << fmt(final - early)
                 << " violation=" << (violation ? "yes" : "no") << '\n';
    }
    expected << "violation_candidates=" << candidates << '\n';
    CHECK(a.out == expected.str());
}

TEST_CASE("single maximally mixed run diffuses without ergotropy") {
    const auto dir = scratch("mixed");
    const auto r = invoke({"ensemble", "--dim", "3", "--runs", "1", "--steps", "2000", "--seed", "4", "--state-class",
                           "mixed", "--out", dir.string()});
    REQUIRE(r.code == 0);
    const auto rows = read_csv(dir / "ensemble.csv");
    REQUIRE(rows.size() == 2001);
    for (const auto& row : rows) {
        CHECK(row.at("state_class") == "mixed");
        CHECK(std::stod(row.at("ergotropy")) < 1e-6);
    }
    for (std::size_t i = 101; i < rows.size(); ++i) {
        CHECK(std::stod(rows[i].at("mean_energy")) > std::stod(rows[i - 1].at("mean_energy")));
    }
    CHECK(invoke({"ensemble", "--seed", "1", "--state-class", "odd", "--out", dir.string()}).code == 2);
}

TEST_CASE("stationary fixed points") {
    const auto dir = scratch("stationary");
    CHECK(invoke({"stationary", "--seed-a", "1", "--out", dir.string()}).code == 2);

    const auto r = invoke({"stationary", "--dim", "5", "--seed-a", "3", "--seed-b", "4", "--out", dir.string()});
    REQUIRE(r.code == 0);
    const auto rows = read_csv(dir / "stationary.csv");
    std::vector<double> pa, pb;
    for (const auto& row : rows) {
        pa.push_back(std::stod(row.at("prob_a")));
        pb.push_back(std::stod(row.at("prob_b")));
    }
    CHECK(collide_charge::ergotropy(pa).value < 1e-8);
    CHECK(collide_charge::ergotropy(pb).value < 1e-8);
    CHECK(r.out.find("tv_distance=" + fmt(oracle::tv(pa, pb))) != std::string::npos);

    // a qubit fuel forgets the collision: both are geometric with ratio s2/s1
    const auto q = invoke({"stationary", "--dim", "2", "--seed-a", "5", "--seed-b", "6", "--fuel-seed", "3", "--out",
                           (dir / "q").string()});
    REQUIRE(q.code == 0);
    const auto fuel = read_csv(dir / "q" / "fuel.csv");
    const double ratio = std::stod(fuel[1].at("prob")) / std::stod(fuel[0].at("prob"));
    std::vector<double> qa, qb;
    for (const auto& row : read_csv(dir / "q" / "stationary.csv")) {
        qa.push_back(std::stod(row.at("prob_a")));
        qb.push_back(std::stod(row.at("prob_b")));
    }
    const auto gibbs = oracle::geometric(ratio, qa.size());
    CHECK(oracle::tv(qa, qb) < 1e-8);
    CHECK(oracle::tv(qa, gibbs) < 1e-8);
}

TEST_CASE("classify verdicts and exit codes") {
    const auto pr = invoke({"classify", "--qubit", "0.7", "0.3", "--alpha", "const:1"});
    REQUIRE(pr.code == 0);
    CHECK(pr.out.find("verdict: positive-recurrent") != std::string::npos);
    const auto null = invoke({"classify", "--qubit", "0.5", "0.5"});
    REQUIRE(null.code == 0);
    CHECK(null.out.find("verdict: null-recurrent") != std::string::npos);
    CHECK(invoke({"classify", "--qubit", "0.7", "0.3", "--alpha", "weird"}).code == 2);
    CHECK(invoke({"classify"}).code == 2);
    CHECK(invoke({"classify", "--qubit", "0.7", "0.3", "--alpha", "const:0"}).code == 5);

    const auto dir = scratch("classify");
    {
        std::ofstream os(dir / "identity.txt");
        collide_charge::write_transition_matrix(os, collide_charge::TransitionMatrix::identity(6));
    }
    CHECK(invoke({"classify", "--matrix", (dir / "identity.txt").string()}).code == 5);
    CHECK(invoke({"classify", "--matrix", (dir / "absent.txt").string()}).code == 1);

    const auto forced = invoke({"classify", "--qubit", "0.3", "0.7", "--levels", "400", "--trials", "2000",
                                "--horizons", "100", "1000", "--force-empirical", "--report",
                                (dir / "report.txt").string()});
    REQUIRE(forced.code == 0);
    CHECK(forced.out.find("[empirical]") != std::string::npos);
    CHECK(slurp(dir / "report.txt") == forced.out);
}

TEST_CASE("sample writes a matrix that classify can read") {
    const auto dir = scratch("sample");
    CHECK(invoke({"sample", "--out", dir.string()}).code == 2);
    const auto s = invoke({"sample", "--seed", "8", "--dim", "3", "--levels", "300", "--constraint", "passive", "--out",
                           dir.string()});
    REQUIRE(s.code == 0);
    CHECK(s.out.find("fuel_class=passive") != std::string::npos);
    std::ifstream in(dir / "transition.txt");
    const auto t = collide_charge::read_transition_matrix(in);
    CHECK(t.size() == 300);
    CHECK(t.qudit_dim() == 3);
    const auto c = invoke({"classify", "--matrix", (dir / "transition.txt").string(), "--trials", "2000", "--horizons",
                           "100", "1000", "10000"});
    REQUIRE(c.code == 0);
    CHECK(c.out.find("verdict: positive-recurrent") != std::string::npos);
    CHECK(invoke({"sample", "--seed", "8", "--kind", "other", "--out", dir.string()}).code == 2);
    CHECK(invoke({"sample", "--seed", "8", "--kind", "unitary", "--constraint", "active", "--out", dir.string()}).code == 0);
}
