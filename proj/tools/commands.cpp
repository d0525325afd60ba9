#include "commands.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>

#include "collide_charge/core.hpp"
#include "collide_charge/errors.hpp"
#include "collide_charge/evolve.hpp"
#include "collide_charge/markov.hpp"
#include "collide_charge/parallel.hpp"
#include "collide_charge/sampling.hpp"
#include "collide_charge/transition.hpp"

namespace collide_charge::cli {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Second-law flag threshold for late ergotropy growth of passive fuel.
constexpr double kViolationGrowth = 1e-6;
constexpr int kStationaryDoublings = 4;

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

std::ofstream open_output(const fs::path& path) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot write " + path.string());
    return os;
}

fs::path prepare_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory " + dir + ": " + ec.message());
    return fs::path(dir);
}

std::string json_scalar(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_number_integer() || v.is_number_unsigned()) return v.dump();
    if (v.is_number_float()) return fmt(v.get<double>());
    throw ValidationError("config values must be scalars or arrays of scalars");
}

// Fills options that were not given on the command line from a JSON
// object keyed by long option names.
void apply_config(CLI::App& sub, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read config " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ValidationError("config must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        if (key == "config") continue;
        CLI::Option* opt = sub.get_option_no_throw("--" + key);
        if (opt == nullptr) throw ValidationError("unknown config key '" + key + "' for " + sub.get_name());
        if (opt->count() > 0) continue;
        std::vector<std::string> results;
        if (value.is_array()) {
            for (const auto& item : value) results.push_back(json_scalar(item));
        } else {
            results.push_back(json_scalar(value));
        }
        opt->add_result(results);
        opt->run_callback();
    }
}

json resolved_config(const CLI::App& sub) {
    json j = json::object();
    for (const CLI::Option* opt : sub.get_options()) {
        if (opt->get_lnames().empty()) continue;
        const std::string name = opt->get_lnames().front();
        if (name == "help" || name == "config") continue;
        const auto& r = opt->results();
        if (r.empty()) {
            if (!opt->get_default_str().empty()) j[name] = opt->get_default_str();
        } else if (r.size() == 1) {
            j[name] = r.front();
        } else {
            j[name] = r;
        }
    }
    return j;
}

void echo_config(const CLI::App& sub, const fs::path& dir) {
    auto os = open_output(dir / (sub.get_name() + "_resolved_config.json"));
    os << resolved_config(sub).dump(2) << '\n';
}

std::optional<StateClass> parse_constraint(const std::string& s) {
    if (s == "passive") return StateClass::StrictlyPassive;
    if (s == "active") return StateClass::Active;
    if (s == "mixed") return StateClass::MaximallyMixed;
    if (s == "none") return std::nullopt;
    throw ValidationError("constraint must be passive, active, mixed or none");
}

QubitSwapParams parse_alpha(const std::string& spec, std::size_t last_shell) {
    if (spec == "harmonic") return QubitSwapParams::harmonic(last_shell);
    if (spec.rfind("const:", 0) == 0) {
        double a = 0.0;
        try {
            a = std::stod(spec.substr(6));
        } catch (const std::exception&) {
            throw ValidationError("bad alpha profile '" + spec + "'");
        }
        return QubitSwapParams::constant(a, last_shell);
    }
    throw ValidationError("alpha profile must be const:<value> or harmonic");
}

TransitionFactory full_swap_factory(const QuditState& xi) {
    return [xi](std::size_t n) { return qubit_transition_matrix(QubitSwapParams::constant(1.0, n + 1), xi, n); };
}

// ---------------------------------------------------------------- regimes

struct RegimesOptions {
    std::vector<double> fuel;
    std::vector<std::size_t> steps{10, 100, 1000};
    std::size_t levels = 200;
    std::string out = ".";
};

int cmd_regimes(const CLI::App& sub, RegimesOptions o, std::ostream& out) {
    std::vector<QuditState> fuels;
    if (o.fuel.empty()) {
        fuels = {QuditState({0.7, 0.3}), QuditState({0.5, 0.5}), QuditState({0.3, 0.7})};
    } else {
        if (o.fuel.size() != 2) throw ValidationError("--fuel takes s1 s2");
        fuels.emplace_back(o.fuel);
    }
    if (o.steps.empty()) throw ValidationError("--steps needs at least one step count");
    if (o.levels < 2) throw ValidationError("--levels must be >= 2");
    std::sort(o.steps.begin(), o.steps.end());
    o.steps.erase(std::unique(o.steps.begin(), o.steps.end()), o.steps.end());

    const fs::path dir = prepare_dir(o.out);
    echo_config(sub, dir);
    for (const QuditState& xi : fuels) {
        const ChainClass verdict = classify_qubit_chain(QubitSwapParams::constant(1.0, 2), xi);
        EvolveOptions eo;
        eo.snapshot_at = o.steps;
        const Trajectory traj =
            evolve_autogrow(full_swap_factory(xi), BatteryDistribution::delta(1, o.levels), o.steps.back(), eo);

        const std::string label = to_string(verdict.verdict);
        {
            auto os = open_output(dir / ("regimes_" + label + "_trajectory.csv"));
            write_trajectory_csv(os, traj);
        }
        {
            auto os = open_output(dir / ("regimes_" + label + "_snapshots.csv"));
            write_snapshots_csv(os, traj);
        }
        out << "fuel " << fmt(xi.level_prob(1)) << ' ' << fmt(xi.level_prob(2)) << ": " << label << '\n';
        for (std::size_t step : o.steps) {
            const auto& r = traj.records[step];
            out << "  step " << step << " mean_energy " << fmt(r.mean_energy) << " ergotropy " << fmt(r.ergotropy)
                << " leaked_mass " << fmt(r.leaked_mass) << '\n';
        }
    }
    return kSuccess;
}

// --------------------------------------------------------------- ensemble

struct EnsembleOptions {
    std::size_t dim = 5;
    std::size_t runs = 20;
    std::size_t steps = 5000;
    std::size_t initial_level = 1;
    std::size_t levels = 200;
    std::optional<std::uint64_t> seed;
    std::string state_class = "stratified";
    std::string out = ".";
};

constexpr StateClass kStrata[] = {StateClass::StrictlyPassive, StateClass::Active, StateClass::MaximallyMixed};

int cmd_ensemble(const CLI::App& sub, const EnsembleOptions& o, std::ostream& out) {
    if (!o.seed) throw ValidationError("ensemble needs --seed");
    if (o.dim < 2) throw ValidationError("--dim must be >= 2");
    if (o.runs < 1) throw ValidationError("--runs must be >= 1");
    if (o.levels < o.initial_level || o.initial_level < 1) throw ValidationError("--initial-level outside --levels");

    std::optional<StateClass> fixed_class;
    if (o.state_class != "stratified") {
        fixed_class = parse_constraint(o.state_class);
        if (!fixed_class) throw ValidationError("--state-class must be stratified, passive, active or mixed");
    }

    struct Run {
        StateClass cls = StateClass::Active;
        std::vector<double> fuel;
        std::vector<TrajectoryRecord> records;
    };
    std::vector<Run> runs(o.runs);
    parallel_chunks(o.runs, [&](std::size_t, std::size_t begin, std::size_t end) {
        for (std::size_t r = begin; r < end; ++r) {
            SamplerConfig config;
            config.master_seed = derive_seed(*o.seed, r);
            config.qudit_dim = o.dim;
            const StateClass cls = fixed_class ? *fixed_class : kStrata[r % 3];
            config.state_class_constraint = cls;
            const QuditState xi = random_qudit_state(config);
            const TransitionFactory factory = [config, xi](std::size_t n) mutable {
                config.n_shells = n + config.qudit_dim - 1;
                return build_transition_matrix(random_bistochastic_spec(config), xi, n);
            };
            Trajectory traj = evolve_autogrow(factory, BatteryDistribution::delta(o.initial_level, o.levels), o.steps);
            runs[r].cls = cls;
            runs[r].fuel.assign(xi.probs().begin(), xi.probs().end());
            runs[r].records = std::move(traj.records);
        }
    });

    const fs::path dir = prepare_dir(o.out);
    echo_config(sub, dir);
    {
        auto os = open_output(dir / "ensemble.csv");
        os << "run,step,state_class,mean_energy,ergotropy,leaked_mass\n";
        os.precision(17);
        for (std::size_t r = 0; r < runs.size(); ++r) {
            for (const auto& rec : runs[r].records) {
                os << r << ',' << rec.step << ',' << to_string(runs[r].cls) << ',' << rec.mean_energy << ','
                   << rec.ergotropy << ',' << rec.leaked_mass << '\n';
            }
        }
    }
    {
        auto os = open_output(dir / "ensemble_fuel.csv");
        os << "run,level,prob\n";
        os.precision(17);
        for (std::size_t r = 0; r < runs.size(); ++r) {
            for (std::size_t i = 0; i < runs[r].fuel.size(); ++i) os << r << ',' << i + 1 << ',' << runs[r].fuel[i] << '\n';
        }
    }

    std::size_t candidates = 0;
    const std::size_t early_step = o.steps / 10;
    for (std::size_t r = 0; r < runs.size(); ++r) {
        const double early = runs[r].records[early_step].ergotropy;
        const double final = runs[r].records.back().ergotropy;
        const double growth = final - early;
        const bool passive = runs[r].cls != StateClass::Active;
        const bool violation = passive && growth > kViolationGrowth;
        candidates += violation ? 1 : 0;
        out << "run=" << r << " class=" << to_string(runs[r].cls) << " early_ergotropy=" << fmt(early)
            << " final_ergotropy=" << fmt(final) << " growth=" << fmt(growth)
            << " violation=" << (violation ? "yes" : "no") << '\n';
    }
    out << "violation_candidates=" << candidates << '\n';
    return kSuccess;
}

// ------------------------------------------------------------- stationary

struct StationaryOptions {
    std::size_t dim = 5;
    std::optional<std::uint64_t> seed_a;
    std::optional<std::uint64_t> seed_b;
    std::optional<std::uint64_t> fuel_seed;
    std::size_t levels = 200;
    std::string out = ".";
};

int cmd_stationary(const CLI::App& sub, const StationaryOptions& o, std::ostream& out) {
    if (!o.seed_a || !o.seed_b) throw ValidationError("stationary needs --seed-a and --seed-b");
    if (o.dim < 2) throw ValidationError("--dim must be >= 2");

    SamplerConfig fuel_config;
    fuel_config.master_seed = o.fuel_seed ? *o.fuel_seed : derive_seed(*o.seed_a, *o.seed_b);
    fuel_config.qudit_dim = o.dim;
    fuel_config.state_class_constraint = StateClass::StrictlyPassive;
    const QuditState xi = random_qudit_state(fuel_config);

    // A slowly decaying fixed point can reach the edge of the first
    // truncation; the window doubles a few times before giving up.
    auto fixed_point = [&](std::uint64_t seed, std::size_t levels) {
        SamplerConfig config;
        config.master_seed = seed;
        config.qudit_dim = o.dim;
        config.n_shells = levels + o.dim - 1;
        const TransitionMatrix t = build_transition_matrix(random_bistochastic_spec(config), xi, levels);
        return stationary_distribution(t);
    };
    std::size_t levels = o.levels;
    std::optional<BatteryDistribution> found_a, found_b;
    for (int attempt = 0;; ++attempt) {
        StationaryResult ra = fixed_point(*o.seed_a, levels);
        StationaryResult rb = fixed_point(*o.seed_b, levels);
        if (ra.distribution && rb.distribution) {
            found_a = std::move(ra.distribution);
            found_b = std::move(rb.distribution);
            break;
        }
        if (attempt == kStationaryDoublings) {
            const StationaryResult& bad = ra.distribution ? rb : ra;
            throw ConvergenceFailure("no fixed point up to " + std::to_string(levels) + " levels: escaped mass " +
                                         fmt(bad.escaped_mass),
                                     bad.residual);
        }
        levels *= 2;
    }
    const BatteryDistribution& pa = *found_a;
    const BatteryDistribution& pb = *found_b;

    const fs::path dir = prepare_dir(o.out);
    echo_config(sub, dir);
    {
        auto os = open_output(dir / "stationary.csv");
        os << "level,prob_a,prob_b\n";
        os.precision(17);
        for (std::size_t k = 1; k <= pa.size(); ++k) os << k << ',' << pa.level_prob(k) << ',' << pb.level_prob(k) << '\n';
    }
    {
        auto os = open_output(dir / "fuel.csv");
        os << "level,prob\n";
        os.precision(17);
        for (std::size_t i = 1; i <= xi.dim(); ++i) os << i << ',' << xi.level_prob(i) << '\n';
    }
    out << "fuel_class=" << to_string(classify_state(xi)) << '\n';
    out << "levels=" << levels << '\n';
    out << "tv_distance=" << fmt(tv_distance(pa, pb)) << '\n';
    out << "ergotropy_a=" << fmt(ergotropy(pa).value) << '\n';
    out << "ergotropy_b=" << fmt(ergotropy(pb).value) << '\n';
    out << "leaked_a=" << fmt(pa.leaked_mass()) << '\n';
    out << "leaked_b=" << fmt(pb.leaked_mass()) << '\n';
    return kSuccess;
}

// --------------------------------------------------------------- classify

struct ClassifyOptions {
    std::vector<double> qubit;
    std::string alpha = "const:1";
    std::string matrix;
    std::size_t levels = 4000;
    std::size_t origin = 1;
    std::uint64_t trials = 10000;
    std::vector<std::uint64_t> horizons{1000, 10000, 100000};
    std::uint64_t seed = 1;
    bool force_empirical = false;
    std::string report;
};

int cmd_classify(const ClassifyOptions& o, std::ostream& out) {
    if (o.qubit.empty() == o.matrix.empty()) throw ValidationError("classify needs exactly one of --qubit or --matrix");
    EstimationBudget budget;
    budget.horizons = o.horizons;
    budget.trials = o.trials;
    budget.seed = o.seed;

    std::ostringstream report;
    if (!o.qubit.empty()) {
        if (o.qubit.size() != 2) throw ValidationError("--qubit takes s1 s2");
        const QuditState xi(o.qubit);
        const QubitSwapParams params = parse_alpha(o.alpha, o.levels + 1);
        const ChainClass analytic = classify_qubit_chain(params, xi);
        report << "[analytic]\n";
        write_classification_report(report, analytic);
        if (!analytic.analytic || o.force_empirical) {
            const ChainClass empirical = classify_empirical(qubit_transition_matrix(params, xi, o.levels), o.origin, budget);
            report << "[empirical]\n";
            write_classification_report(report, empirical);
        }
    } else {
        std::ifstream in(o.matrix);
        if (!in) throw IoError("cannot read " + o.matrix);
        const TransitionMatrix t = read_transition_matrix(in);
        const ChainClass empirical = classify_empirical(t, o.origin, budget);
        report << "[empirical]\n";
        write_classification_report(report, empirical);
    }
    out << report.str();
    if (!o.report.empty()) {
        auto os = open_output(o.report);
        os << report.str();
    }
    return kSuccess;
}

// ----------------------------------------------------------------- sample

struct SampleOptions {
    std::size_t dim = 3;
    std::optional<std::uint64_t> seed;
    std::size_t levels = 50;
    std::string kind = "bistochastic";
    std::string constraint = "passive";
    std::string out = ".";
};

int cmd_sample(const CLI::App& sub, const SampleOptions& o, std::ostream& out) {
    if (!o.seed) throw ValidationError("sample needs --seed");
    SamplerConfig config;
    config.master_seed = *o.seed;
    config.qudit_dim = o.dim;
    config.n_shells = o.levels + o.dim - 1;
    config.state_class_constraint = parse_constraint(o.constraint);
    const QuditState xi = random_qudit_state(config);
    BlockSpec spec = [&] {
        if (o.kind == "bistochastic") return random_bistochastic_spec(config);
        if (o.kind == "unitary") return random_unitary_spec(config);
        throw ValidationError("--kind must be bistochastic or unitary");
    }();
    const TransitionMatrix t = build_transition_matrix(spec, xi, o.levels);

    const fs::path dir = prepare_dir(o.out);
    echo_config(sub, dir);
    {
        auto os = open_output(dir / "transition.txt");
        write_transition_matrix(os, t);
    }
    {
        auto os = open_output(dir / "fuel.csv");
        os << "level,prob\n";
        os.precision(17);
        for (std::size_t i = 1; i <= xi.dim(); ++i) os << i << ',' << xi.level_prob(i) << '\n';
    }
    out << "fuel_class=" << to_string(classify_state(xi)) << '\n';
    out << "fuel=";
    for (std::size_t i = 1; i <= xi.dim(); ++i) out << (i > 1 ? " " : "") << fmt(xi.level_prob(i));
    out << '\n' << "levels=" << t.size() << " irreducible=" << (check_irreducible(t) ? "true" : "false") << '\n';
    return kSuccess;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Repeated collision charging of an oscillator battery"};
    app.require_subcommand(1);
    app.option_defaults()->always_capture_default();

    std::string config_path;
    auto add_config = [&](CLI::App* sub) { sub->add_option("--config", config_path, "JSON file of option values"); };

    RegimesOptions regimes;
    auto* sub_regimes = app.add_subcommand("regimes", "Snapshots of the three qubit charging regimes");
    sub_regimes->add_option("--fuel", regimes.fuel, "Single fuel s1 s2 (default: the three canonical fuels)")->expected(2);
    sub_regimes->add_option("--steps", regimes.steps, "Step counts to snapshot");
    sub_regimes->add_option("--levels", regimes.levels, "Initial truncation");
    sub_regimes->add_option("--out", regimes.out, "Output directory");
    add_config(sub_regimes);

    EnsembleOptions ensemble;
    auto* sub_ensemble = app.add_subcommand("ensemble", "Ergotropy trajectories for random bistochastic collisions");
    sub_ensemble->add_option("--dim", ensemble.dim, "Fuel dimension d");
    sub_ensemble->add_option("--runs", ensemble.runs, "Number of runs (stratified passive/active/mixed)");
    sub_ensemble->add_option("--steps", ensemble.steps, "Collisions per run");
    sub_ensemble->add_option("--seed", ensemble.seed, "Master seed");
    sub_ensemble->add_option("--initial-level", ensemble.initial_level, "Initial pure battery level");
    sub_ensemble->add_option("--levels", ensemble.levels, "Initial truncation");
    sub_ensemble->add_option("--state-class", ensemble.state_class, "stratified, passive, active or mixed");
    sub_ensemble->add_option("--out", ensemble.out, "Output directory");
    add_config(sub_ensemble);

    StationaryOptions stationary;
    auto* sub_stationary = app.add_subcommand("stationary", "Fixed points of two random collisions with one passive fuel");
    sub_stationary->add_option("--dim", stationary.dim, "Fuel dimension d");
    sub_stationary->add_option("--seed-a", stationary.seed_a, "Seed of the first collision");
    sub_stationary->add_option("--seed-b", stationary.seed_b, "Seed of the second collision");
    sub_stationary->add_option("--fuel-seed", stationary.fuel_seed, "Seed of the passive fuel");
    sub_stationary->add_option("--levels", stationary.levels, "Truncation");
    sub_stationary->add_option("--out", stationary.out, "Output directory");
    add_config(sub_stationary);

    ClassifyOptions classify;
    auto* sub_classify = app.add_subcommand("classify", "Transient / positive- / null-recurrent verdict");
    sub_classify->add_option("--qubit", classify.qubit, "Qubit fuel s1 s2")->expected(2);
    sub_classify->add_option("--alpha", classify.alpha, "Swap weights: const:<a> or harmonic");
    sub_classify->add_option("--matrix", classify.matrix, "Serialized transition matrix");
    sub_classify->add_option("--levels", classify.levels, "Truncation for the empirical estimator");
    sub_classify->add_option("--origin", classify.origin, "Return level");
    sub_classify->add_option("--trials", classify.trials, "Monte Carlo trials");
    sub_classify->add_option("--horizons", classify.horizons, "Ascending horizon ladder");
    sub_classify->add_option("--seed", classify.seed, "Monte Carlo seed");
    sub_classify->add_flag("--force-empirical", classify.force_empirical, "Run the estimator even with an analytic verdict");
    sub_classify->add_option("--report", classify.report, "Also write the report here");
    add_config(sub_classify);

    SampleOptions sample;
    auto* sub_sample = app.add_subcommand("sample", "Draw a random collision and fuel, write T and the fuel");
    sub_sample->add_option("--dim", sample.dim, "Fuel dimension d");
    sub_sample->add_option("--seed", sample.seed, "Master seed");
    sub_sample->add_option("--levels", sample.levels, "Truncation N");
    sub_sample->add_option("--kind", sample.kind, "bistochastic or unitary");
    sub_sample->add_option("--constraint", sample.constraint, "passive, active, mixed or none");
    sub_sample->add_option("--out", sample.out, "Output directory");
    add_config(sub_sample);

    std::vector<const char*> argv{"collide-charge"};
    for (const auto& a : args) argv.push_back(a.c_str());

    try {
        try {
            app.parse(static_cast<int>(argv.size()), argv.data());
        } catch (const CLI::CallForHelp& e) {
            out << app.help();
            return kSuccess;
        } catch (const CLI::ParseError& e) {
            err << "error: " << e.what() << '\n';
            return kValidation;
        }
        CLI::App* sub = app.get_subcommands().front();
        if (!config_path.empty()) apply_config(*sub, config_path);

        if (sub == sub_regimes) return cmd_regimes(*sub, regimes, out);
        if (sub == sub_ensemble) return cmd_ensemble(*sub, ensemble, out);
        if (sub == sub_stationary) return cmd_stationary(*sub, stationary, out);
        if (sub == sub_classify) return cmd_classify(classify, out);
        return cmd_sample(*sub, sample, out);
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kValidation;
    } catch (const ValidationError& e) {
        err << "validation error: " << e.what() << '\n';
        return kValidation;
    } catch (const TruncationOverflow& e) {
        err << "truncation overflow: " << e.what() << '\n';
        return kTruncationOverflow;
    } catch (const ConvergenceFailure& e) {
        err << "convergence failure: " << e.what() << '\n';
        return kConvergenceFailure;
    } catch (const ReducibleChain& e) {
        err << "reducible chain: " << e.what() << '\n';
        return kReducibleChain;
    } catch (const IoError& e) {
        err << "i/o error: " << e.what() << '\n';
        return kIoError;
    } catch (const fs::filesystem_error& e) {
        err << "i/o error: " << e.what() << '\n';
        return kIoError;
    }
}

}  // namespace collide_charge::cli
