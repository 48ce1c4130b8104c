// Command-line front end: simulate, fit, enumerate, montecarlo,
// trajectories, kappa.

#include "gmmtvc/io.hpp"
#include "gmmtvc/report.hpp"
#include "gmmtvc/simulation.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <iostream>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace {

using namespace gmmtvc;
using nlohmann::json;

constexpr int kExitValidation = 1;
constexpr int kExitFitFailure = 2;
constexpr int kExitPartial = 3;

struct Options {
    std::string data;
    bool long_format = false;
    int classes = 2;
    std::string form = "bilinear";
    std::string decomposition = "slopes";
    int starts = 1;
    int attempts = 10;
    std::uint64_t seed = 1;
    int reps = 100;
    int jobs = 1;
    std::string out;
    std::string condition;
    std::string preset;
    bool standardize_tvc = false;
    bool no_tic = false;
    bool no_tvc = false;
    int gating_tics = 2;
    bool truth_start = false;
    std::string fit_a, fit_b;
    double grid_step = 0.1;
    int bootstrap = 1000;
};

std::string sibling(const std::string& out, const std::string& suffix) {
    std::filesystem::path p(out);
    return (p.parent_path() / (p.stem().string() + suffix)).string();
}

void write_manifest(const std::string& path, const std::string& command, const json& config,
                    const std::vector<std::string>& inputs, const std::vector<std::string>& outputs) {
    json m;
    m["command"] = command;
    m["config"] = config;
    json in = json::array();
    for (const auto& f : inputs) in.push_back({{"path", f}, {"fnv1a64", fnv1a_hex(read_file(f))}});
    m["inputs"] = in;
    json o = json::array();
    for (const auto& f : outputs) o.push_back({{"path", f}, {"fnv1a64", fnv1a_hex(read_file(f))}});
    m["outputs"] = o;
    write_file(path, m.dump(2) + "\n");
}

json config_json(const Options& o, const std::string& command) {
    json c{{"seed", o.seed}, {"jobs", o.jobs}};
    if (command == "simulate") c.update({{"condition", o.condition}, {"preset", o.preset}});
    if (command == "fit" || command == "enumerate")
        c.update({{"data", o.data}, {"long", o.long_format}, {"classes", o.classes}, {"form", o.form},
                  {"decomposition", o.decomposition}, {"starts", o.starts}, {"attempts", o.attempts},
                  {"standardize_tvc", o.standardize_tvc}, {"no_tic", o.no_tic}, {"no_tvc", o.no_tvc},
                  {"gating_tics", o.gating_tics}});
    if (command == "montecarlo")
        c.update({{"condition", o.condition}, {"preset", o.preset}, {"reps", o.reps}, {"attempts", o.attempts},
                  {"truth_start", o.truth_start}, {"form", o.form}, {"classes", o.classes}});
    return c;
}

LongitudinalDataset load_data(const Options& o) {
    LongitudinalDataset d = o.long_format ? read_long_dataset(o.data) : read_dataset(o.data);
    if (o.standardize_tvc) d = standardize_tvc(d);
    return d;
}

ModelSpec spec_from_options(const Options& o) {
    ModelSpec s;
    s.classes = o.classes;
    s.layout.form = form_kind_from_string(o.form);
    s.layout.decomposition = decomposition_from_string(o.decomposition);
    s.layout.has_tic = !o.no_tic;
    s.layout.has_tvc = !o.no_tvc;
    s.gating_tics = o.gating_tics;
    s.validate();
    return s;
}

SimulationCondition load_condition(const Options& o) {
    if (!o.condition.empty()) return condition_from_json(read_file(o.condition));
    if (o.preset == "reference") return reference_condition(1, 1.0, 2, 1.0);
    if (o.preset == "three-class") return three_class_condition(2.0);
    throw ModelError("give --condition PATH or --preset {reference|three-class}");
}

FitOptions fit_options(const Options& o) {
    FitOptions f;
    f.seed = o.seed;
    f.starts = o.starts;
    f.max_attempts = std::max(o.attempts, o.starts);
    return f;
}

int cmd_simulate(const Options& o) {
    const SimulationCondition cond = load_condition(o);
    const auto data = generate_dataset(cond, o.seed);
    if (o.out.empty()) {
        write_dataset(std::cout, data);
        return 0;
    }
    write_dataset(o.out, data);
    const std::string cond_path = sibling(o.out, ".condition.json");
    write_file(cond_path, condition_to_json(cond) + "\n");
    std::vector<std::string> inputs;
    if (!o.condition.empty()) inputs.push_back(o.condition);
    write_manifest(sibling(o.out, ".manifest.json"), "simulate", config_json(o, "simulate"), inputs,
                   {o.out, cond_path});
    std::cerr << "wrote " << data.size() << " individuals to " << o.out << "\n";
    return 0;
}

int cmd_fit(const Options& o) {
    const auto data = load_data(o);
    const ModelSpec spec = spec_from_options(o);
    const FitResult r = fit(data, spec, fit_options(o));
    double tmin = std::numeric_limits<double>::infinity(), tmax = -tmin;
    for (const auto& ind : data.rows) tmin = std::min(tmin, ind.times.minCoeff()), tmax = std::max(tmax, ind.times.maxCoeff());
    const std::string out = o.out.empty() ? "results.json" : o.out;
    const std::string post = sibling(out, ".posterior.csv");
    std::vector<std::string> outputs{out};
    if (r.converged()) {
        write_file(post, posterior_to_csv(r.posterior, data));
        outputs.push_back(post);
    }
    write_file(out, fit_to_json(r, r.converged() ? std::filesystem::path(post).filename().string() : "", tmin, tmax));
    write_manifest(sibling(out, ".manifest.json"), "fit", config_json(o, "fit"), {o.data}, outputs);
    if (!r.converged()) {
        std::cerr << "fit failed after " << r.attempts_used << " attempts: " << r.message << "\n";
        return kExitFitFailure;
    }
    std::cerr << "converged: -2ll " << format_double(-2.0 * r.loglik) << ", BIC " << format_double(r.bic) << "\n";
    return 0;
}

int cmd_enumerate(const Options& o) {
    const auto data = load_data(o);
    ModelSpec tmpl = spec_from_options(o);
    const EnumerationResult e = enumerate_classes(data, tmpl, o.classes, fit_options(o));
    const std::string csv = enumeration_to_csv(e);
    if (o.out.empty()) {
        std::cout << csv;
    } else {
        write_file(o.out, csv);
        write_manifest(sibling(o.out, ".manifest.json"), "enumerate", config_json(o, "enumerate"), {o.data}, {o.out});
    }
    std::cerr << "selected K = " << e.selected << "\n";
    return e.selected == 0 ? kExitFitFailure : 0;
}

int cmd_montecarlo(const Options& o) {
    const SimulationCondition cond = load_condition(o);
    ModelSpec spec = truth_spec(cond);
    MonteCarloOptions mc;
    mc.reps = o.reps;
    mc.seed = o.seed;
    mc.jobs = o.jobs;
    mc.fit.max_attempts = o.attempts;
    mc.truth_start = o.truth_start;
    const MonteCarloRun run = run_condition(cond, spec, mc);
    const std::string out = o.out.empty() ? "montecarlo" : o.out;
    const std::string metrics = out + ".metrics.csv";
    const std::string log = out + ".replications.csv";
    write_file(metrics, metrics_to_csv(run.report));
    write_file(log, records_to_csv(run.records, report_names(spec, cond.waves)));
    std::vector<std::string> inputs;
    if (!o.condition.empty()) inputs.push_back(o.condition);
    write_manifest(out + ".manifest.json", "montecarlo", config_json(o, "montecarlo"), inputs, {metrics, log});
    std::cerr << run.report.reps_used << " converged of " << run.report.reps_attempted << " attempted; mean accuracy "
              << format_double(run.report.mean_accuracy) << "\n";
    return run.report.partial ? kExitPartial : 0;
}

int cmd_trajectories(const Options& o) {
    const StoredFit s = fit_from_json(read_file(o.fit_a));
    if (!s.fit.converged()) throw ModelError("results file holds a failed fit");
    if (!(o.grid_step > 0.0)) throw ModelError("--grid-step must be positive");
    std::vector<double> g;
    for (double t = s.time_min; t <= s.time_max + 1e-12; t += o.grid_step) g.push_back(t);
    const Vec grid = Eigen::Map<const Vec>(g.data(), static_cast<Eigen::Index>(g.size()));
    const std::string csv = trajectories_to_csv(emit_trajectories(s.fit, grid));
    if (o.out.empty())
        std::cout << csv;
    else
        write_file(o.out, csv);
    return 0;
}

PosteriorMatrix posterior_of(const std::string& results_path) {
    const StoredFit s = fit_from_json(read_file(results_path));
    if (s.posterior_file.empty()) throw ModelError(results_path + " has no posterior file");
    const auto p = std::filesystem::path(results_path).parent_path() / s.posterior_file;
    return posterior_from_csv(read_file(p.string()));
}

int cmd_kappa(const Options& o) {
    const PosteriorMatrix a = posterior_of(o.fit_a);
    const PosteriorMatrix b = posterior_of(o.fit_b);
    const KappaResult k = latent_kappa(a, b, o.bootstrap, o.seed);
    json j{{"kappa", k.kappa}, {"lower", k.lower}, {"upper", k.upper}, {"alignment", k.alignment},
           {"bootstrap", o.bootstrap}, {"seed", o.seed}};
    if (o.out.empty())
        std::cout << j.dump(2) << "\n";
    else
        write_file(o.out, j.dump(2) + "\n");
    return 0;
}

void add_model_flags(CLI::App* c, Options& o) {
    c->add_option("--data", o.data, "wide CSV dataset")->required()->check(CLI::ExistingFile);
    c->add_flag("--long", o.long_format, "dataset is in long format");
    c->add_option("--form", o.form, "linear|quadratic|negexp|jenss|bilinear");
    c->add_option("--decomposition", o.decomposition, "slopes|changes");
    c->add_option("--starts", o.starts, "converged solutions to collect (best kept)")->check(CLI::PositiveNumber);
    c->add_option("--attempts", o.attempts, "maximum attempts per fit")->check(CLI::PositiveNumber);
    c->add_option("--seed", o.seed, "random seed");
    c->add_option("--jobs", o.jobs, "threads")->check(CLI::PositiveNumber);
    c->add_option("--out", o.out, "output path");
    c->add_flag("--standardize-tvc", o.standardize_tvc, "standardize x by its baseline mean and sd");
    c->add_flag("--no-tic", o.no_tic, "drop the second-type TIC");
    c->add_flag("--no-tvc", o.no_tvc, "drop the time-varying covariate");
    c->add_option("--gating-tics", o.gating_tics, "first-type TICs in the gating function")->check(CLI::NonNegativeNumber);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Growth mixture models with TICs and a decomposed TVC"};
    app.require_subcommand(1);
    Options o;

    auto* sim = app.add_subcommand("simulate", "generate a dataset from a condition");
    sim->add_option("--condition", o.condition, "condition JSON")->check(CLI::ExistingFile);
    sim->add_option("--preset", o.preset, "reference|three-class");
    sim->add_option("--seed", o.seed, "random seed");
    sim->add_option("--out", o.out, "output CSV (stdout if omitted)");

    auto* fitc = app.add_subcommand("fit", "fit a K-class model");
    add_model_flags(fitc, o);
    fitc->add_option("--classes", o.classes, "number of classes")->check(CLI::PositiveNumber);

    auto* en = app.add_subcommand("enumerate", "fit K = 1..classes and select by BIC (--no-tic --no-tvc --gating-tics 0 for the covariate-free pass)");
    add_model_flags(en, o);
    en->add_option("--classes", o.classes, "largest K")->check(CLI::PositiveNumber);

    auto* mc = app.add_subcommand("montecarlo", "simulation study for one condition");
    mc->add_option("--condition", o.condition, "condition JSON")->check(CLI::ExistingFile);
    mc->add_option("--preset", o.preset, "reference|three-class");
    mc->add_option("--reps", o.reps, "converged replications wanted")->check(CLI::PositiveNumber);
    mc->add_option("--seed", o.seed, "base seed");
    mc->add_option("--jobs", o.jobs, "parallel replications")->check(CLI::PositiveNumber);
    mc->add_option("--attempts", o.attempts, "maximum attempts per fit")->check(CLI::PositiveNumber);
    mc->add_option("--out", o.out, "output prefix");
    mc->add_flag("--truth-start", o.truth_start, "start the first attempt at the generating values");

    auto* tr = app.add_subcommand("trajectories", "class mean curves from a results file");
    tr->add_option("results", o.fit_a, "results JSON")->required()->check(CLI::ExistingFile);
    tr->add_option("--grid-step", o.grid_step, "time step of the grid");
    tr->add_option("--out", o.out, "output CSV (stdout if omitted)");

    auto* ka = app.add_subcommand("kappa", "latent kappa between two fits of the same data");
    ka->add_option("first", o.fit_a, "results JSON")->required()->check(CLI::ExistingFile);
    ka->add_option("second", o.fit_b, "results JSON")->required()->check(CLI::ExistingFile);
    ka->add_option("--reps", o.bootstrap, "bootstrap resamples")->check(CLI::PositiveNumber);
    ka->add_option("--seed", o.seed, "bootstrap seed");
    ka->add_option("--out", o.out, "output JSON (stdout if omitted)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitValidation;
    }

#ifdef _OPENMP
    omp_set_num_threads(o.jobs);
#endif
    try {
        if (*sim) return cmd_simulate(o);
        if (*fitc) return cmd_fit(o);
        if (*en) return cmd_enumerate(o);
        if (*mc) return cmd_montecarlo(o);
        if (*tr) return cmd_trajectories(o);
        if (*ka) return cmd_kappa(o);
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const ModelError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    }
    return kExitValidation;
}
