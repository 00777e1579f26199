#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "cli.hpp"
#include "config.hpp"
#include "symode/bench.hpp"
#include "symode/constraint.hpp"
#include "symode/discover.hpp"
#include "symode/dynamics.hpp"
#include "symode/funclib.hpp"
#include "symode/numeric.hpp"
#include "symode/version.hpp"

namespace symode::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace {

/// Flag values collected by CLI11; unset optionals leave the config file alone.
struct Flags {
    std::string config;
    std::string out;
    int jobs = default_jobs();
    std::optional<std::string> system;
    std::optional<std::string> dataset;
    std::optional<std::string> method;
    std::optional<double> noise;
    std::optional<std::string> noise_kind;
    std::optional<std::uint64_t> seed;
    std::optional<int> steps;
    std::optional<int> degree;
    std::optional<int> runs;
    std::optional<int> samples;
    std::vector<std::string> methods;
    bool no_smooth = false;
};

json load_document(const Flags& f)
{
    json doc = f.config.empty() ? json::object() : read_config_file(f.config);
    if (!doc.is_object()) {
        throw ConfigError("/", "expected an object");
    }
    // flag overrides, written where the schema expects them
    const auto section = [&doc](const char* name) -> json& {
        json& s = doc[name];
        if (s.is_null()) {
            s = json::object();
        }
        if (!s.is_object()) {
            throw ConfigError(std::string("/") + name, "expected an object");
        }
        return s;
    };
    if (f.system) {
        doc["system"] = *f.system;
    }
    if (f.dataset) {
        doc["dataset"] = *f.dataset;
    }
    if (f.method) {
        doc["method"] = *f.method;
    }
    if (f.noise || f.noise_kind) {
        json& n = section("data")["noise"];
        if (n.is_null()) {
            n = json::object();
        }
        if (f.noise) {
            n["sigma"] = *f.noise;
        }
        if (f.noise_kind) {
            n["kind"] = *f.noise_kind;
        }
    }
    if (f.steps) {
        section("data")["steps"] = *f.steps;
    }
    if (f.no_smooth) {
        section("data")["smooth"] = false;
    }
    if (f.seed) {
        section("seeds")["master"] = *f.seed;
    }
    if (f.degree) {
        section("library")["degree"] = *f.degree;
    }
    if (f.runs) {
        section("benchmark")["runs"] = *f.runs;
    }
    if (!f.methods.empty()) {
        section("benchmark")["methods"] = f.methods;
    }
    if (f.samples) {
        section("check")["samples"] = *f.samples;
    }
    if (!f.out.empty()) {
        doc["output"] = f.out;
    }
    return doc;
}

/// Tool version, config hash and master seed, in every artifact.
ojson stamp(const std::string& format, const Config& cfg)
{
    ojson j;
    j["format"] = format;
    j["tool_version"] = std::string(kVersion);
    j["config_hash"] = cfg.hash;
    j["master_seed"] = cfg.seed;
    return j;
}

void write_json(const fs::path& file, const ojson& j)
{
    if (file.has_parent_path()) {
        fs::create_directories(file.parent_path());
    }
    std::ofstream out(file, std::ios::binary);
    out << j.dump(2) << "\n";
    if (!out) {
        throw std::runtime_error(fmt::format("cannot write {}", file.string()));
    }
}

std::string require_output(const Config& cfg)
{
    if (!cfg.output || cfg.output->empty()) {
        throw ConfigError("/output", "an output directory is required (use --out)");
    }
    return *cfg.output;
}

OdeSystem require_system(const Config& cfg)
{
    if (!cfg.system) {
        throw ConfigError("/system", "a registered system is required (use --system)");
    }
    return get_system(*cfg.system);
}

/// Dimension, dynamics and default generators from a registered or ad hoc system.
struct Subject {
    std::string name;
    int dim = 0;
    std::vector<Expr> rhs;
    std::vector<Generator> known;
    std::optional<OdeSystem> system;
};

Subject subject(const Config& cfg)
{
    Subject s;
    if (cfg.equations) {
        s.name = "custom";
        s.dim = static_cast<int>(cfg.equations->size());
        for (const auto& e : *cfg.equations) {
            s.rhs.push_back(parse(e, s.dim));
        }
        return s;
    }
    const OdeSystem sys = require_system(cfg);
    s.name = sys.name;
    s.dim = sys.dim;
    s.rhs = sys.rhs;
    s.known = sys.known_generators;
    s.system = sys;
    return s;
}

std::vector<Generator> generators_for(const Config& cfg, int dim, const std::vector<Generator>& known)
{
    return cfg.generators ? build_generators(*cfg.generators, dim) : known;
}

FunctionLibrary library_for(const Config& cfg, int dim, int degree, bool exps)
{
    return build_library(dim, cfg.degree.value_or(degree), cfg.exponentials.value_or(exps));
}

ojson matrix_json(const Eigen::MatrixXd& M)
{
    ojson rows = ojson::array();
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
        ojson row = ojson::array();
        for (Eigen::Index j = 0; j < M.cols(); ++j) {
            row.push_back(M(i, j));
        }
        rows.push_back(row);
    }
    return rows;
}

ojson term_names(const FunctionLibrary& lib)
{
    ojson out = ojson::array();
    for (const TermKey& t : lib.terms()) {
        out.push_back(term_name(t));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

int cmd_generate(const Config& cfg, int jobs, std::ostream& out)
{
    const OdeSystem system = require_system(cfg);
    const std::string dir = require_output(cfg);
    GenerateOptions opts;
    opts.noise = resolve_noise(cfg, system);
    opts.seed = cfg.seed;
    opts.splits = cfg.splits;
    opts.steps = cfg.steps;
    opts.smooth = cfg.smooth;
    opts.config_hash = cfg.hash;
    opts.jobs = jobs;
    const Dataset data = generate_dataset(system, opts);
    save_dataset(data, dir);
    const long T = data.train.empty() ? 0 : static_cast<long>(data.train.front().length());
    out << fmt::format("{}: {} train / {} val / {} test trajectories, T = {}, dt = {}\n", data.system,
                       data.train.size(), data.val.size(), data.test.size(), T, data.dt);
    out << fmt::format("noise: {} {}{}\n", to_string(data.noise.kind), data.noise.sigma,
                       data.smoothed ? ", smoothed" : "");
    out << fmt::format("config hash {}, seed {}\nwrote {}\n", cfg.hash, cfg.seed, dir);
    return kExitOk;
}

int cmd_nullspace(const Config& cfg, std::ostream& out)
{
    const Subject s = subject(cfg);
    const int degree = s.system ? s.system->library_degree : 2;
    const bool exps = s.system ? s.system->library_exponentials : false;
    const FunctionLibrary lib = library_for(cfg, s.dim, degree, exps);
    const std::vector<Generator> gens = generators_for(cfg, s.dim, s.known);
    if (gens.empty()) {
        throw ConfigError("/generators", "no generators to assemble");
    }
    const EquivariantBasis basis = assemble(lib, gens);
    const auto templates = basis_templates(basis, lib);

    std::string labels;
    for (const Generator& g : gens) {
        labels += (labels.empty() ? "" : ", ") + (g.label().empty() ? std::string("unnamed") : g.label());
    }
    out << fmt::format("system: {}, d = {}, library degree {}, p = {} terms\n", s.name, s.dim,
                       cfg.degree.value_or(degree), lib.size());
    out << fmt::format("generators: {}\n", labels);
    out << fmt::format("r = {}\n", basis.r);
    std::string sv;
    for (Eigen::Index i = 0; i < basis.singular_values.size(); ++i) {
        sv += fmt::format("{}{:.6g}", i == 0 ? "" : " ", basis.singular_values[i]);
    }
    out << "singular values: " << sv << "\n";
    out << fmt::format("gap: smallest kept {:.3e}, largest dropped {:.3e}{}\n", basis.smallest_kept,
                       basis.largest_dropped, basis.rank_stable ? "" : " (rank sensitive to the threshold)");
    for (std::size_t k = 0; k < templates.size(); ++k) {
        out << fmt::format("Q{}:\n", k + 1);
        for (const auto& eq : templates[k]) {
            out << "  " << eq << "\n";
        }
    }

    if (cfg.output) {
        ojson j = stamp("symode-nullspace", cfg);
        j["system"] = s.name;
        j["dim"] = s.dim;
        j["library"] = term_names(lib);
        ojson gl = ojson::array();
        for (const Generator& g : gens) {
            gl.push_back(g.label());
        }
        j["generators"] = gl;
        j["vec"] = "column-major";
        j["r"] = basis.r;
        std::vector<double> svals(basis.singular_values.data(),
                                  basis.singular_values.data() + basis.singular_values.size());
        j["singular_values"] = svals;
        j["Q"] = matrix_json(basis.Q);
        j["templates"] = templates;
        const fs::path file = fs::path(*cfg.output) / "nullspace.json";
        write_json(file, j);
        out << "wrote " << file.string() << "\n";
    }
    return kExitOk;
}

int cmd_check_symmetry(const Config& cfg, std::ostream& out)
{
    const Subject s = subject(cfg);
    const std::vector<Generator> gens = generators_for(cfg, s.dim, s.known);
    if (gens.empty()) {
        throw ConfigError("/generators", "no generators to check");
    }
    Eigen::MatrixXd pts;
    if (cfg.points) {
        if (cfg.points->cols() != s.dim) {
            throw ConfigError("/check/points", "column count does not match the state dimension");
        }
        pts = *cfg.points;
    } else {
        std::mt19937_64 rng(split_seed(cfg.seed, 0));
        std::uniform_real_distribution<double> box(-2.0, 2.0);
        pts.resize(cfg.samples, s.dim);
        for (int n = 0; n < cfg.samples; ++n) {
            if (s.system) {
                pts.row(n) = sample_initial(*s.system, rng).transpose();
            } else {
                for (int i = 0; i < s.dim; ++i) {
                    pts(n, i) = box(rng);
                }
            }
        }
    }
    const ExprDynamics h(s.rhs);
    bool all = true;
    ojson results = ojson::array();
    for (const Generator& g : gens) {
        const CriterionReport r = check_infinitesimal_criterion(h, g, pts, cfg.tol);
        all = all && r.consistent;
        out << fmt::format("{}: max residual {:.3e}, max abs residual {:.3e}, mean {:.3e} over {} points: {}\n",
                           g.label().empty() ? "unnamed" : g.label(), r.max_residual, r.max_abs_residual,
                           r.mean_residual, r.samples, r.consistent ? "consistent" : "VIOLATED");
        results.push_back({{"generator", g.label()},
                           {"max_residual", r.max_residual},
                           {"max_abs_residual", r.max_abs_residual},
                           {"mean_residual", r.mean_residual},
                           {"samples", r.samples},
                           {"consistent", r.consistent}});
    }
    out << fmt::format("{} (tolerance {:.1e})\n", all ? "symmetry holds" : "symmetry check failed", cfg.tol);
    if (cfg.output) {
        ojson j = stamp("symode-symmetry-check", cfg);
        j["system"] = s.name;
        j["tolerance"] = cfg.tol;
        j["results"] = results;
        j["consistent"] = all;
        const fs::path file = fs::path(*cfg.output) / "symmetry_check.json";
        write_json(file, j);
        out << "wrote " << file.string() << "\n";
    }
    return all ? kExitOk : kExitSymmetry;
}

int cmd_discover(const Config& cfg, std::ostream& out, std::ostream& err)
{
    if (!cfg.dataset) {
        throw ConfigError("/dataset", "a dataset directory is required (use --dataset)");
    }
    if (!cfg.method) {
        throw ConfigError("/method", "a method is required (use --method)");
    }
    const Dataset ds = load_dataset(*cfg.dataset);
    const OdeSystem system = get_system(ds.system);
    const FunctionLibrary lib = library_for(cfg, system.dim, system.library_degree, system.library_exponentials);
    const std::vector<Generator> gens = generators_for(cfg, system.dim, system.known_generators);
    DiscoveryConfig dcfg = cfg.discovery;
    dcfg.threshold = cfg.threshold.value_or(system.threshold);
    dcfg.seed = cfg.seed;
    dcfg.config_hash = cfg.hash;
    const TrainingData data = training_data(ds);
    const std::string& method = *cfg.method;

    ojson j = stamp("symode-model", cfg);
    j["method"] = method;
    j["system"] = ds.system;
    j["dataset"] = {{"config_hash", ds.config_hash}, {"master_seed", ds.master_seed}};
    j["library"] = {{"degree", cfg.degree.value_or(system.library_degree)},
                    {"exponentials", cfg.exponentials.value_or(system.library_exponentials)},
                    {"terms", term_names(lib)}};
    std::vector<std::string> equations;
    std::vector<std::string> diagnostics;
    if (method == "gp" || method == "equiv-gp-r") {
        std::optional<GpSymmetry> sym;
        if (method == "equiv-gp-r") {
            sym = GpSymmetry{gens, dcfg.eps, dcfg.lambda_symm.value_or(0.1)};
            j["lambda"] = sym->lambda;
        }
        const GpResult r = gp_fit(data, dcfg, sym);
        for (const Expr& e : r.equations) {
            equations.push_back(to_string(e));
        }
        ojson fit = ojson::array();
        for (const GpFitness& f : r.fitness) {
            fit.push_back({{"mse", f.mse}, {"symm_penalty", f.symm_penalty}, {"size", f.size}, {"total", f.total}});
        }
        j["coefficients"] = nullptr;
        j["fitness"] = fit;
        diagnostics = r.diagnostics;
    } else {
        std::optional<FitResult> r;
        if (method == "sindy") {
            r.emplace(sindy_fit(data, lib, dcfg));
        } else if (method == "equiv-c") {
            r.emplace(equiv_c_fit(data, lib, gens, dcfg));
        } else {
            r.emplace(equiv_r_fit(data, lib, gens, dcfg));
        }
        equations = r->model.equation_strings(6);
        j["coefficients"] = matrix_json(r->model.coefficients());
        j["rounds"] = r->rounds;
        if (method == "equiv-c") {
            j["rank"] = r->rank;
        }
        if (method == "equiv-r") {
            j["lambda"] = r->lambda;
        }
        diagnostics = r->diagnostics;
    }
    j["equations"] = equations;
    j["diagnostics"] = diagnostics;

    for (const auto& d : diagnostics) {
        err << "note: " << d << "\n";
    }
    for (std::size_t i = 0; i < equations.size(); ++i) {
        out << fmt::format("d{} = {}\n", variable_name(static_cast<int>(i)), equations[i]);
    }
    if (cfg.output) {
        write_json(*cfg.output, j);
        out << "wrote " << *cfg.output << "\n";
    }
    return kExitOk;
}

int cmd_benchmark(const Config& cfg, int jobs, std::ostream& out)
{
    const OdeSystem system = require_system(cfg);
    const std::string dir = require_output(cfg);
    BenchConfig b;
    b.system = system.name;
    b.methods = cfg.methods;
    b.noise = resolve_noise(cfg, system);
    b.runs = cfg.runs;
    b.master_seed = cfg.seed;
    b.splits = cfg.splits;
    b.steps = cfg.steps;
    b.smooth = cfg.smooth;
    b.discovery = cfg.discovery;
    b.threshold = cfg.threshold;
    if (cfg.generators) {
        b.generators = build_generators(*cfg.generators, system.dim);
    }
    b.horizon = cfg.horizon;
    b.checkpoints = cfg.checkpoints;
    b.jobs = jobs;
    b.config_hash = cfg.hash;
    const BenchmarkReport report = run_benchmark(b);
    write_report(report, dir);

    for (const MethodSummary& s : report.summaries) {
        const std::string rmse =
            s.rmse_successful_joint ? fmt::format("{:.4g}", *s.rmse_successful_joint) : std::string("N/A");
        out << fmt::format("{:<12} success {:.2f}  rmse(successful) {}  rmse(all) {:.4g}  failed {}  divergent {}\n",
                           s.method, s.success_joint, rmse, s.rmse_all_joint, s.failed, s.divergent);
    }
    out << fmt::format("config hash {}, seed {}\nwrote {}\n", cfg.hash, cfg.seed, dir);
    return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Symmetry-informed discovery of governing equations from trajectory data", "symode"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1);

    Flags f;
    const auto common = [&f](CLI::App* sub) {
        sub->add_option("--config", f.config, "JSON config file")->check(CLI::ExistingFile);
    };
    const auto jobs = [&f](CLI::App* sub) {
        sub->add_option("--jobs", f.jobs, "Worker threads (default: available parallelism)")
            ->check(CLI::PositiveNumber);
    };

    CLI::App* gen = app.add_subcommand("generate", "Simulate a system and write a dataset directory");
    common(gen);
    jobs(gen);
    gen->add_option("--system", f.system, "oscillator, growth, lv, glycolytic or seir");
    gen->add_option("--noise", f.noise, "Noise level (0 for clean data)");
    gen->add_option("--noise-kind", f.noise_kind, "none, additive or multiplicative");
    gen->add_option("--seed", f.seed, "Master seed");
    gen->add_option("--steps", f.steps, "Samples per trajectory");
    gen->add_flag("--no-smooth", f.no_smooth, "Skip GP smoothing of noisy states");
    gen->add_option("--out", f.out, "Dataset directory");

    CLI::App* ns = app.add_subcommand("nullspace", "Assemble the equivariance constraint and print its basis");
    common(ns);
    ns->add_option("--system", f.system, "Registered system");
    ns->add_option("--degree", f.degree, "Library degree");
    ns->add_option("--out", f.out, "Directory for nullspace.json");

    CLI::App* cs = app.add_subcommand("check-symmetry", "Check the infinitesimal criterion on sample points");
    common(cs);
    cs->add_option("--system", f.system, "Registered system");
    cs->add_option("--samples", f.samples, "Random sample points");
    cs->add_option("--seed", f.seed, "Master seed for the sample points");
    cs->add_option("--out", f.out, "Directory for symmetry_check.json");

    CLI::App* disc = app.add_subcommand("discover", "Fit one model to a dataset");
    common(disc);
    disc->add_option("--dataset", f.dataset, "Dataset directory");
    disc->add_option("--method", f.method, "sindy, equiv-c, equiv-r, gp or equiv-gp-r");
    disc->add_option("--seed", f.seed, "Master seed");
    disc->add_option("--out", f.out, "Model file (model.json)");

    CLI::App* bench = app.add_subcommand("benchmark", "Repeated paired runs with summary tables");
    common(bench);
    jobs(bench);
    bench->add_option("--system", f.system, "Registered system");
    bench->add_option("--methods", f.methods, "Methods to compare");
    bench->add_option("--runs", f.runs, "Seeded runs per method");
    bench->add_option("--noise", f.noise, "Noise level");
    bench->add_option("--noise-kind", f.noise_kind, "none, additive or multiplicative");
    bench->add_option("--seed", f.seed, "Master seed");
    bench->add_option("--out", f.out, "Report directory");

    std::vector<const char*> argv;
    for (const auto& a : args) {
        argv.push_back(a.c_str());
    }
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        const Config cfg = parse_config(load_document(f));
        if (gen->parsed()) {
            return cmd_generate(cfg, f.jobs, out);
        }
        if (ns->parsed()) {
            return cmd_nullspace(cfg, out);
        }
        if (cs->parsed()) {
            return cmd_check_symmetry(cfg, out);
        }
        if (disc->parsed()) {
            return cmd_discover(cfg, out, err);
        }
        return cmd_benchmark(cfg, f.jobs, out);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}

}  // namespace symode::cli
