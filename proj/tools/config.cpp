#include "config.hpp"

#include <algorithm>
#include <fstream>
#include <initializer_list>
#include <limits>

#include <fmt/format.h>

#include "symode/bench.hpp"
#include "symode/expr.hpp"

namespace symode::cli {

using json = nlohmann::json;

namespace {

std::string at(const std::string& path, const std::string& key)
{
    return path + "/" + key;
}

std::string at(const std::string& path, std::size_t index)
{
    return path + "/" + std::to_string(index);
}

void require_object(const json& j, const std::string& path)
{
    if (!j.is_object()) {
        throw ConfigError(path.empty() ? "/" : path, "expected an object");
    }
}

void allow_keys(const json& j, const std::string& path, std::initializer_list<const char*> keys)
{
    require_object(j, path);
    for (const auto& [key, value] : j.items()) {
        if (std::none_of(keys.begin(), keys.end(), [&key](const char* k) { return key == k; })) {
            throw ConfigError(at(path, key), "unknown key");
        }
    }
}

template <class T>
T as(const json& v, const std::string& path);

template <>
double as<double>(const json& v, const std::string& path)
{
    if (!v.is_number()) {
        throw ConfigError(path, "expected a number");
    }
    return v.get<double>();
}

template <>
int as<int>(const json& v, const std::string& path)
{
    if (!v.is_number_integer()) {
        throw ConfigError(path, "expected an integer");
    }
    const auto n = v.get<std::int64_t>();
    if (n < std::numeric_limits<int>::min() || n > std::numeric_limits<int>::max()) {
        throw ConfigError(path, "integer out of range");
    }
    return static_cast<int>(n);
}

template <>
std::uint64_t as<std::uint64_t>(const json& v, const std::string& path)
{
    if (v.is_number_unsigned()) {
        return v.get<std::uint64_t>();
    }
    if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
        throw ConfigError(path, "expected a non-negative integer");
    }
    return static_cast<std::uint64_t>(v.get<std::int64_t>());
}

template <>
bool as<bool>(const json& v, const std::string& path)
{
    if (!v.is_boolean()) {
        throw ConfigError(path, "expected true or false");
    }
    return v.get<bool>();
}

template <>
std::string as<std::string>(const json& v, const std::string& path)
{
    if (!v.is_string()) {
        throw ConfigError(path, "expected a string");
    }
    return v.get<std::string>();
}

template <class T>
std::vector<T> as_list(const json& v, const std::string& path)
{
    if (!v.is_array()) {
        throw ConfigError(path, "expected an array");
    }
    std::vector<T> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        out.push_back(as<T>(v[i], at(path, i)));
    }
    return out;
}

Eigen::MatrixXd as_matrix(const json& v, const std::string& path)
{
    if (!v.is_array() || v.empty()) {
        throw ConfigError(path, "expected a non-empty array of rows");
    }
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < v.size(); ++i) {
        rows.push_back(as_list<double>(v[i], at(path, i)));
        if (rows.back().empty() || rows.back().size() != rows.front().size()) {
            throw ConfigError(at(path, i), "rows must be non-empty and of equal length");
        }
    }
    Eigen::MatrixXd M(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < rows[i].size(); ++j) {
            M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
        }
    }
    return M;
}

/// Reads key into out when present.
template <class T>
void read(const json& j, const std::string& path, const char* key, T& out)
{
    if (j.contains(key)) {
        out = as<T>(j.at(key), at(path, key));
    }
}

template <class T>
void read(const json& j, const std::string& path, const char* key, std::optional<T>& out)
{
    if (j.contains(key)) {
        out = as<T>(j.at(key), at(path, key));
    }
}

void check(bool ok, const std::string& path, const char* what)
{
    if (!ok) {
        throw ConfigError(path, what);
    }
}

void parse_system(const json& v, const std::string& path, Config& cfg)
{
    if (v.is_string()) {
        cfg.system = v.get<std::string>();
        const auto& names = system_names();
        check(std::find(names.begin(), names.end(), *cfg.system) != names.end(), path,
              "unknown system (oscillator, growth, lv, glycolytic, seir)");
        return;
    }
    allow_keys(v, path, {"equations"});
    check(v.contains("equations"), path, "an ad hoc system needs 'equations'");
    const std::string epath = at(path, "equations");
    auto eqs = as_list<std::string>(v.at("equations"), epath);
    check(!eqs.empty(), epath, "expected at least one equation");
    for (std::size_t i = 0; i < eqs.size(); ++i) {
        try {
            (void)parse(eqs[i], static_cast<int>(eqs.size()));
        } catch (const ParseError& e) {
            throw ConfigError(at(epath, i), e.what());
        }
    }
    cfg.equations = std::move(eqs);
}

void parse_generators(const json& v, const std::string& path, Config& cfg)
{
    if (!v.is_array()) {
        throw ConfigError(path, "expected an array of generators");
    }
    std::vector<GeneratorSpec> out;
    for (std::size_t k = 0; k < v.size(); ++k) {
        const std::string gpath = at(path, k);
        allow_keys(v[k], gpath, {"label", "matrix", "field"});
        GeneratorSpec g;
        g.path = gpath;
        g.label = fmt::format("g{}", k + 1);
        read(v[k], gpath, "label", g.label);
        const bool has_m = v[k].contains("matrix"), has_f = v[k].contains("field");
        check(has_m != has_f, gpath, "give exactly one of 'matrix' or 'field'");
        if (has_m) {
            g.matrix = as_matrix(v[k].at("matrix"), at(gpath, "matrix"));
            check(g.matrix->rows() == g.matrix->cols(), at(gpath, "matrix"), "must be square");
        } else {
            g.field = as_list<std::string>(v[k].at("field"), at(gpath, "field"));
            check(!g.field.empty(), at(gpath, "field"), "expected at least one component");
            for (std::size_t i = 0; i < g.field.size(); ++i) {
                try {
                    (void)parse(g.field[i], static_cast<int>(g.field.size()));
                } catch (const ParseError& e) {
                    throw ConfigError(at(at(gpath, "field"), i), e.what());
                }
            }
        }
        out.push_back(std::move(g));
    }
    cfg.generators = std::move(out);
}

void parse_gp(const json& j, const std::string& path, GpConfig& gp)
{
    allow_keys(j, path,
               {"population", "generations", "crossover", "subtree_mutation", "point_mutation", "max_depth",
                "init_depth", "parsimony", "tournament", "const_lo", "const_hi", "exp", "div", "max_points"});
    read(j, path, "population", gp.population);
    read(j, path, "generations", gp.generations);
    read(j, path, "crossover", gp.crossover);
    read(j, path, "subtree_mutation", gp.subtree_mutation);
    read(j, path, "point_mutation", gp.point_mutation);
    read(j, path, "max_depth", gp.max_depth);
    read(j, path, "init_depth", gp.init_depth);
    read(j, path, "parsimony", gp.parsimony);
    read(j, path, "tournament", gp.tournament);
    read(j, path, "const_lo", gp.const_lo);
    read(j, path, "const_hi", gp.const_hi);
    read(j, path, "exp", gp.use_exp);
    read(j, path, "div", gp.use_div);
    read(j, path, "max_points", gp.max_points);
    check(gp.population >= 2, at(path, "population"), "must be at least 2");
    check(gp.generations >= 0, at(path, "generations"), "must be non-negative");
    check(gp.max_depth >= 1 && gp.init_depth >= 1 && gp.init_depth <= gp.max_depth, at(path, "init_depth"),
          "depths must satisfy 1 <= init_depth <= max_depth");
    check(gp.tournament >= 1, at(path, "tournament"), "must be at least 1");
    check(gp.const_lo < gp.const_hi, at(path, "const_hi"), "must exceed const_lo");
    check(gp.max_points >= 1, at(path, "max_points"), "must be at least 1");
}

void parse_discovery(const json& j, const std::string& path, Config& cfg)
{
    allow_keys(j, path,
               {"threshold", "max_rounds", "lambda", "lambda_grid", "loss", "tau", "eps", "substeps", "batch_size",
                "optimizer", "gp"});
    DiscoveryConfig& d = cfg.discovery;
    read(j, path, "threshold", cfg.threshold);
    check(cfg.threshold.value_or(0.0) >= 0.0, at(path, "threshold"), "must be non-negative");
    read(j, path, "max_rounds", d.max_rounds);
    check(d.max_rounds >= 1, at(path, "max_rounds"), "must be at least 1");
    read(j, path, "lambda", d.lambda_symm);
    check(d.lambda_symm.value_or(0.0) >= 0.0, at(path, "lambda"), "must be non-negative");
    if (j.contains("lambda_grid")) {
        d.lambda_grid = as_list<double>(j.at("lambda_grid"), at(path, "lambda_grid"));
        check(!d.lambda_grid.empty(), at(path, "lambda_grid"), "expected at least one value");
    }
    if (j.contains("loss")) {
        const auto name = as<std::string>(j.at("loss"), at(path, "loss"));
        const auto kind = parse_loss_kind(name);
        check(kind.has_value(), at(path, "loss"), "unknown loss (igfe, fgfe, fgie, igie)");
        d.loss_kind = *kind;
    }
    read(j, path, "tau", d.tau);
    read(j, path, "eps", d.eps);
    read(j, path, "substeps", d.substeps);
    read(j, path, "batch_size", d.batch_size);
    check(d.tau >= 0.0, at(path, "tau"), "must be non-negative");
    check(d.substeps >= 1, at(path, "substeps"), "must be at least 1");
    check(d.batch_size >= 1, at(path, "batch_size"), "must be at least 1");
    if (j.contains("optimizer")) {
        const std::string opath = at(path, "optimizer");
        const json& o = j.at("optimizer");
        allow_keys(o, opath, {"max_iters", "grad_tol", "memory"});
        read(o, opath, "max_iters", d.optimizer.max_iters);
        read(o, opath, "grad_tol", d.optimizer.grad_tol);
        read(o, opath, "memory", d.optimizer.memory);
        check(d.optimizer.max_iters >= 0, at(opath, "max_iters"), "must be non-negative");
        check(d.optimizer.memory >= 1, at(opath, "memory"), "must be at least 1");
    }
    if (j.contains("gp")) {
        parse_gp(j.at("gp"), at(path, "gp"), d.gp);
    }
}

void parse_data(const json& j, const std::string& path, Config& cfg)
{
    allow_keys(j, path, {"noise", "splits", "steps", "smooth"});
    if (j.contains("noise")) {
        const std::string npath = at(path, "noise");
        const json& n = j.at("noise");
        allow_keys(n, npath, {"kind", "sigma"});
        read(n, npath, "sigma", cfg.noise_sigma);
        read(n, npath, "kind", cfg.noise_kind);
        check(cfg.noise_sigma.value_or(0.0) >= 0.0, at(npath, "sigma"), "must be non-negative");
        check(!cfg.noise_kind || parse_noise_kind(*cfg.noise_kind).has_value(), at(npath, "kind"),
              "unknown noise kind (none, additive, multiplicative)");
        check(cfg.noise_sigma.has_value() || cfg.noise_kind == "none", npath, "needs 'sigma'");
    }
    if (j.contains("splits")) {
        const std::string spath = at(path, "splits");
        const json& s = j.at("splits");
        allow_keys(s, spath, {"train", "val", "test"});
        SplitSizes sizes;
        read(s, spath, "train", sizes.train);
        read(s, spath, "val", sizes.val);
        read(s, spath, "test", sizes.test);
        check(sizes.train >= 1 && sizes.val >= 0 && sizes.test >= 0, spath,
              "needs train >= 1 and non-negative val and test");
        cfg.splits = sizes;
    }
    read(j, path, "steps", cfg.steps);
    check(cfg.steps.value_or(2) >= 2, at(path, "steps"), "must be at least 2");
    read(j, path, "smooth", cfg.smooth);
}

void parse_benchmark(const json& j, const std::string& path, Config& cfg)
{
    allow_keys(j, path, {"methods", "runs", "horizon", "checkpoints"});
    if (j.contains("methods")) {
        cfg.methods = as_list<std::string>(j.at("methods"), at(path, "methods"));
        check(!cfg.methods.empty(), at(path, "methods"), "expected at least one method");
        for (std::size_t i = 0; i < cfg.methods.size(); ++i) {
            check(std::find(method_names().begin(), method_names().end(), cfg.methods[i]) != method_names().end(),
                  at(at(path, "methods"), i), "unknown method");
        }
    }
    read(j, path, "runs", cfg.runs);
    read(j, path, "horizon", cfg.horizon);
    read(j, path, "checkpoints", cfg.checkpoints);
    check(cfg.runs >= 1, at(path, "runs"), "must be at least 1");
    check(cfg.horizon >= 0.0, at(path, "horizon"), "must be non-negative");
    check(cfg.checkpoints >= 1, at(path, "checkpoints"), "must be at least 1");
}

void parse_check(const json& j, const std::string& path, Config& cfg)
{
    allow_keys(j, path, {"samples", "tol", "points"});
    read(j, path, "samples", cfg.samples);
    read(j, path, "tol", cfg.tol);
    check(cfg.samples >= 1, at(path, "samples"), "must be at least 1");
    check(cfg.tol > 0.0, at(path, "tol"), "must be positive");
    if (j.contains("points")) {
        cfg.points = as_matrix(j.at("points"), at(path, "points"));
    }
}

}  // namespace

json read_config_file(const std::filesystem::path& file)
{
    std::ifstream in(file);
    if (!in) {
        throw ConfigError("", fmt::format("cannot read config file {}", file.string()));
    }
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("", fmt::format("{}: {}", file.string(), e.what()));
    }
}

std::string config_hash(const json& doc)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const unsigned char c : doc.dump()) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return fmt::format("{:016x}", h);
}

Config parse_config(const json& doc)
{
    allow_keys(doc, "",
               {"system", "dataset", "library", "generators", "method", "discovery", "data", "benchmark", "check",
                "seeds", "output"});
    Config cfg;
    if (doc.contains("system")) {
        parse_system(doc.at("system"), "/system", cfg);
    }
    read(doc, "", "dataset", cfg.dataset);
    if (doc.contains("library")) {
        const json& l = doc.at("library");
        allow_keys(l, "/library", {"degree", "exponentials"});
        read(l, "/library", "degree", cfg.degree);
        read(l, "/library", "exponentials", cfg.exponentials);
        check(cfg.degree.value_or(0) >= 0, "/library/degree", "must be non-negative");
    }
    if (doc.contains("generators")) {
        parse_generators(doc.at("generators"), "/generators", cfg);
    }
    read(doc, "", "method", cfg.method);
    if (cfg.method) {
        check(std::find(method_names().begin(), method_names().end(), *cfg.method) != method_names().end(),
              "/method", "unknown method (sindy, equiv-c, equiv-r, gp, equiv-gp-r)");
    }
    if (doc.contains("discovery")) {
        parse_discovery(doc.at("discovery"), "/discovery", cfg);
    }
    if (doc.contains("data")) {
        parse_data(doc.at("data"), "/data", cfg);
    }
    if (doc.contains("benchmark")) {
        parse_benchmark(doc.at("benchmark"), "/benchmark", cfg);
    }
    if (doc.contains("check")) {
        parse_check(doc.at("check"), "/check", cfg);
    }
    if (doc.contains("seeds")) {
        allow_keys(doc.at("seeds"), "/seeds", {"master"});
        read(doc.at("seeds"), "/seeds", "master", cfg.seed);
    }
    read(doc, "", "output", cfg.output);

    json hashed = doc;
    hashed.erase("output");
    cfg.hash = config_hash(hashed);
    return cfg;
}

std::vector<Generator> build_generators(const std::vector<GeneratorSpec>& specs, int dim)
{
    std::vector<Generator> out;
    for (const GeneratorSpec& g : specs) {
        if (g.matrix) {
            check(g.matrix->rows() == dim, at(g.path, "matrix"), "size does not match the state dimension");
            out.push_back(Generator::linear(*g.matrix, g.label));
        } else {
            check(static_cast<int>(g.field.size()) == dim, at(g.path, "field"),
                  "component count does not match the state dimension");
            out.push_back(Generator::symbolic(g.field, g.label));
        }
    }
    return out;
}

std::optional<NoiseSpec> resolve_noise(const Config& cfg, const OdeSystem& system)
{
    if (!cfg.noise_sigma && !cfg.noise_kind) {
        return std::nullopt;
    }
    NoiseSpec spec;
    spec.sigma = cfg.noise_sigma.value_or(0.0);
    if (cfg.noise_kind) {
        spec.kind = *parse_noise_kind(*cfg.noise_kind);
    } else if (spec.sigma == 0.0) {
        spec.kind = NoiseKind::None;
    } else {
        // a bare sigma keeps the system's noise model; clean systems default to additive
        spec.kind = system.noise.kind == NoiseKind::None ? NoiseKind::AdditiveRelative : system.noise.kind;
    }
    if (spec.kind == NoiseKind::None) {
        spec.sigma = 0.0;
    }
    return spec;
}

}  // namespace symode::cli
