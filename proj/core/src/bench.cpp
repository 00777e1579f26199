#include "symode/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <memory>
#include <numeric>
#include <set>
#include <stdexcept>

#include <fmt/format.h>
#include <json.hpp>

#include "symode/numeric.hpp"
#include "symode/version.hpp"

namespace symode {

using ojson = nlohmann::ordered_json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

FunctionLibrary library_for(const OdeSystem& s)
{
    return build_library(s.dim, s.library_degree, s.library_exponentials);
}

}  // namespace

// ---------------------------------------------------------------------------
// Term sets and success
// ---------------------------------------------------------------------------

TermSets term_set(const SindyModel& model, double threshold)
{
    const Eigen::MatrixXd& W = model.coefficients();
    TermSets out(static_cast<std::size_t>(W.rows()));
    for (Eigen::Index i = 0; i < W.rows(); ++i) {
        for (Eigen::Index j = 0; j < W.cols(); ++j) {
            const double c = W(i, j);
            if (c != 0.0 && std::abs(c) >= threshold) {
                out[static_cast<std::size_t>(i)].terms.emplace(model.library().term(static_cast<std::size_t>(j)), c);
            }
        }
    }
    return out;
}

TermSets term_set(const std::vector<Expr>& equations, const FunctionLibrary& lib, double threshold)
{
    TermSets out;
    for (const Expr& e : equations) {
        TermSet ts;
        if (const auto form = canonicalize(e, lib)) {
            for (const auto& [key, c] : form->coeffs) {
                if (std::abs(c) >= threshold) {
                    ts.terms.emplace(key, c);
                }
            }
        } else {
            ts.canonical = false;
        }
        out.push_back(std::move(ts));
    }
    return out;
}

TermSets truth_term_sets(const OdeSystem& system)
{
    TermSets out;
    for (const auto& eq : system.truth_terms) {
        TermSet ts;
        for (const auto& [key, c] : eq) {
            ts.terms.emplace(key, c);
        }
        out.push_back(std::move(ts));
    }
    return out;
}

SuccessFlags success(const TermSets& discovered, const TermSets& truth)
{
    if (discovered.size() != truth.size()) {
        throw std::invalid_argument("success: equation counts differ");
    }
    SuccessFlags f;
    f.joint = true;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        bool ok = discovered[i].canonical && truth[i].canonical &&
                  discovered[i].terms.size() == truth[i].terms.size();
        if (ok) {
            for (const auto& [key, c] : truth[i].terms) {
                ok = ok && discovered[i].terms.count(key) == 1;
            }
        }
        f.per_eq.push_back(ok);
        f.joint = f.joint && ok;
    }
    return f;
}

std::vector<double> squared_parameter_error(const TermSets& discovered, const TermSets& truth)
{
    if (discovered.size() != truth.size()) {
        throw std::invalid_argument("squared_parameter_error: equation counts differ");
    }
    std::vector<double> out;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        double s = 0.0;
        for (const auto& [key, c] : truth[i].terms) {
            double hat = 0.0;
            if (discovered[i].canonical) {
                const auto it = discovered[i].terms.find(key);
                hat = it == discovered[i].terms.end() ? 0.0 : it->second;
            }
            s += (c - hat) * (c - hat);
        }
        out.push_back(s);
    }
    return out;
}

std::optional<double> rmse_params(const std::vector<RunRecord>& records, RmseMode mode, int scope)
{
    double sum = 0.0;
    int K = 0;
    for (const RunRecord& r : records) {
        if (mode == RmseMode::Successful) {
            const bool ok = scope < 0 ? r.joint
                                      : (static_cast<std::size_t>(scope) < r.eq_success.size() &&
                                         r.eq_success[static_cast<std::size_t>(scope)]);
            if (!ok) {
                continue;
            }
        }
        if (scope < 0) {
            sum += std::accumulate(r.sq_error.begin(), r.sq_error.end(), 0.0);
        } else if (static_cast<std::size_t>(scope) < r.sq_error.size()) {
            sum += r.sq_error[static_cast<std::size_t>(scope)];
        }
        ++K;
    }
    if (K == 0) {
        return std::nullopt;
    }
    return std::sqrt(sum / K);
}

// ---------------------------------------------------------------------------
// Long-term prediction
// ---------------------------------------------------------------------------

Eigen::MatrixXd long_term_errors(const DynamicsOracle& model, const OdeSystem& system, const Eigen::MatrixXd& ics,
                                 const std::vector<double>& checkpoints)
{
    if (ics.cols() != system.dim || model.dim() != system.dim) {
        throw std::invalid_argument("long_term_errors: dimension mismatch");
    }
    std::vector<long> at;  // step index per checkpoint
    for (std::size_t c = 0; c < checkpoints.size(); ++c) {
        if (!(checkpoints[c] >= 0.0) || (c > 0 && checkpoints[c] < checkpoints[c - 1])) {
            throw std::invalid_argument("long_term_errors: checkpoints must be non-negative and ascending");
        }
        at.push_back(std::lround(checkpoints[c] / kInternalStep));
    }
    const ExprDynamics truth = system.dynamics();
    const auto f_true = [&truth](const Eigen::VectorXd& x) { return truth.rhs(x); };
    const auto f_model = [&model](const Eigen::VectorXd& x) { return model.rhs(x); };

    Eigen::MatrixXd E = Eigen::MatrixXd::Constant(ics.rows(), static_cast<Eigen::Index>(checkpoints.size()), kNaN);
    for (Eigen::Index n = 0; n < ics.rows(); ++n) {
        Eigen::VectorXd xt = ics.row(n).transpose();
        Eigen::VectorXd xm = xt;
        long step = 0;
        for (std::size_t c = 0; c < at.size(); ++c) {
            bool diverged = false;
            for (; step < at[c]; ++step) {
                xt = rk4_step(f_true, xt, kInternalStep);
                xm = rk4_step(f_model, xm, kInternalStep);
                if (!xm.allFinite() || xm.norm() > kDivergenceNorm) {
                    diverged = true;
                    break;
                }
            }
            if (diverged) {
                break;  // rest of the row stays NaN
            }
            E(n, static_cast<Eigen::Index>(c)) = (xm - xt).squaredNorm() / static_cast<double>(system.dim);
        }
    }
    return E;
}

LtpCurve summarize_ltp(const std::vector<Eigen::MatrixXd>& errors, const std::vector<double>& checkpoints)
{
    LtpCurve out;
    out.times = checkpoints;
    for (std::size_t c = 0; c < checkpoints.size(); ++c) {
        std::vector<double> vals;
        int div = 0;
        for (const Eigen::MatrixXd& E : errors) {
            if (E.cols() != static_cast<Eigen::Index>(checkpoints.size())) {
                continue;
            }
            for (Eigen::Index n = 0; n < E.rows(); ++n) {
                const double v = E(n, static_cast<Eigen::Index>(c));
                if (std::isnan(v)) {
                    ++div;
                } else {
                    vals.push_back(v);
                }
            }
        }
        const double m = vals.empty() ? kNaN : pairwise_sum(vals) / static_cast<double>(vals.size());
        double sd = kNaN;
        if (!vals.empty()) {
            std::vector<double> sq(vals.size());
            std::transform(vals.begin(), vals.end(), sq.begin(), [m](double v) { return (v - m) * (v - m); });
            sd = std::sqrt(pairwise_sum(sq) / static_cast<double>(vals.size()));
        }
        out.mean.push_back(m);
        out.std.push_back(sd);
        out.divergent.push_back(div);
        out.count.push_back(static_cast<int>(vals.size()));
    }
    return out;
}

LtpCurve long_term_error(const DynamicsOracle& model, const OdeSystem& system, const Eigen::MatrixXd& ics,
                         const std::vector<double>& checkpoints)
{
    return summarize_ltp({long_term_errors(model, system, ics, checkpoints)}, checkpoints);
}

// ---------------------------------------------------------------------------
// Runs
// ---------------------------------------------------------------------------

const std::vector<std::string>& method_names()
{
    static const std::vector<std::string> names{"sindy", "equiv-c", "equiv-r", "gp", "equiv-gp-r"};
    return names;
}

namespace {

struct Fitted {
    RunRecord record;
    std::unique_ptr<DynamicsOracle> model;
};

Fitted fit_method(const std::string& method, const OdeSystem& system, const TrainingData& data,
                  const std::vector<Generator>& gens, const DiscoveryConfig& cfg)
{
    const FunctionLibrary lib = library_for(system);
    Fitted out;
    RunRecord& rec = out.record;
    rec.method = method;
    rec.seed = cfg.seed;
    if (method == "sindy" || method == "equiv-c" || method == "equiv-r") {
        std::optional<FitResult> fr;
        if (method == "sindy") {
            fr.emplace(sindy_fit(data, lib, cfg));
        } else if (method == "equiv-c") {
            fr.emplace(equiv_c_fit(data, lib, gens, cfg));
        } else {
            fr.emplace(equiv_r_fit(data, lib, gens, cfg));
        }
        rec.equations = fr->model.equation_strings(17);
        rec.discovered = term_set(fr->model, cfg.threshold);
        rec.lambda = fr->lambda;
        rec.diagnostics = fr->diagnostics;
        out.model = std::make_unique<SindyModel>(fr->model);
    } else if (method == "gp" || method == "equiv-gp-r") {
        std::optional<GpSymmetry> sym;
        if (method == "equiv-gp-r") {
            sym = GpSymmetry{gens, cfg.eps, cfg.lambda_symm.value_or(0.1)};
            rec.lambda = sym->lambda;
        }
        GpResult gr = gp_fit(data, cfg, sym);
        for (const Expr& e : gr.equations) {
            rec.equations.push_back(to_string(e));
        }
        rec.discovered = term_set(gr.equations, lib, cfg.threshold);
        rec.diagnostics = gr.diagnostics;
        out.model = std::make_unique<ExprDynamics>(gr.equations);
    } else {
        throw std::invalid_argument(fmt::format("unknown method '{}'", method));
    }
    const TermSets truth = truth_term_sets(system);
    const SuccessFlags f = success(rec.discovered, truth);
    rec.eq_success = f.per_eq;
    rec.joint = f.joint;
    rec.sq_error = squared_parameter_error(rec.discovered, truth);
    return out;
}

void mark_failed(RunRecord& rec, const OdeSystem& system, const std::string& what)
{
    rec.failed = true;
    rec.error = what;
    rec.equations.clear();
    rec.discovered.assign(static_cast<std::size_t>(system.dim), TermSet{});
    const TermSets truth = truth_term_sets(system);
    rec.eq_success.assign(static_cast<std::size_t>(system.dim), false);
    rec.joint = false;
    rec.sq_error = squared_parameter_error(rec.discovered, truth);
    rec.ltp.resize(0, 0);
}

}  // namespace

RunRecord run_method(const std::string& method, const OdeSystem& system, const TrainingData& data,
                     const std::vector<Generator>& gens, const DiscoveryConfig& cfg)
{
    return fit_method(method, system, data, gens, cfg).record;
}

BenchmarkReport run_benchmark(const BenchConfig& cfg)
{
    const OdeSystem system = get_system(cfg.system);
    for (const auto& m : cfg.methods) {
        if (std::find(method_names().begin(), method_names().end(), m) == method_names().end()) {
            throw std::invalid_argument(fmt::format("unknown method '{}'", m));
        }
    }
    if (cfg.methods.empty() || cfg.runs < 1 || cfg.checkpoints < 1 || cfg.horizon < 0.0) {
        throw std::invalid_argument("benchmark needs methods, runs >= 1, checkpoints >= 1 and horizon >= 0");
    }
    const std::vector<Generator> gens = cfg.generators.value_or(system.known_generators);
    DiscoveryConfig dcfg = cfg.discovery;
    dcfg.threshold = cfg.threshold.value_or(system.threshold);
    dcfg.config_hash = cfg.config_hash;

    BenchmarkReport report;
    report.config = cfg;
    report.dim = system.dim;
    const int steps = cfg.steps.value_or(system.steps);
    const double horizon = cfg.horizon > 0.0 ? cfg.horizon : steps * system.dt;
    for (int c = 1; c <= cfg.checkpoints; ++c) {
        report.checkpoints.push_back(horizon * c / cfg.checkpoints);
    }

    const std::size_t M = cfg.methods.size();
    report.records.resize(static_cast<std::size_t>(cfg.runs) * M);
    parallel_for(static_cast<std::size_t>(cfg.runs), cfg.jobs, [&](std::size_t k) {
        const std::uint64_t seed = split_seed(cfg.master_seed, k);
        std::optional<TrainingData> data;
        Eigen::MatrixXd ics;
        std::string data_error;
        try {
            GenerateOptions opts;
            opts.noise = cfg.noise;
            opts.seed = seed;
            opts.splits = cfg.splits;
            opts.steps = cfg.steps;
            opts.smooth = cfg.smooth;
            opts.config_hash = cfg.config_hash;
            const Dataset ds = generate_dataset(system, opts);
            data = training_data(ds);
            const auto& held = !ds.test.empty() ? ds.test : (!ds.val.empty() ? ds.val : ds.train);
            ics.resize(static_cast<Eigen::Index>(held.size()), system.dim);
            for (std::size_t t = 0; t < held.size(); ++t) {
                ics.row(static_cast<Eigen::Index>(t)) = held[t].clean_states.row(0);
            }
        } catch (const std::exception& e) {
            data_error = fmt::format("data generation failed: {}", e.what());
        }
        for (std::size_t m = 0; m < M; ++m) {
            RunRecord rec;
            const auto t0 = std::chrono::steady_clock::now();
            if (!data) {
                mark_failed(rec, system, data_error);
            } else {
                try {
                    DiscoveryConfig run_cfg = dcfg;
                    run_cfg.seed = seed;
                    Fitted f = fit_method(cfg.methods[m], system, *data, gens, run_cfg);
                    rec = std::move(f.record);
                    rec.ltp = long_term_errors(*f.model, system, ics, report.checkpoints);
                } catch (const std::exception& e) {
                    mark_failed(rec, system, e.what());
                }
            }
            rec.run = static_cast<int>(k);
            rec.seed = seed;
            rec.method = cfg.methods[m];
            rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            report.records[k * M + m] = std::move(rec);
        }
    });
    report.summaries = summarize(report.records, cfg.methods, system.dim, report.checkpoints);
    return report;
}

std::vector<MethodSummary> summarize(const std::vector<RunRecord>& records, const std::vector<std::string>& methods,
                                     int dim, const std::vector<double>& checkpoints)
{
    std::vector<MethodSummary> out;
    for (const std::string& method : methods) {
        std::vector<RunRecord> mine;
        for (const RunRecord& r : records) {
            if (r.method == method) {
                mine.push_back(r);
            }
        }
        MethodSummary s;
        s.method = method;
        s.runs = static_cast<int>(mine.size());
        std::vector<Eigen::MatrixXd> curves;
        std::vector<int> eq_hits(static_cast<std::size_t>(dim), 0);
        int joint = 0;
        for (const RunRecord& r : mine) {
            s.failed += r.failed ? 1 : 0;
            joint += r.joint ? 1 : 0;
            for (int i = 0; i < dim && static_cast<std::size_t>(i) < r.eq_success.size(); ++i) {
                eq_hits[static_cast<std::size_t>(i)] += r.eq_success[static_cast<std::size_t>(i)] ? 1 : 0;
            }
            if (r.ltp.size() > 0) {
                curves.push_back(r.ltp);
                for (Eigen::Index n = 0; n < r.ltp.rows(); ++n) {
                    s.divergent += std::isnan(r.ltp(n, r.ltp.cols() - 1)) ? 1 : 0;
                }
            }
        }
        const double K = std::max(1, s.runs);
        for (int i = 0; i < dim; ++i) {
            s.success_eq.push_back(eq_hits[static_cast<std::size_t>(i)] / K);
            s.rmse_successful_eq.push_back(rmse_params(mine, RmseMode::Successful, i));
            s.rmse_all_eq.push_back(rmse_params(mine, RmseMode::All, i).value_or(kNaN));
        }
        s.success_joint = joint / K;
        s.rmse_successful_joint = rmse_params(mine, RmseMode::Successful, -1);
        s.rmse_all_joint = rmse_params(mine, RmseMode::All, -1).value_or(kNaN);
        s.ltp = summarize_ltp(curves, checkpoints);
        out.push_back(std::move(s));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Report files
// ---------------------------------------------------------------------------

namespace {

ojson num(double v)
{
    return std::isfinite(v) ? ojson(v) : ojson(nullptr);
}

ojson opt(const std::optional<double>& v)
{
    return v ? num(*v) : ojson(nullptr);
}

double to_num(const ojson& j)
{
    return j.is_null() ? kNaN : j.get<double>();
}

ojson generator_json(const Generator& g)
{
    ojson j;
    j["label"] = g.label();
    if (g.is_linear()) {
        ojson rows = ojson::array();
        for (Eigen::Index i = 0; i < g.matrix().rows(); ++i) {
            ojson row = ojson::array();
            for (Eigen::Index k = 0; k < g.matrix().cols(); ++k) {
                row.push_back(g.matrix()(i, k));
            }
            rows.push_back(row);
        }
        j["matrix"] = rows;
    } else {
        ojson comps = ojson::array();
        for (const Expr& e : g.components()) {
            comps.push_back(to_string(e));
        }
        j["components"] = comps;
    }
    return j;
}

ojson config_json(const BenchConfig& c)
{
    ojson j;
    j["system"] = c.system;
    j["methods"] = c.methods;
    if (c.noise) {
        j["noise"] = {{"kind", to_string(c.noise->kind)}, {"sigma", c.noise->sigma}};
    } else {
        j["noise"] = "default";
    }
    j["runs"] = c.runs;
    j["master_seed"] = c.master_seed;
    if (c.splits) {
        j["splits"] = {{"train", c.splits->train}, {"val", c.splits->val}, {"test", c.splits->test}};
    } else {
        j["splits"] = "default";
    }
    j["steps"] = c.steps ? ojson(*c.steps) : ojson("default");
    j["smooth"] = c.smooth;
    j["threshold"] = c.threshold ? ojson(*c.threshold) : ojson("default");
    const DiscoveryConfig& d = c.discovery;
    ojson disc;
    disc["max_rounds"] = d.max_rounds;
    disc["lambda"] = d.lambda_symm ? ojson(*d.lambda_symm) : ojson(nullptr);
    disc["lambda_grid"] = d.lambda_grid;
    disc["loss"] = to_string(d.loss_kind);
    disc["tau"] = d.tau;
    disc["eps"] = d.eps;
    disc["substeps"] = d.substeps;
    disc["batch_size"] = d.batch_size;
    disc["optimizer"] = {{"max_iters", d.optimizer.max_iters},
                         {"grad_tol", d.optimizer.grad_tol},
                         {"memory", d.optimizer.memory}};
    const GpConfig& g = d.gp;
    disc["gp"] = {{"population", g.population},   {"generations", g.generations},
                  {"crossover", g.crossover},     {"subtree_mutation", g.subtree_mutation},
                  {"point_mutation", g.point_mutation}, {"max_depth", g.max_depth},
                  {"init_depth", g.init_depth},   {"parsimony", g.parsimony},
                  {"tournament", g.tournament},   {"const_lo", g.const_lo},
                  {"const_hi", g.const_hi},       {"use_exp", g.use_exp},
                  {"use_div", g.use_div},         {"max_points", g.max_points}};
    j["discovery"] = disc;
    if (c.generators) {
        ojson gens = ojson::array();
        for (const Generator& gen : *c.generators) {
            gens.push_back(generator_json(gen));
        }
        j["generators"] = gens;
    } else {
        j["generators"] = "default";
    }
    j["horizon"] = c.horizon;
    j["checkpoints"] = c.checkpoints;
    return j;
}

ojson ltp_json(const LtpCurve& c)
{
    ojson mean = ojson::array(), sd = ojson::array();
    for (std::size_t i = 0; i < c.times.size(); ++i) {
        mean.push_back(num(c.mean[i]));
        sd.push_back(num(c.std[i]));
    }
    return {{"times", c.times}, {"mean", mean}, {"std", sd}, {"divergent", c.divergent}, {"count", c.count}};
}

ojson summaries_json(const std::vector<MethodSummary>& summaries)
{
    ojson out = ojson::array();
    for (const MethodSummary& s : summaries) {
        ojson rs = ojson::array(), ra = ojson::array();
        for (std::size_t i = 0; i < s.success_eq.size(); ++i) {
            rs.push_back(opt(s.rmse_successful_eq[i]));
            ra.push_back(num(s.rmse_all_eq[i]));
        }
        ojson j;
        j["method"] = s.method;
        j["runs"] = s.runs;
        j["failed"] = s.failed;
        j["success"] = {{"eq", s.success_eq}, {"all", s.success_joint}};
        j["rmse_successful"] = {{"eq", rs}, {"all", opt(s.rmse_successful_joint)}};
        j["rmse_all"] = {{"eq", ra}, {"all", num(s.rmse_all_joint)}};
        j["divergent"] = s.divergent;
        j["ltp"] = ltp_json(s.ltp);
        out.push_back(j);
    }
    return out;
}

ojson record_json(const RunRecord& r)
{
    ojson j;
    j["run"] = r.run;
    j["seed"] = r.seed;
    j["method"] = r.method;
    j["failed"] = r.failed;
    j["error"] = r.error;
    j["equations"] = r.equations;
    ojson disc = ojson::array();
    for (const TermSet& ts : r.discovered) {
        ojson terms = ojson::array();
        for (const auto& [key, c] : ts.terms) {
            terms.push_back(ojson::array({term_name(key), c}));
        }
        disc.push_back({{"canonical", ts.canonical}, {"terms", terms}});
    }
    j["discovered"] = disc;
    j["eq_success"] = r.eq_success;
    j["joint"] = r.joint;
    j["sq_error"] = r.sq_error;
    ojson ltp = ojson::array();
    for (Eigen::Index n = 0; n < r.ltp.rows(); ++n) {
        ojson row = ojson::array();
        for (Eigen::Index c = 0; c < r.ltp.cols(); ++c) {
            row.push_back(num(r.ltp(n, c)));
        }
        ltp.push_back(row);
    }
    j["ltp"] = ltp;
    j["lambda"] = r.lambda;
    j["diagnostics"] = r.diagnostics;
    return j;
}

TermKey key_from_name(const std::string& name, int dim)
{
    const auto poly = expand(parse(name, dim), dim);
    if (!poly || poly->size() != 1 || poly->begin()->second != 1.0) {
        throw std::runtime_error(fmt::format("report: '{}' is not a single term", name));
    }
    return poly->begin()->first;
}

RunRecord record_from_json(const ojson& j, int dim)
{
    RunRecord r;
    r.run = j.at("run").get<int>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.method = j.at("method").get<std::string>();
    r.failed = j.at("failed").get<bool>();
    r.error = j.at("error").get<std::string>();
    r.equations = j.at("equations").get<std::vector<std::string>>();
    for (const ojson& d : j.at("discovered")) {
        TermSet ts;
        ts.canonical = d.at("canonical").get<bool>();
        for (const ojson& t : d.at("terms")) {
            ts.terms.emplace(key_from_name(t.at(0).get<std::string>(), dim), t.at(1).get<double>());
        }
        r.discovered.push_back(std::move(ts));
    }
    r.eq_success = j.at("eq_success").get<std::vector<bool>>();
    r.joint = j.at("joint").get<bool>();
    r.sq_error = j.at("sq_error").get<std::vector<double>>();
    const ojson& ltp = j.at("ltp");
    if (!ltp.empty()) {
        r.ltp.resize(static_cast<Eigen::Index>(ltp.size()), static_cast<Eigen::Index>(ltp.at(0).size()));
        for (std::size_t n = 0; n < ltp.size(); ++n) {
            for (std::size_t c = 0; c < ltp[n].size(); ++c) {
                r.ltp(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(c)) = to_num(ltp[n][c]);
            }
        }
    }
    r.lambda = j.at("lambda").get<double>();
    r.diagnostics = j.at("diagnostics").get<std::vector<std::string>>();
    return r;
}

std::string csv_num(double v)
{
    return std::isfinite(v) ? fmt::format("{:.17g}", v) : "N/A";
}

void write_text(const std::filesystem::path& file, const std::string& text)
{
    std::ofstream out(file, std::ios::binary);
    if (!out) {
        throw std::runtime_error(fmt::format("cannot write {}", file.string()));
    }
    out << text;
    if (!out) {
        throw std::runtime_error(fmt::format("write failed for {}", file.string()));
    }
}

}  // namespace

void write_report(const BenchmarkReport& report, const std::filesystem::path& dir)
{
    std::filesystem::create_directories(dir);
    ojson j;
    j["format"] = "symode-benchmark";
    j["tool_version"] = std::string(kVersion);
    j["config_hash"] = report.config.config_hash;
    j["master_seed"] = report.config.master_seed;
    j["config"] = config_json(report.config);
    j["dim"] = report.dim;
    j["checkpoints"] = report.checkpoints;
    ojson runs = ojson::array();
    for (const RunRecord& r : report.records) {
        runs.push_back(record_json(r));
    }
    j["runs"] = runs;
    j["summary"] = summaries_json(report.summaries);
    write_text(dir / "report.json", j.dump(2) + "\n");

    std::string tables = "method,metric";
    for (int i = 0; i < report.dim; ++i) {
        tables += fmt::format(",Eq.{}", i + 1);
    }
    tables += ",All\n";
    for (const MethodSummary& s : report.summaries) {
        std::string succ = s.method + ",success", rs = s.method + ",rmse_successful", ra = s.method + ",rmse_all";
        for (std::size_t i = 0; i < s.success_eq.size(); ++i) {
            succ += "," + csv_num(s.success_eq[i]);
            rs += "," + csv_num(s.rmse_successful_eq[i].value_or(kNaN));
            ra += "," + csv_num(s.rmse_all_eq[i]);
        }
        tables += succ + "," + csv_num(s.success_joint) + "\n";
        tables += rs + "," + csv_num(s.rmse_successful_joint.value_or(kNaN)) + "\n";
        tables += ra + "," + csv_num(s.rmse_all_joint) + "\n";
    }
    write_text(dir / "tables.csv", tables);

    std::string ltp = "method,time,mean,std,divergent,count\n";
    for (const MethodSummary& s : report.summaries) {
        for (std::size_t c = 0; c < s.ltp.times.size(); ++c) {
            ltp += fmt::format("{},{:.17g},{},{},{},{}\n", s.method, s.ltp.times[c], csv_num(s.ltp.mean[c]),
                               csv_num(s.ltp.std[c]), s.ltp.divergent[c], s.ltp.count[c]);
        }
    }
    write_text(dir / "ltp.csv", ltp);
}

BenchmarkReport load_report(const std::filesystem::path& dir)
{
    std::ifstream in(dir / "report.json");
    if (!in) {
        throw std::runtime_error(fmt::format("cannot read {}", (dir / "report.json").string()));
    }
    ojson j;
    try {
        j = ojson::parse(in);
    } catch (const std::exception& e) {
        throw std::runtime_error(fmt::format("report.json: {}", e.what()));
    }
    BenchmarkReport r;
    try {
        if (j.at("format") != "symode-benchmark") {
            throw std::runtime_error("report.json: unexpected format tag");
        }
        r.dim = j.at("dim").get<int>();
        r.checkpoints = j.at("checkpoints").get<std::vector<double>>();
        r.config.system = j.at("config").at("system").get<std::string>();
        r.config.methods = j.at("config").at("methods").get<std::vector<std::string>>();
        r.config.runs = j.at("config").at("runs").get<int>();
        r.config.master_seed = j.at("master_seed").get<std::uint64_t>();
        r.config.config_hash = j.at("config_hash").get<std::string>();
        for (const ojson& rec : j.at("runs")) {
            r.records.push_back(record_from_json(rec, r.dim));
        }
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(fmt::format("report.json: {}", e.what()));
    }
    r.summaries = summarize(r.records, r.config.methods, r.dim, r.checkpoints);
    if (summaries_json(r.summaries) != j.at("summary")) {
        throw std::runtime_error("report.json: stored aggregates differ from the run records");
    }
    return r;
}

}  // namespace symode
