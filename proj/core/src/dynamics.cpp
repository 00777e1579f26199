#include "symode/dynamics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <fmt/format.h>
#include <json.hpp>

#include "symode/funclib.hpp"
#include "symode/numeric.hpp"
#include "symode/version.hpp"

namespace symode {

std::string to_string(NoiseKind kind)
{
    switch (kind) {
    case NoiseKind::None: return "none";
    case NoiseKind::AdditiveRelative: return "additive";
    case NoiseKind::Multiplicative: return "multiplicative";
    }
    return "?";
}

std::optional<NoiseKind> parse_noise_kind(std::string_view name)
{
    for (NoiseKind k : {NoiseKind::None, NoiseKind::AdditiveRelative, NoiseKind::Multiplicative}) {
        if (name == to_string(k)) {
            return k;
        }
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Registry
// ---------------------------------------------------------------------------

namespace {

TermKey mono(std::vector<int> powers) { return TermKey::monomial(std::move(powers)); }

OdeSystem make_system(std::string name, std::vector<std::string> rhs)
{
    OdeSystem s;
    s.name = std::move(name);
    s.dim = static_cast<int>(rhs.size());
    for (const auto& text : rhs) {
        s.rhs.push_back(parse(text, s.dim));
    }
    s.rhs_text = std::move(rhs);
    return s;
}

OdeSystem oscillator()
{
    OdeSystem s = make_system("oscillator", {"-0.1*x1 - x2", "x1 - 0.1*x2"});
    s.truth_terms = {{{mono({1, 0}), -0.1}, {mono({0, 1}), -1.0}}, {{mono({1, 0}), 1.0}, {mono({0, 1}), -0.1}}};
    Eigen::MatrixXd L(2, 2);
    L << 0, 1, -1, 0;
    s.known_generators.push_back(Generator::linear(L, "rotation"));
    s.sampler = {SamplerKind::Annulus, 0.5, 2.0};
    s.splits = {50, 10, 10};
    s.steps = 100;
    s.dt = 0.2;
    s.noise = {NoiseKind::AdditiveRelative, 0.2, 0};
    s.threshold = 0.05;
    return s;
}

OdeSystem growth()
{
    OdeSystem s = make_system("growth", {"-0.3*x1 + 0.1*x2^2", "x2"});
    s.truth_terms = {{{mono({1, 0}), -0.3}, {mono({0, 2}), 0.1}}, {{mono({0, 1}), 1.0}}};
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(2, 2);
    L(0, 0) = 2.0;
    L(1, 1) = 1.0;
    s.known_generators.push_back(Generator::linear(L, "scaling"));
    s.sampler = {SamplerKind::Box, 0.2, 1.0};
    s.splits = {100, 20, 20};
    s.steps = 100;
    s.dt = 0.02;
    s.noise = {NoiseKind::Multiplicative, 0.05, 0};
    s.threshold = 0.05;
    return s;
}

OdeSystem lotka_volterra()
{
    OdeSystem s = make_system("lv", {"2/3 - (4/3)*exp(x2)", "-1 + exp(x1)"});
    s.truth_terms = {{{TermKey::one(2), 2.0 / 3.0}, {TermKey::exponential(2, 1), -4.0 / 3.0}},
                     {{TermKey::one(2), -1.0}, {TermKey::exponential(2, 0), 1.0}}};
    s.sampler = {SamplerKind::LotkaVolterra, 0.0, 1.0};
    s.splits = {200, 20, 20};
    s.steps = 10000;
    s.dt = 0.002;
    s.noise = {NoiseKind::AdditiveRelative, 0.99, 0};
    s.library_exponentials = true;
    s.threshold = 0.15;
    return s;
}

OdeSystem glycolytic()
{
    OdeSystem s = make_system("glycolytic", {"0.75 - 0.1*x1 - x1*x2^2", "0.1*x1 - x2 + x1*x2^2"});
    s.truth_terms = {{{TermKey::one(2), 0.75}, {mono({1, 0}), -0.1}, {mono({1, 2}), -1.0}},
                     {{mono({1, 0}), 0.1}, {mono({0, 1}), -1.0}, {mono({1, 2}), 1.0}}};
    s.sampler = {SamplerKind::Box, 0.5, 1.0};
    s.splits = {10, 2, 2};
    s.steps = 10000;
    s.dt = 0.002;
    s.noise = {NoiseKind::AdditiveRelative, 0.2, 0};
    s.library_degree = 3;
    s.threshold = 0.075;
    return s;
}

OdeSystem seir()
{
    OdeSystem s = make_system("seir", {"0.15 - 0.6*x1*x3", "0.6*x1*x3 - x2", "x2 - 0.5*x3", "-0.15 + 0.5*x3"});
    const TermKey one = TermKey::one(4);
    const TermKey si = mono({1, 0, 1, 0}), e = mono({0, 1, 0, 0}), i = mono({0, 0, 1, 0});
    s.truth_terms = {{{one, 0.15}, {si, -0.6}}, {{si, 0.6}, {e, -1.0}}, {{e, 1.0}, {i, -0.5}}, {{one, -0.15}, {i, 0.5}}};
    s.known_generators.push_back(
        Generator::symbolic(std::vector<std::string>{"0", "0", "0", "x1 + x2 + x3 + x4"}, "total-population"));
    s.sampler = {SamplerKind::Box, 0.0, 1.0};
    s.splits = {50, 10, 10};
    s.steps = 100;
    s.dt = 0.1;
    s.noise = {NoiseKind::AdditiveRelative, 0.05, 0};
    s.threshold = 0.05;
    return s;
}

}  // namespace

Eigen::MatrixXd OdeSystem::truth_matrix(const std::vector<TermKey>& terms) const
{
    Eigen::MatrixXd W = Eigen::MatrixXd::Zero(dim, static_cast<Eigen::Index>(terms.size()));
    for (int i = 0; i < dim; ++i) {
        for (const auto& [key, c] : truth_terms[static_cast<std::size_t>(i)]) {
            const auto it = std::find(terms.begin(), terms.end(), key);
            if (it == terms.end()) {
                throw std::invalid_argument("truth term " + term_name(key) + " is not in the library");
            }
            W(i, it - terms.begin()) = c;
        }
    }
    return W;
}

const std::vector<std::string>& system_names()
{
    static const std::vector<std::string> names{"oscillator", "growth", "lv", "glycolytic", "seir"};
    return names;
}

OdeSystem get_system(std::string_view name)
{
    if (name == "oscillator") {
        return oscillator();
    }
    if (name == "growth") {
        return growth();
    }
    if (name == "lv") {
        return lotka_volterra();
    }
    if (name == "glycolytic") {
        return glycolytic();
    }
    if (name == "seir") {
        return seir();
    }
    throw std::invalid_argument("unknown system '" + std::string(name) + "'");
}

double lotka_volterra_energy(const Eigen::VectorXd& x)
{
    return std::exp(x[0]) - x[0] + 1.333 * std::exp(x[1]) - 0.667 * x[1];
}

// ---------------------------------------------------------------------------
// Simulation and noise
// ---------------------------------------------------------------------------

Trajectory rk4_integrate(const VectorField& rhs, const Eigen::VectorXd& x0, double dt_internal, long n_internal,
                         int stride)
{
    if (!(dt_internal > 0.0)) {
        throw std::invalid_argument("internal step must be positive");
    }
    if (stride < 1 || n_internal < 0) {
        throw std::invalid_argument("stride must be >= 1 and the step count non-negative");
    }
    const Eigen::Index samples = n_internal / stride + 1;
    Trajectory tr;
    tr.dt = dt_internal * stride;
    tr.states.resize(samples, x0.size());
    tr.states.row(0) = x0.transpose();
    Eigen::VectorXd y = x0;
    for (long s = 1; s <= n_internal; ++s) {
        y = rk4_step(rhs, y, dt_internal);
        if (!y.allFinite()) {
            throw DivergenceError("non-finite state during simulation", s);
        }
        if (s % stride == 0) {
            tr.states.row(s / stride) = y.transpose();
        }
    }
    tr.clean_states = tr.states;
    return tr;
}

Eigen::VectorXd sample_initial(const OdeSystem& system, std::mt19937_64& rng)
{
    const SamplerSpec& sp = system.sampler;
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    Eigen::VectorXd x(system.dim);
    switch (sp.kind) {
    case SamplerKind::Annulus: {
        if (system.dim != 2) {
            throw std::logic_error("annulus sampler is two-dimensional");
        }
        const double r = sp.lo + (sp.hi - sp.lo) * u01(rng);
        const double a = 2.0 * std::numbers::pi * u01(rng);
        x << r * std::cos(a), r * std::sin(a);
        return x;
    }
    case SamplerKind::Box:
        for (int i = 0; i < system.dim; ++i) {
            x[i] = sp.lo + (sp.hi - sp.lo) * u01(rng);
        }
        return x;
    case SamplerKind::LotkaVolterra:
        for (long draw = 0; draw < sp.max_draws; ++draw) {
            // densities in (0, 1], then log densities
            for (int i = 0; i < system.dim; ++i) {
                x[i] = std::log(1.0 - u01(rng));
            }
            const double h = lotka_volterra_energy(x);
            if (h >= sp.energy_lo && h <= sp.energy_hi) {
                return x;
            }
        }
        throw std::runtime_error(fmt::format("initial-condition rejection exceeded {} draws", sp.max_draws));
    }
    throw std::logic_error("unknown sampler");
}

Trajectory add_noise(const Trajectory& traj, const NoiseSpec& spec)
{
    if (spec.sigma < 0.0) {
        throw std::invalid_argument("noise level must be non-negative");
    }
    Trajectory out = traj;
    if (spec.kind == NoiseKind::None || spec.sigma == 0.0) {
        return out;
    }
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> n(0.0, 1.0);
    const Eigen::MatrixXd& c = traj.clean_states;
    if (spec.kind == NoiseKind::AdditiveRelative) {
        for (Eigen::Index j = 0; j < c.cols(); ++j) {
            const double mean = c.col(j).mean();
            const double sd =
                c.rows() > 1 ? std::sqrt((c.col(j).array() - mean).square().sum() / static_cast<double>(c.rows() - 1)) : 0.0;
            for (Eigen::Index i = 0; i < c.rows(); ++i) {
                out.states(i, j) = c(i, j) + spec.sigma * sd * n(rng);
            }
        }
    } else {
        for (Eigen::Index j = 0; j < c.cols(); ++j) {
            for (Eigen::Index i = 0; i < c.rows(); ++i) {
                out.states(i, j) = c(i, j) * (1.0 + spec.sigma * n(rng));
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// GP smoothing
// ---------------------------------------------------------------------------

namespace {

std::vector<Eigen::Index> even_subset(Eigen::Index n, Eigen::Index m)
{
    std::vector<Eigen::Index> idx;
    if (n <= m) {
        for (Eigen::Index i = 0; i < n; ++i) {
            idx.push_back(i);
        }
        return idx;
    }
    for (Eigen::Index k = 0; k < m; ++k) {
        idx.push_back(static_cast<Eigen::Index>(std::llround(static_cast<double>(k) * static_cast<double>(n - 1) /
                                                             static_cast<double>(m - 1))));
    }
    return idx;
}

Eigen::MatrixXd se_kernel(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double length, double sf)
{
    Eigen::MatrixXd K(a.size(), b.size());
    const double s2 = sf * sf, inv = 1.0 / (2.0 * length * length);
    for (Eigen::Index j = 0; j < b.size(); ++j) {
        for (Eigen::Index i = 0; i < a.size(); ++i) {
            const double d = a[i] - b[j];
            K(i, j) = s2 * std::exp(-d * d * inv);
        }
    }
    return K;
}

// Cholesky of K + sn^2 I with escalating jitter (relative to sf^2).
Eigen::LLT<Eigen::MatrixXd> factor(Eigen::MatrixXd K, double sn, double sf)
{
    K.diagonal().array() += sn * sn;
    Eigen::LLT<Eigen::MatrixXd> llt(K);
    double jitter = 1e-8;
    while (llt.info() != Eigen::Success) {
        if (jitter > 1e-4) {
            throw std::runtime_error("GP smoothing: Cholesky failed even with jitter 1e-4");
        }
        Eigen::MatrixXd Kj = K;
        Kj.diagonal().array() += jitter * sf * sf;
        llt.compute(Kj);
        jitter *= 10.0;
    }
    return llt;
}

}  // namespace

Trajectory gp_smooth(const Trajectory& traj, const GpSmoothConfig& cfg, std::vector<GpHyper>* chosen)
{
    const Eigen::Index T = traj.length();
    if (T < 10) {
        throw std::invalid_argument("GP smoothing needs at least 10 samples");
    }
    Trajectory out = traj;
    out.smoothed.resize(T, traj.states.cols());
    if (chosen) {
        chosen->clear();
    }
    Eigen::VectorXd t(T);
    for (Eigen::Index i = 0; i < T; ++i) {
        t[i] = traj.t0 + static_cast<double>(i) * traj.dt;
    }
    const auto fit_idx = even_subset(T, cfg.max_fit_points);
    const auto cond_idx = even_subset(T, cfg.max_condition_points);
    for (Eigen::Index j = 0; j < traj.states.cols(); ++j) {
        const Eigen::VectorXd y = traj.states.col(j);
        const double mean = y.mean();
        const double sd = std::sqrt((y.array() - mean).square().sum() / static_cast<double>(T - 1));
        GpHyper best;
        if (!(sd > 0.0)) {
            out.smoothed.col(j) = y;
            if (chosen) {
                chosen->push_back(best);
            }
            continue;
        }
        Eigen::VectorXd tf(static_cast<Eigen::Index>(fit_idx.size())), yf(tf.size());
        for (std::size_t k = 0; k < fit_idx.size(); ++k) {
            tf[static_cast<Eigen::Index>(k)] = t[fit_idx[k]];
            yf[static_cast<Eigen::Index>(k)] = y[fit_idx[k]] - mean;
        }
        best.log_marginal = -std::numeric_limits<double>::infinity();
        for (double ls : cfg.length_scales) {
            const double length = ls * traj.dt;
            const Eigen::MatrixXd K = se_kernel(tf, tf, length, sd);
            for (double ratio : cfg.noise_ratios) {
                const double sn = ratio * sd;
                const auto llt = factor(K, sn, sd);
                const Eigen::VectorXd alpha = llt.solve(yf);
                const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
                const double lml = -0.5 * yf.dot(alpha) - 0.5 * logdet -
                                   0.5 * static_cast<double>(yf.size()) * std::log(2.0 * std::numbers::pi);
                if (lml > best.log_marginal) {
                    best = {length, sd, sn, lml};
                }
            }
        }
        Eigen::VectorXd tc(static_cast<Eigen::Index>(cond_idx.size())), yc(tc.size());
        for (std::size_t k = 0; k < cond_idx.size(); ++k) {
            tc[static_cast<Eigen::Index>(k)] = t[cond_idx[k]];
            yc[static_cast<Eigen::Index>(k)] = y[cond_idx[k]] - mean;
        }
        const auto llt = factor(se_kernel(tc, tc, best.length, best.signal_sd), best.noise_sd, best.signal_sd);
        const Eigen::VectorXd alpha = llt.solve(yc);
        out.smoothed.col(j) = (se_kernel(t, tc, best.length, best.signal_sd) * alpha).array() + mean;
        if (chosen) {
            chosen->push_back(best);
        }
    }
    return out;
}

Trajectory estimate_derivatives(const Trajectory& traj, std::string* warning)
{
    const Eigen::MatrixXd& x = traj.signal();
    const Eigen::Index T = x.rows();
    if (T < 2) {
        throw std::invalid_argument("derivative estimation needs at least 2 samples");
    }
    if (!(traj.dt > 0.0)) {
        throw std::invalid_argument("trajectory dt must be positive");
    }
    Trajectory out = traj;
    out.derivs.resize(T, x.cols());
    const double h = traj.dt;
    if (T == 2) {
        out.derivs.row(0) = (x.row(1) - x.row(0)) / h;
        out.derivs.row(1) = out.derivs.row(0);
        if (warning) {
            *warning = "trajectory has 2 samples; using a forward difference";
        }
        return out;
    }
    for (Eigen::Index i = 1; i + 1 < T; ++i) {
        out.derivs.row(i) = (x.row(i + 1) - x.row(i - 1)) / (2.0 * h);
    }
    if (T == 3) {
        out.derivs.row(0) = (-3.0 * x.row(0) + 4.0 * x.row(1) - x.row(2)) / (2.0 * h);
        out.derivs.row(2) = (3.0 * x.row(2) - 4.0 * x.row(1) + x.row(0)) / (2.0 * h);
        return out;
    }
    // four-point one-sided stencils keep endpoint error below the interior h^2/6 bound
    out.derivs.row(0) = (-11.0 * x.row(0) + 18.0 * x.row(1) - 9.0 * x.row(2) + 2.0 * x.row(3)) / (6.0 * h);
    out.derivs.row(T - 1) =
        (11.0 * x.row(T - 1) - 18.0 * x.row(T - 2) + 9.0 * x.row(T - 3) - 2.0 * x.row(T - 4)) / (6.0 * h);
    return out;
}

// ---------------------------------------------------------------------------
// Datasets
// ---------------------------------------------------------------------------

Eigen::MatrixXd Dataset::stacked_states(const std::vector<Trajectory>& split) const
{
    Eigen::Index rows = 0;
    for (const auto& tr : split) {
        rows += tr.length();
    }
    Eigen::MatrixXd X(rows, dim);
    Eigen::Index r = 0;
    for (const auto& tr : split) {
        X.middleRows(r, tr.length()) = tr.signal();
        r += tr.length();
    }
    return X;
}

Eigen::MatrixXd Dataset::stacked_derivs(const std::vector<Trajectory>& split) const
{
    Eigen::Index rows = 0;
    for (const auto& tr : split) {
        if (tr.derivs.rows() != tr.length()) {
            throw std::logic_error("trajectory has no derivative estimates");
        }
        rows += tr.length();
    }
    Eigen::MatrixXd D(rows, dim);
    Eigen::Index r = 0;
    for (const auto& tr : split) {
        D.middleRows(r, tr.length()) = tr.derivs;
        r += tr.length();
    }
    return D;
}

Dataset generate_dataset(const OdeSystem& system, const GenerateOptions& opts)
{
    Dataset data;
    data.system = system.name;
    data.dim = system.dim;
    data.dt = system.dt;
    data.noise = opts.noise.value_or(system.noise);
    data.noise.seed = 0;
    data.master_seed = opts.seed;
    data.config_hash = opts.config_hash;
    data.smoothed = opts.smooth && data.noise.kind != NoiseKind::None && data.noise.sigma > 0.0;
    const SplitSizes sizes = opts.splits.value_or(system.splits);
    const int steps = opts.steps.value_or(system.steps);
    if (steps < 2) {
        throw std::invalid_argument("trajectories need at least 2 samples");
    }
    const int stride = static_cast<int>(std::lround(system.dt / kInternalStep));
    if (stride < 1 || std::abs(stride * kInternalStep - system.dt) > 1e-12) {
        throw std::invalid_argument("sampling dt must be a multiple of the internal step");
    }
    const std::size_t total = static_cast<std::size_t>(sizes.train + sizes.val + sizes.test);
    std::vector<Trajectory> all(total);
    const ExprDynamics h = system.dynamics();
    const VectorField field = [&h](const Eigen::VectorXd& x) { return h.rhs(x); };
    parallel_for(total, opts.jobs, [&](std::size_t k) {
        const std::uint64_t ic_seed = split_seed(opts.seed, 2 * k);
        std::mt19937_64 rng(ic_seed);
        const Eigen::VectorXd x0 = sample_initial(system, rng);
        Trajectory tr = rk4_integrate(field, x0, kInternalStep, static_cast<long>(steps - 1) * stride, stride);
        tr.seed = ic_seed;
        NoiseSpec noise = data.noise;
        noise.seed = split_seed(opts.seed, 2 * k + 1);
        tr = add_noise(tr, noise);
        if (data.smoothed) {
            tr = gp_smooth(tr, opts.gp);
        }
        all[k] = estimate_derivatives(tr);
    });
    auto take = [&](std::size_t from, int n) {
        return std::vector<Trajectory>(all.begin() + static_cast<std::ptrdiff_t>(from),
                                       all.begin() + static_cast<std::ptrdiff_t>(from) + n);
    };
    data.train = take(0, sizes.train);
    data.val = take(static_cast<std::size_t>(sizes.train), sizes.val);
    data.test = take(static_cast<std::size_t>(sizes.train + sizes.val), sizes.test);
    return data;
}

namespace {

void write_csv(const Trajectory& tr, int d, const std::filesystem::path& file)
{
    std::ofstream out(file);
    if (!out) {
        throw std::runtime_error("cannot write " + file.string());
    }
    const bool smooth = tr.smoothed.rows() == tr.length();
    const bool deriv = tr.derivs.rows() == tr.length();
    std::string header = "t";
    for (int j = 1; j <= d; ++j) {
        header += fmt::format(",x{}", j);
    }
    if (smooth) {
        for (int j = 1; j <= d; ++j) {
            header += fmt::format(",xs{}", j);
        }
    }
    if (deriv) {
        for (int j = 1; j <= d; ++j) {
            header += fmt::format(",dx{}", j);
        }
    }
    for (int j = 1; j <= d; ++j) {
        header += fmt::format(",c{}", j);
    }
    out << header << '\n';
    std::string line;
    for (Eigen::Index i = 0; i < tr.length(); ++i) {
        line = fmt::format("{:.17g}", tr.t0 + static_cast<double>(i) * tr.dt);
        auto put = [&](const Eigen::MatrixXd& M) {
            for (int j = 0; j < d; ++j) {
                line += fmt::format(",{:.17g}", M(i, j));
            }
        };
        put(tr.states);
        if (smooth) {
            put(tr.smoothed);
        }
        if (deriv) {
            put(tr.derivs);
        }
        put(tr.clean_states);
        out << line << '\n';
    }
}

std::vector<double> split_numbers(const std::string& line, const std::filesystem::path& file, long lineno)
{
    std::vector<double> vals;
    const char* p = line.data();
    const char* end = p + line.size();
    while (p < end) {
        double v = 0.0;
        auto [next, ec] = std::from_chars(p, end, v);
        if (ec != std::errc()) {
            throw std::runtime_error(fmt::format("{}:{}: malformed number", file.string(), lineno));
        }
        vals.push_back(v);
        p = next;
        if (p < end && *p == ',') {
            ++p;
        }
    }
    return vals;
}

Trajectory read_csv(const std::filesystem::path& file, int d, double dt)
{
    std::ifstream in(file);
    if (!in) {
        throw std::runtime_error("cannot read " + file.string());
    }
    std::string header;
    std::getline(in, header);
    bool smooth = header.find(",xs1") != std::string::npos;
    bool deriv = header.find(",dx1") != std::string::npos;
    bool clean = header.find(",c1") != std::string::npos;
    const std::size_t width = 1 + static_cast<std::size_t>(d) * (1 + smooth + deriv + clean);
    std::vector<std::vector<double>> rows;
    std::string line;
    long lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        auto vals = split_numbers(line, file, lineno);
        if (vals.size() != width) {
            throw std::runtime_error(fmt::format("{}:{}: expected {} columns", file.string(), lineno, width));
        }
        rows.push_back(std::move(vals));
    }
    Trajectory tr;
    tr.dt = dt;
    const auto T = static_cast<Eigen::Index>(rows.size());
    if (T > 0) {
        tr.t0 = rows[0][0];
    }
    auto block = [&](std::size_t offset) {
        Eigen::MatrixXd M(T, d);
        for (Eigen::Index i = 0; i < T; ++i) {
            for (int j = 0; j < d; ++j) {
                M(i, j) = rows[static_cast<std::size_t>(i)][offset + static_cast<std::size_t>(j)];
            }
        }
        return M;
    };
    std::size_t off = 1;
    tr.states = block(off);
    off += static_cast<std::size_t>(d);
    if (smooth) {
        tr.smoothed = block(off);
        off += static_cast<std::size_t>(d);
    }
    if (deriv) {
        tr.derivs = block(off);
        off += static_cast<std::size_t>(d);
    }
    tr.clean_states = clean ? block(off) : tr.states;
    return tr;
}

}  // namespace

void save_dataset(const Dataset& data, const std::filesystem::path& dir)
{
    std::filesystem::create_directories(dir);
    nlohmann::ordered_json manifest;
    manifest["format"] = "symode-dataset";
    manifest["tool_version"] = std::string(kVersion);
    manifest["system"] = data.system;
    manifest["dim"] = data.dim;
    manifest["dt"] = data.dt;
    manifest["noise"] = {{"kind", to_string(data.noise.kind)}, {"sigma", data.noise.sigma}};
    manifest["master_seed"] = data.master_seed;
    manifest["config_hash"] = data.config_hash;
    manifest["smoothed"] = data.smoothed;
    auto dump_split = [&](const char* name, const std::vector<Trajectory>& split) {
        nlohmann::ordered_json arr = nlohmann::ordered_json::array();
        for (std::size_t k = 0; k < split.size(); ++k) {
            const std::string file = fmt::format("{}_{:04d}.csv", name, k);
            write_csv(split[k], data.dim, dir / file);
            arr.push_back({{"file", file}, {"seed", split[k].seed}, {"length", split[k].length()}});
        }
        manifest["splits"][name] = arr;
    };
    dump_split("train", data.train);
    dump_split("val", data.val);
    dump_split("test", data.test);
    std::ofstream out(dir / "manifest.json");
    if (!out) {
        throw std::runtime_error("cannot write manifest in " + dir.string());
    }
    out << manifest.dump(2) << '\n';
}

Dataset load_dataset(const std::filesystem::path& dir)
{
    std::ifstream in(dir / "manifest.json");
    if (!in) {
        throw std::runtime_error("no manifest.json in " + dir.string());
    }
    nlohmann::json m;
    try {
        m = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(std::string("manifest.json: ") + e.what());
    }
    if (m.value("format", "") != "symode-dataset") {
        throw std::runtime_error("manifest.json is not a symode dataset");
    }
    Dataset data;
    try {
        data.system = m.at("system").get<std::string>();
        data.dim = m.at("dim").get<int>();
        data.dt = m.at("dt").get<double>();
        const auto kind = parse_noise_kind(m.at("noise").at("kind").get<std::string>());
        if (!kind) {
            throw std::runtime_error("unknown noise kind in manifest");
        }
        data.noise = {*kind, m.at("noise").at("sigma").get<double>(), 0};
        data.master_seed = m.at("master_seed").get<std::uint64_t>();
        data.config_hash = m.value("config_hash", "");
        data.smoothed = m.value("smoothed", false);
        auto load_split = [&](const char* name, std::vector<Trajectory>& split) {
            for (const auto& entry : m.at("splits").at(name)) {
                Trajectory tr = read_csv(dir / entry.at("file").get<std::string>(), data.dim, data.dt);
                tr.seed = entry.value("seed", std::uint64_t{0});
                split.push_back(std::move(tr));
            }
        };
        load_split("train", data.train);
        load_split("val", data.val);
        load_split("test", data.test);
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(std::string("manifest.json: ") + e.what());
    }
    return data;
}

}  // namespace symode
