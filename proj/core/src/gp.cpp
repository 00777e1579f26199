// Genetic-programming engine: one evolving population per output dimension.

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include <fmt/format.h>

#include "symode/discover.hpp"
#include "symode/numeric.hpp"

namespace symode {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Scaled {
    double a = 0.0;
    double b = 0.0;
    Eigen::ArrayXd pred;
    bool finite = false;
};

// a + b f minimizing |y - a - b f|^2.
Scaled linear_scale(const Eigen::ArrayXd& f, const Eigen::ArrayXd& y)
{
    Scaled s;
    if (!f.allFinite()) {
        return s;
    }
    const double fm = f.mean(), ym = y.mean();
    const double vf = (f - fm).square().sum();
    if (vf > 1e-24 * std::max(1.0, fm * fm) * static_cast<double>(f.size())) {
        s.b = ((f - fm) * (y - ym)).sum() / vf;
    }
    s.a = ym - s.b * fm;
    s.pred = s.a + s.b * f;
    s.finite = s.pred.allFinite() && std::isfinite(s.a) && std::isfinite(s.b);
    return s;
}

Expr scaled_expr(const Expr& tree, double a, double b)
{
    if (b == 0.0) {
        return Expr::constant(a);
    }
    Expr body = b == 1.0 ? tree : Expr::mul(Expr::constant(b), tree);
    return simplify(a == 0.0 ? body : Expr::add(Expr::constant(a), body));
}

// sum_n |(J_g h)_dim - c(g.x)|^2 / sum_n |(J_g h)_dim|^2 for generator k
double penalty(const Eigen::ArrayXd& pred, const Eigen::ArrayXd& moved_pred, int dim, const GpPenaltyData& pen,
               std::size_t k)
{
    double num = 0.0, den = 0.0;
    Eigen::VectorXd hx(pen.dX.cols());
    for (Eigen::Index n = 0; n < pen.X.rows(); ++n) {
        hx = pen.dX.row(n).transpose();
        hx[dim] = pred[n];
        const double target = pen.jacobians[k][static_cast<std::size_t>(n)].row(dim).dot(hx);
        const double r = target - moved_pred[n];
        num += r * r;
        den += target * target;
    }
    return den > 1e-30 ? num / den : 0.0;
}

GpFitness evaluate(const Expr& tree, int dim, const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double yvar,
                   const GpConfig& cfg, const GpPenaltyData* pen, double lambda, Scaled* scale_out)
{
    GpFitness fit;
    fit.size = tree.node_count();
    const Scaled s = linear_scale(eval_rows(tree, X, DivisionMode::Protected), y.array());
    if (!s.finite) {
        fit.mse = fit.total = kInf;
        return fit;
    }
    fit.mse = (y.array() - s.pred).square().mean() / yvar;
    fit.total = fit.mse + cfg.parsimony * static_cast<double>(fit.size);
    if (pen && lambda > 0.0 && !pen->moved.empty()) {
        double acc = 0.0;
        for (std::size_t k = 0; k < pen->moved.size(); ++k) {
            const Eigen::ArrayXd moved = s.a + s.b * eval_rows(tree, pen->moved[k], DivisionMode::Protected);
            acc += penalty(s.pred, moved, dim, *pen, k);
        }
        fit.symm_penalty = acc / static_cast<double>(pen->moved.size());
        if (!std::isfinite(fit.symm_penalty)) {
            fit.mse = fit.total = kInf;
            return fit;
        }
        fit.total += lambda * fit.symm_penalty;
    }
    if (!std::isfinite(fit.total)) {
        fit.total = kInf;
    }
    if (scale_out) {
        *scale_out = s;
    }
    return fit;
}

// ---------------------------------------------------------------------------
// Tree operators
// ---------------------------------------------------------------------------

class Breeder {
public:
    Breeder(int dim, const GpConfig& cfg, std::uint64_t seed) : dim_(dim), cfg_(cfg), rng_(seed) {}

    std::mt19937_64& rng() { return rng_; }

    Expr terminal()
    {
        if (coin(0.5)) {
            return Expr::variable(uniform_int(0, dim_ - 1));
        }
        return Expr::constant(constant());
    }

    Expr random_tree(int depth, bool full)
    {
        if (depth <= 1 || (!full && coin(0.3))) {
            return terminal();
        }
        const int op = uniform_int(0, num_ops() - 1);
        if (op == unary_op()) {
            return Expr::exp(random_tree(depth - 1, full));
        }
        return binary(op, random_tree(depth - 1, full), random_tree(depth - 1, full));
    }

    Expr crossover(const Expr& a, const Expr& b)
    {
        const Expr donor = pick_subtree(b);
        return bounded(replace_at(a, uniform_index(a), donor), a);
    }

    Expr subtree_mutation(const Expr& a)
    {
        return bounded(replace_at(a, uniform_index(a), random_tree(uniform_int(1, 3), false)), a);
    }

    Expr point_mutation(const Expr& a)
    {
        const std::size_t at = uniform_index(a);
        const Expr node = subtree_at(a, at);
        Expr repl;
        switch (node.kind()) {
        case NodeKind::Constant:
            repl = coin(0.5) ? Expr::constant(node.value() + normal(0.1 * (cfg_.const_hi - cfg_.const_lo)))
                             : Expr::constant(constant());
            break;
        case NodeKind::Variable:
            repl = Expr::variable(uniform_int(0, dim_ - 1));
            break;
        case NodeKind::Add:
        case NodeKind::Sub:
        case NodeKind::Mul:
        case NodeKind::Div:
            repl = binary(uniform_int(0, num_binary() - 1), node.child(0), node.child(1));
            break;
        default:
            repl = terminal();  // unary and other nodes collapse to a leaf
            break;
        }
        return bounded(replace_at(a, at, repl), a);
    }

    bool coin(double p) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng_) < p; }
    double uniform01() { return std::uniform_real_distribution<double>(0.0, 1.0)(rng_); }
    int uniform_int(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }

private:
    int num_binary() const { return cfg_.use_div ? 4 : 3; }
    int num_ops() const { return num_binary() + (cfg_.use_exp ? 1 : 0); }
    int unary_op() const { return cfg_.use_exp ? num_binary() : -1; }

    static Expr binary(int op, Expr l, Expr r)
    {
        switch (op) {
        case 0: return Expr::add(std::move(l), std::move(r));
        case 1: return Expr::sub(std::move(l), std::move(r));
        case 2: return Expr::mul(std::move(l), std::move(r));
        default: return Expr::div(std::move(l), std::move(r));
        }
    }

    double constant() { return std::uniform_real_distribution<double>(cfg_.const_lo, cfg_.const_hi)(rng_); }
    double normal(double sd) { return std::normal_distribution<double>(0.0, sd)(rng_); }

    std::size_t uniform_index(const Expr& e)
    {
        return static_cast<std::size_t>(uniform_int(0, static_cast<int>(e.node_count()) - 1));
    }

    Expr pick_subtree(const Expr& e) { return subtree_at(e, uniform_index(e)); }

    Expr bounded(Expr child, const Expr& parent) const
    {
        return static_cast<int>(child.depth()) <= cfg_.max_depth ? child : parent;
    }

    // Preorder indexing.
    static Expr subtree_at(const Expr& e, std::size_t index)
    {
        if (index == 0) {
            return e;
        }
        --index;
        for (std::size_t c = 0; c < e.arity(); ++c) {
            const std::size_t n = e.child(c).node_count();
            if (index < n) {
                return subtree_at(e.child(c), index);
            }
            index -= n;
        }
        throw std::out_of_range("subtree index");
    }

    static Expr replace_at(const Expr& e, std::size_t index, const Expr& sub)
    {
        if (index == 0) {
            return sub;
        }
        --index;
        std::vector<Expr> kids;
        for (std::size_t c = 0; c < e.arity(); ++c) {
            kids.push_back(e.child(c));
        }
        for (auto& kid : kids) {
            const std::size_t n = kid.node_count();
            if (index < n) {
                kid = replace_at(kid, index, sub);
                break;
            }
            index -= n;
        }
        switch (e.kind()) {
        case NodeKind::Add: return Expr::add(kids[0], kids[1]);
        case NodeKind::Sub: return Expr::sub(kids[0], kids[1]);
        case NodeKind::Mul: return Expr::mul(kids[0], kids[1]);
        case NodeKind::Div: return Expr::div(kids[0], kids[1]);
        case NodeKind::Neg: return Expr::neg(kids[0]);
        case NodeKind::Exp: return Expr::exp(kids[0]);
        case NodeKind::Pow: return Expr::pow(kids[0], e.exponent());
        default: throw std::logic_error("replace_at on a leaf with a nonzero index");
        }
    }

    int dim_;
    const GpConfig& cfg_;
    std::mt19937_64 rng_;
};

void check_gp_config(const GpConfig& cfg)
{
    if (cfg.population < 2 || cfg.generations < 0 || cfg.max_depth < 1 || cfg.init_depth < 1 ||
        cfg.tournament < 1 || cfg.max_points < 2) {
        throw std::invalid_argument("gp: invalid population, depth, tournament or sample settings");
    }
    if (cfg.crossover < 0.0 || cfg.subtree_mutation < 0.0 || cfg.point_mutation < 0.0 ||
        cfg.crossover + cfg.subtree_mutation + cfg.point_mutation <= 0.0) {
        throw std::invalid_argument("gp: operator rates must be non-negative with a positive sum");
    }
    if (!(cfg.const_lo < cfg.const_hi) || cfg.parsimony < 0.0) {
        throw std::invalid_argument("gp: invalid constant range or parsimony");
    }
}

}  // namespace

GpPenaltyData gp_penalty_data(const Eigen::MatrixXd& X, const Eigen::MatrixXd& dX, const GpSymmetry& symmetry)
{
    const TransformedBatch pre = precompute_group_action(symmetry.generators, X, symmetry.eps);
    return {X, dX, pre.moved, pre.jacobians};
}

GpFitness gp_fitness(const Expr& tree, int dim, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                     const GpConfig& cfg, const GpPenaltyData* pen, double lambda)
{
    const Eigen::ArrayXd ya = y.array();
    const double var = (ya - ya.mean()).square().mean();
    return evaluate(tree, dim, X, y, var > 0.0 ? var : 1.0, cfg, pen, lambda, nullptr);
}

GpResult gp_fit(const TrainingData& data, const DiscoveryConfig& dcfg, const std::optional<GpSymmetry>& symmetry)
{
    const GpConfig& cfg = dcfg.gp;
    check_gp_config(cfg);
    const auto d = static_cast<int>(data.X.cols());
    if (d == 0 || data.X.rows() < 2 || data.dX.rows() != data.X.rows() || data.dX.cols() != d) {
        throw std::invalid_argument("gp: training data must have matching X and dX with at least 2 rows");
    }
    if (symmetry && !(symmetry->lambda >= 0.0)) {
        throw std::invalid_argument("gp: symmetry lambda must be >= 0");
    }

    // evenly spaced fitness rows
    const Eigen::Index N = data.X.rows();
    const Eigen::Index M = std::min<Eigen::Index>(N, cfg.max_points);
    Eigen::MatrixXd X(M, d), dX(M, d);
    for (Eigen::Index k = 0; k < M; ++k) {
        const Eigen::Index row = M == 1 ? 0 : (k * (N - 1)) / (M - 1);
        X.row(k) = data.X.row(row);
        dX.row(k) = data.dX.row(row);
    }
    std::optional<GpPenaltyData> pen;
    const double lambda = symmetry ? symmetry->lambda : 0.0;
    if (symmetry && lambda > 0.0 && !symmetry->generators.empty()) {
        pen = gp_penalty_data(X, dX, *symmetry);
    }

    GpResult result;
    for (int i = 0; i < d; ++i) {
        Breeder breeder(d, cfg, split_seed(dcfg.seed, static_cast<std::uint64_t>(i)));
        const Eigen::VectorXd y = dX.col(i);
        const Eigen::ArrayXd ya = y.array();
        const double var = (ya - ya.mean()).square().mean();
        const double yvar = var > 0.0 ? var : 1.0;
        auto score = [&](const Expr& t) { return evaluate(t, i, X, y, yvar, cfg, pen ? &*pen : nullptr, lambda, nullptr); };

        auto seed_population = [&] {
            std::vector<Expr> pop;
            pop.reserve(static_cast<std::size_t>(cfg.population));
            for (int k = 0; k < cfg.population; ++k) {
                const int depth = 1 + k % cfg.init_depth;  // ramped half-and-half
                pop.push_back(breeder.random_tree(depth, k % 2 == 0));
            }
            return pop;
        };
        std::vector<Expr> pop = seed_population();
        std::vector<GpFitness> fit(pop.size());
        auto score_all = [&] {
            bool any = false;
            for (std::size_t k = 0; k < pop.size(); ++k) {
                fit[k] = score(pop[k]);
                any = any || std::isfinite(fit[k].total);
            }
            return any;
        };
        if (!score_all()) {
            result.diagnostics.push_back(fmt::format("equation {}: initial population non-finite; reseeded", i + 1));
            pop = seed_population();
            if (!score_all()) {
                throw std::runtime_error(fmt::format("gp: every candidate for equation {} is non-finite", i + 1));
            }
        }
        auto best_index = [&] {
            std::size_t b = 0;
            for (std::size_t k = 1; k < fit.size(); ++k) {
                if (fit[k].total < fit[b].total) {
                    b = k;
                }
            }
            return b;
        };
        auto tournament = [&]() -> const Expr& {
            std::size_t b = static_cast<std::size_t>(breeder.uniform_int(0, cfg.population - 1));
            for (int t = 1; t < cfg.tournament; ++t) {
                const auto c = static_cast<std::size_t>(breeder.uniform_int(0, cfg.population - 1));
                if (fit[c].total < fit[b].total) {
                    b = c;
                }
            }
            return pop[b];
        };
        const double rate_sum = cfg.crossover + cfg.subtree_mutation + cfg.point_mutation;

        for (int gen = 0; gen < cfg.generations; ++gen) {
            std::vector<Expr> next;
            next.reserve(pop.size());
            next.push_back(pop[best_index()]);  // elitism
            while (static_cast<int>(next.size()) < cfg.population) {
                const double r = breeder.uniform01() * rate_sum;
                if (r < cfg.crossover) {
                    const Expr& a = tournament();
                    next.push_back(breeder.crossover(a, tournament()));
                } else if (r < cfg.crossover + cfg.subtree_mutation) {
                    next.push_back(breeder.subtree_mutation(tournament()));
                } else {
                    next.push_back(breeder.point_mutation(tournament()));
                }
            }
            pop = std::move(next);
            if (!score_all()) {
                throw std::runtime_error(fmt::format("gp: every candidate for equation {} is non-finite", i + 1));
            }
        }

        const std::size_t b = best_index();
        Scaled s;
        const GpFitness f = evaluate(pop[b], i, X, y, yvar, cfg, pen ? &*pen : nullptr, lambda, &s);
        result.equations.push_back(scaled_expr(pop[b], s.a, s.b));
        result.fitness.push_back(f);
    }
    return result;
}

}  // namespace symode
