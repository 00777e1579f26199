#include "symode/symmetry.hpp"

#include <cmath>
#include <stdexcept>

#include "symode/term.hpp"

namespace symode {

// ---------------------------------------------------------------------------
// Generator
// ---------------------------------------------------------------------------

Generator Generator::linear(Eigen::MatrixXd L, std::string label)
{
    if (L.rows() != L.cols() || L.rows() == 0) {
        throw std::invalid_argument("linear generator must be a non-empty square matrix");
    }
    if (!L.allFinite()) {
        throw std::invalid_argument("linear generator has non-finite entries");
    }
    const auto d = static_cast<int>(L.rows());
    return Generator(std::move(L), d, std::move(label));
}

Generator Generator::symbolic(std::vector<Expr> components, std::string label)
{
    const int d = static_cast<int>(components.size());
    if (d == 0) {
        throw std::invalid_argument("symbolic generator needs at least one component");
    }
    Symbolic rep;
    for (const Expr& c : components) {
        if (c.min_dimension() > d) {
            throw std::invalid_argument("generator component references a variable beyond its dimension");
        }
        std::vector<Expr> row;
        for (int j = 0; j < d; ++j) {
            row.push_back(simplify(differentiate(c, j)));
        }
        rep.partials.push_back(std::move(row));
    }
    rep.components = std::move(components);
    return Generator(std::move(rep), d, std::move(label));
}

Generator Generator::symbolic(const std::vector<std::string>& components, std::string label)
{
    const int d = static_cast<int>(components.size());
    std::vector<Expr> exprs;
    exprs.reserve(components.size());
    for (const auto& text : components) {
        exprs.push_back(parse(text, d));
    }
    return symbolic(std::move(exprs), std::move(label));
}

const Eigen::MatrixXd& Generator::matrix() const
{
    if (!is_linear()) {
        throw std::logic_error("generator '" + label_ + "' is not linear");
    }
    return std::get<Eigen::MatrixXd>(rep_);
}

const std::vector<Expr>& Generator::components() const
{
    if (is_linear()) {
        throw std::logic_error("generator '" + label_ + "' is linear");
    }
    return std::get<Symbolic>(rep_).components;
}

std::optional<Eigen::MatrixXd> Generator::linear_matrix() const
{
    if (is_linear()) {
        return matrix();
    }
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(dim_, dim_);
    const auto& comps = std::get<Symbolic>(rep_).components;
    for (int i = 0; i < dim_; ++i) {
        auto poly = expand(comps[static_cast<std::size_t>(i)], dim_);
        if (!poly) {
            return std::nullopt;
        }
        for (const auto& [k, c] : *poly) {
            if (std::abs(c) < kCoefficientDropTol) {
                continue;
            }
            if (k.exp_count() != 0 || k.total_degree() != 1) {
                return std::nullopt;
            }
            for (int j = 0; j < dim_; ++j) {
                if (k.powers[static_cast<std::size_t>(j)] == 1) {
                    L(i, j) = c;
                }
            }
        }
    }
    return L;
}

Eigen::VectorXd Generator::operator()(const Eigen::VectorXd& x) const
{
    if (x.size() != dim_) {
        throw std::invalid_argument("point dimension does not match generator");
    }
    if (is_linear()) {
        return matrix() * x;
    }
    const auto& comps = std::get<Symbolic>(rep_).components;
    Eigen::VectorXd out(dim_);
    for (int i = 0; i < dim_; ++i) {
        out[i] = eval(comps[static_cast<std::size_t>(i)], x);
    }
    return out;
}

Eigen::MatrixXd Generator::jacobian(const Eigen::VectorXd& x) const
{
    if (x.size() != dim_) {
        throw std::invalid_argument("point dimension does not match generator");
    }
    if (is_linear()) {
        return matrix();
    }
    const auto& partials = std::get<Symbolic>(rep_).partials;
    Eigen::MatrixXd J(dim_, dim_);
    for (int i = 0; i < dim_; ++i) {
        for (int j = 0; j < dim_; ++j) {
            J(i, j) = eval(partials[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)], x);
        }
    }
    return J;
}

// ---------------------------------------------------------------------------
// Group elements
// ---------------------------------------------------------------------------

Eigen::MatrixXd matrix_exponential(const Eigen::MatrixXd& L, double eps)
{
    if (L.rows() != L.cols()) {
        throw std::invalid_argument("matrix exponential needs a square matrix");
    }
    const Eigen::MatrixXd A = eps * L;
    const auto n = A.rows();
    const double norm = A.cwiseAbs().colwise().sum().maxCoeff();
    int squarings = 0;
    if (norm > 0.5) {
        squarings = static_cast<int>(std::ceil(std::log2(norm / 0.5)));
    }
    const Eigen::MatrixXd B = A / std::ldexp(1.0, squarings);
    // Horner evaluation of sum_{k<=18} B^k / k!
    constexpr int kTaylorDegree = 18;
    Eigen::MatrixXd E = Eigen::MatrixXd::Identity(n, n);
    for (int k = kTaylorDegree; k >= 1; --k) {
        E = Eigen::MatrixXd::Identity(n, n) + (B * E) / static_cast<double>(k);
    }
    for (int s = 0; s < squarings; ++s) {
        E = E * E;
    }
    return E;
}

Eigen::VectorXd act(const GroupElement& g, const Eigen::VectorXd& x, int steps)
{
    if (g.epsilon == 0.0) {
        return x;
    }
    if (!std::isfinite(g.epsilon)) {
        throw std::invalid_argument("group element epsilon must be finite");
    }
    if (g.generator.is_linear()) {
        return matrix_exponential(g.generator.matrix(), g.epsilon) * x;
    }
    return rk4_flow([&](const Eigen::VectorXd& y) { return g.generator(y); }, x, g.epsilon, steps);
}

Eigen::MatrixXd act_jacobian(const GroupElement& g, const Eigen::VectorXd& x, int steps)
{
    const int d = g.generator.dim();
    if (g.epsilon == 0.0) {
        return Eigen::MatrixXd::Identity(d, d);
    }
    if (g.generator.is_linear()) {
        return matrix_exponential(g.generator.matrix(), g.epsilon);
    }
    Eigen::VectorXd z(d + d * d);
    z.head(d) = x;
    Eigen::Map<Eigen::MatrixXd>(z.data() + d, d, d).setIdentity();
    auto field = [&](const Eigen::VectorXd& s) {
        Eigen::VectorXd out(s.size());
        const Eigen::VectorXd y = s.head(d);
        out.head(d) = g.generator(y);
        Eigen::Map<Eigen::MatrixXd>(out.data() + d, d, d) =
            g.generator.jacobian(y) * Eigen::Map<const Eigen::MatrixXd>(s.data() + d, d, d);
        return out;
    };
    z = rk4_flow(field, z, g.epsilon, steps);
    return Eigen::Map<const Eigen::MatrixXd>(z.data() + d, d, d);
}

// ---------------------------------------------------------------------------
// Dynamics
// ---------------------------------------------------------------------------

Eigen::VectorXd DynamicsOracle::flow(const Eigen::VectorXd& x, double tau, int substeps) const
{
    return rk4_flow([this](const Eigen::VectorXd& y) { return rhs(y); }, x, tau, substeps);
}

DynamicsOracle::FlowJvp DynamicsOracle::flow_jvp(const Eigen::VectorXd& x, const Eigen::VectorXd& u, double tau,
                                                 int substeps) const
{
    const auto d = x.size();
    Eigen::VectorXd z(2 * d);
    z << x, u;
    auto field = [&](const Eigen::VectorXd& s) {
        Eigen::VectorXd out(2 * d);
        const Eigen::VectorXd y = s.head(d);
        out.head(d) = rhs(y);
        out.tail(d) = jacobian(y) * s.tail(d);
        return out;
    };
    z = rk4_flow(field, z, tau, substeps);
    return {z.head(d), z.tail(d)};
}

ExprDynamics::ExprDynamics(std::vector<Expr> components) : components_(std::move(components))
{
    const int d = static_cast<int>(components_.size());
    for (const Expr& c : components_) {
        if (c.min_dimension() > d) {
            throw std::invalid_argument("dynamics component references a variable beyond its dimension");
        }
        std::vector<Expr> row;
        for (int j = 0; j < d; ++j) {
            row.push_back(simplify(differentiate(c, j)));
        }
        partials_.push_back(std::move(row));
    }
}

Eigen::VectorXd ExprDynamics::rhs(const Eigen::VectorXd& x) const
{
    Eigen::VectorXd out(dim());
    for (int i = 0; i < dim(); ++i) {
        out[i] = eval(components_[static_cast<std::size_t>(i)], x);
    }
    return out;
}

Eigen::MatrixXd ExprDynamics::jacobian(const Eigen::VectorXd& x) const
{
    const int d = dim();
    Eigen::MatrixXd J(d, d);
    for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) {
            J(i, j) = eval(partials_[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)], x);
        }
    }
    return J;
}

// ---------------------------------------------------------------------------
// Infinitesimal criterion
// ---------------------------------------------------------------------------

CriterionReport check_infinitesimal_criterion(const DynamicsOracle& h, const Generator& gen,
                                              const Eigen::MatrixXd& samples, double tol)
{
    if (samples.rows() == 0) {
        throw std::invalid_argument("criterion check needs at least one sample");
    }
    if (gen.dim() != h.dim() || samples.cols() != h.dim()) {
        throw std::invalid_argument("dimension mismatch between dynamics, generator and samples");
    }
    CriterionReport rep;
    std::vector<double> residuals;
    residuals.reserve(static_cast<std::size_t>(samples.rows()));
    for (Eigen::Index n = 0; n < samples.rows(); ++n) {
        const Eigen::VectorXd x = samples.row(n).transpose();
        const Eigen::VectorXd lhs = h.jacobian(x) * gen(x);
        const Eigen::VectorXd rhs = gen.jacobian(x) * h.rhs(x);
        const double abs_res = (lhs - rhs).norm();
        const double rel = abs_res / (1.0 + rhs.norm());
        rep.max_abs_residual = std::max(rep.max_abs_residual, abs_res);
        rep.max_residual = std::max(rep.max_residual, rel);
        residuals.push_back(rel);
    }
    rep.samples = residuals.size();
    rep.mean_residual = pairwise_sum(residuals) / static_cast<double>(residuals.size());
    rep.consistent = rep.max_residual <= tol;
    return rep;
}

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

std::string to_string(LossKind kind)
{
    switch (kind) {
    case LossKind::IGFE: return "igfe";
    case LossKind::FGFE: return "fgfe";
    case LossKind::FGIE: return "fgie";
    case LossKind::IGIE: return "igie";
    }
    return "?";
}

std::optional<LossKind> parse_loss_kind(std::string_view name)
{
    for (LossKind k : {LossKind::IGFE, LossKind::FGFE, LossKind::FGIE, LossKind::IGIE}) {
        if (name == to_string(k)) {
            return k;
        }
    }
    return std::nullopt;
}

FlowSensitivity flow_sensitivity(const ParametricDynamics& h, const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                                 double tau, int substeps)
{
    const Eigen::Index d = x.size();
    const Eigen::Index P = h.num_params();
    const bool tangent = u.size() > 0;
    // layout: y | Sy (d x P) | delta | Sdelta (d x P)
    const Eigen::Index base = d + d * P;
    Eigen::VectorXd z = Eigen::VectorXd::Zero(tangent ? 2 * base : base);
    z.head(d) = x;
    if (tangent) {
        z.segment(base, d) = u;
    }
    auto field = [&](const Eigen::VectorXd& s) {
        Eigen::VectorXd out(s.size());
        const Eigen::VectorXd y = s.head(d);
        const Eigen::MatrixXd Jh = h.jacobian(y);
        Eigen::Map<const Eigen::MatrixXd> Sy(s.data() + d, d, P);
        out.head(d) = h.rhs(y);
        Eigen::Map<Eigen::MatrixXd>(out.data() + d, d, P) = Jh * Sy + h.rhs_param_jacobian(y);
        if (tangent) {
            const Eigen::VectorXd delta = s.segment(base, d);
            Eigen::Map<const Eigen::MatrixXd> Sd(s.data() + base + d, d, P);
            out.segment(base, d) = Jh * delta;
            Eigen::Map<Eigen::MatrixXd>(out.data() + base + d, d, P) =
                h.jvp_state_jacobian(y, delta) * Sy + Jh * Sd + h.jvp_param_jacobian(y, delta);
        }
        return out;
    };
    z = rk4_flow(field, z, tau, substeps);
    FlowSensitivity out;
    out.state = z.head(d);
    out.state_sens = Eigen::Map<const Eigen::MatrixXd>(z.data() + d, d, P);
    if (tangent) {
        out.tangent = z.segment(base, d);
        out.tangent_sens = Eigen::Map<const Eigen::MatrixXd>(z.data() + base + d, d, P);
    }
    return out;
}

namespace {

// One (point, generator) contribution |r|^2 / |den|^2, optionally with its gradient
// from dr/dtheta and dden/dtheta.
struct Term {
    bool valid = false;
    double value = 0.0;
    Eigen::VectorXd grad;
};

Term relative_term(const Eigen::VectorXd& r, const Eigen::VectorXd& den, const Eigen::MatrixXd* dr,
                   const Eigen::MatrixXd* dden)
{
    Term t;
    const double D = den.squaredNorm();
    if (!(D >= kLossDenominatorFloor)) {
        return t;
    }
    const double num = r.squaredNorm();
    t.valid = true;
    t.value = num / D;
    if (dr != nullptr) {
        t.grad = (2.0 / D) * (dr->transpose() * r) - (2.0 * num / (D * D)) * (dden->transpose() * den);
    }
    return t;
}

LossValue reduce(const std::vector<Term>& terms, bool with_grad, Eigen::Index P)
{
    LossValue out;
    if (terms.empty()) {
        if (with_grad) {
            out.gradient = Eigen::VectorXd::Zero(P);
        }
        return out;
    }
    std::vector<double> values;
    std::vector<Eigen::VectorXd> grads;
    for (const Term& t : terms) {
        if (!t.valid) {
            ++out.skipped;
            continue;
        }
        values.push_back(t.value);
        if (with_grad) {
            grads.push_back(t.grad);
        }
    }
    out.evaluated = values.size();
    if (values.empty()) {
        throw DegenerateLossError("symmetry loss: every (point, generator) pair has a degenerate denominator");
    }
    const double scale = 1.0 / static_cast<double>(values.size());
    out.value = pairwise_sum(values) * scale;
    if (with_grad) {
        out.gradient = pairwise_sum(grads, P) * scale;
    }
    return out;
}

void check_batch(const DynamicsOracle& h, std::span<const Generator> gens, const Eigen::MatrixXd& batch)
{
    if (batch.rows() == 0) {
        throw std::invalid_argument("symmetry loss needs a non-empty batch");
    }
    if (batch.cols() != h.dim()) {
        throw std::invalid_argument("batch dimension does not match dynamics");
    }
    for (const auto& g : gens) {
        if (g.dim() != h.dim()) {
            throw std::invalid_argument("generator dimension does not match dynamics");
        }
    }
}

LossValue igie_impl(const DynamicsOracle& h, const ParametricDynamics* ph, std::span<const Generator> gens,
                    const Eigen::MatrixXd& batch)
{
    check_batch(h, gens, batch);
    const Eigen::Index P = ph ? ph->num_params() : 0;
    std::vector<Term> terms;
    for (Eigen::Index n = 0; n < batch.rows() && !gens.empty(); ++n) {
        const Eigen::VectorXd x = batch.row(n).transpose();
        const Eigen::VectorXd hx = h.rhs(x);
        const Eigen::MatrixXd Jh = h.jacobian(x);
        for (const Generator& g : gens) {
            const Eigen::VectorXd vx = g(x);
            const Eigen::MatrixXd Jv = g.jacobian(x);
            const Eigen::VectorXd a = Jv * hx;
            const Eigen::VectorXd r = a - Jh * vx;
            if (ph) {
                const Eigen::MatrixXd da = Jv * ph->rhs_param_jacobian(x);
                const Eigen::MatrixXd dr = da - ph->jvp_param_jacobian(x, vx);
                terms.push_back(relative_term(r, a, &dr, &da));
            } else {
                terms.push_back(relative_term(r, a, nullptr, nullptr));
            }
        }
    }
    return reduce(terms, ph != nullptr, P);
}

LossValue fgie_impl(const DynamicsOracle& h, const ParametricDynamics* ph, const TransformedBatch& pre)
{
    check_batch(h, pre.generators, pre.points);
    const Eigen::Index P = ph ? ph->num_params() : 0;
    std::vector<Term> terms;
    for (Eigen::Index n = 0; n < pre.points.rows() && !pre.generators.empty(); ++n) {
        const Eigen::VectorXd x = pre.points.row(n).transpose();
        const Eigen::VectorXd hx = h.rhs(x);
        Eigen::MatrixXd Hx;
        if (ph) {
            Hx = ph->rhs_param_jacobian(x);
        }
        for (std::size_t k = 0; k < pre.generators.size(); ++k) {
            const Eigen::VectorXd gx = pre.moved[k].row(n).transpose();
            const Eigen::MatrixXd& Jg = pre.jacobians[k][static_cast<std::size_t>(n)];
            const Eigen::VectorXd a = Jg * hx;
            const Eigen::VectorXd r = a - h.rhs(gx);
            if (ph) {
                const Eigen::MatrixXd da = Jg * Hx;
                const Eigen::MatrixXd dr = da - ph->rhs_param_jacobian(gx);
                terms.push_back(relative_term(r, a, &dr, &da));
            } else {
                terms.push_back(relative_term(r, a, nullptr, nullptr));
            }
        }
    }
    return reduce(terms, ph != nullptr, P);
}

LossValue igfe_impl(const DynamicsOracle& h, const ParametricDynamics* ph, std::span<const Generator> gens,
                    const Eigen::MatrixXd& batch, double tau, int substeps)
{
    if (!(tau > 0.0)) {
        throw std::invalid_argument("IGFE loss needs tau > 0");
    }
    check_batch(h, gens, batch);
    const Eigen::Index P = ph ? ph->num_params() : 0;
    std::vector<Term> terms;
    for (Eigen::Index n = 0; n < batch.rows() && !gens.empty(); ++n) {
        const Eigen::VectorXd x = batch.row(n).transpose();
        for (const Generator& g : gens) {
            const Eigen::VectorXd vx = g(x);
            if (ph) {
                const FlowSensitivity fs = flow_sensitivity(*ph, x, vx, tau, substeps);
                const Eigen::VectorXd r = fs.tangent - g(fs.state);
                const Eigen::MatrixXd dr = fs.tangent_sens - g.jacobian(fs.state) * fs.state_sens;
                terms.push_back(relative_term(r, fs.tangent, &dr, &fs.tangent_sens));
            } else {
                const auto fj = h.flow_jvp(x, vx, tau, substeps);
                terms.push_back(relative_term(fj.tangent - g(fj.state), fj.tangent, nullptr, nullptr));
            }
        }
    }
    return reduce(terms, ph != nullptr, P);
}

LossValue fgfe_impl(const DynamicsOracle& h, const ParametricDynamics* ph, std::span<const Generator> gens,
                    const Eigen::MatrixXd& batch, double tau, double eps, int substeps)
{
    if (!(tau > 0.0)) {
        throw std::invalid_argument("FGFE loss needs tau > 0");
    }
    if (eps == 0.0 || !std::isfinite(eps)) {
        throw std::invalid_argument("FGFE loss needs a finite, nonzero epsilon");
    }
    check_batch(h, gens, batch);
    const Eigen::Index P = ph ? ph->num_params() : 0;
    const Eigen::VectorXd no_tangent;
    std::vector<Term> terms;
    for (Eigen::Index n = 0; n < batch.rows() && !gens.empty(); ++n) {
        const Eigen::VectorXd x = batch.row(n).transpose();
        std::optional<FlowSensitivity> fx_sens;
        Eigen::VectorXd fx;
        if (ph) {
            fx_sens = flow_sensitivity(*ph, x, no_tangent, tau, substeps);
            fx = fx_sens->state;
        } else {
            fx = h.flow(x, tau, substeps);
        }
        for (const Generator& g : gens) {
            const GroupElement ge{g, eps};
            const Eigen::VectorXd gx = act(ge, x, substeps);
            const Eigen::VectorXd g_fx = act(ge, fx, substeps);
            if (ph) {
                const FlowSensitivity fgx = flow_sensitivity(*ph, gx, no_tangent, tau, substeps);
                const Eigen::VectorXd r = fgx.state - g_fx;
                const Eigen::VectorXd den = fgx.state - fx;
                const Eigen::MatrixXd dr = fgx.state_sens - act_jacobian(ge, fx, substeps) * fx_sens->state_sens;
                const Eigen::MatrixXd dden = fgx.state_sens - fx_sens->state_sens;
                terms.push_back(relative_term(r, den, &dr, &dden));
            } else {
                const Eigen::VectorXd fgx = h.flow(gx, tau, substeps);
                terms.push_back(relative_term(fgx - g_fx, fgx - fx, nullptr, nullptr));
            }
        }
    }
    return reduce(terms, ph != nullptr, P);
}

}  // namespace

TransformedBatch precompute_group_action(std::span<const Generator> gens, const Eigen::MatrixXd& batch, double eps,
                                         int substeps)
{
    TransformedBatch pre;
    pre.points = batch;
    pre.generators.assign(gens.begin(), gens.end());
    pre.epsilon = eps;
    for (const Generator& g : gens) {
        const GroupElement ge{g, eps};
        Eigen::MatrixXd moved(batch.rows(), batch.cols());
        std::vector<Eigen::MatrixXd> jac;
        jac.reserve(static_cast<std::size_t>(batch.rows()));
        if (g.is_linear()) {
            const Eigen::MatrixXd E = matrix_exponential(g.matrix(), eps);
            moved = batch * E.transpose();
            jac.assign(static_cast<std::size_t>(batch.rows()), E);
        } else {
            for (Eigen::Index n = 0; n < batch.rows(); ++n) {
                const Eigen::VectorXd x = batch.row(n).transpose();
                moved.row(n) = act(ge, x, substeps).transpose();
                jac.push_back(act_jacobian(ge, x, substeps));
            }
        }
        pre.moved.push_back(std::move(moved));
        pre.jacobians.push_back(std::move(jac));
    }
    return pre;
}

LossValue loss_igfe(const DynamicsOracle& h, std::span<const Generator> gens, const Eigen::MatrixXd& batch, double tau,
                    int substeps)
{
    return igfe_impl(h, nullptr, gens, batch, tau, substeps);
}

LossValue loss_fgfe(const DynamicsOracle& h, std::span<const Generator> gens, const Eigen::MatrixXd& batch, double tau,
                    double eps, int substeps)
{
    return fgfe_impl(h, nullptr, gens, batch, tau, eps, substeps);
}

LossValue loss_fgie(const DynamicsOracle& h, std::span<const Generator> gens, const Eigen::MatrixXd& batch, double eps,
                    int substeps)
{
    return fgie_impl(h, nullptr, precompute_group_action(gens, batch, eps, substeps));
}

LossValue loss_fgie(const DynamicsOracle& h, const TransformedBatch& pre) { return fgie_impl(h, nullptr, pre); }

LossValue loss_igie(const DynamicsOracle& h, std::span<const Generator> gens, const Eigen::MatrixXd& batch)
{
    return igie_impl(h, nullptr, gens, batch);
}

LossValue loss_igfe_grad(const ParametricDynamics& h, std::span<const Generator> gens, const Eigen::MatrixXd& batch,
                         double tau, int substeps)
{
    return igfe_impl(h, &h, gens, batch, tau, substeps);
}

LossValue loss_fgfe_grad(const ParametricDynamics& h, std::span<const Generator> gens, const Eigen::MatrixXd& batch,
                         double tau, double eps, int substeps)
{
    return fgfe_impl(h, &h, gens, batch, tau, eps, substeps);
}

LossValue loss_fgie_grad(const ParametricDynamics& h, const TransformedBatch& pre) { return fgie_impl(h, &h, pre); }

LossValue loss_igie_grad(const ParametricDynamics& h, std::span<const Generator> gens, const Eigen::MatrixXd& batch)
{
    return igie_impl(h, &h, gens, batch);
}

LossValue symmetry_loss(const DynamicsOracle& h, std::span<const Generator> gens, const Eigen::MatrixXd& batch,
                        const LossSettings& s)
{
    switch (s.kind) {
    case LossKind::IGFE: return loss_igfe(h, gens, batch, s.tau, s.substeps);
    case LossKind::FGFE: return loss_fgfe(h, gens, batch, s.tau, s.epsilon, s.substeps);
    case LossKind::FGIE: return loss_fgie(h, gens, batch, s.epsilon, s.substeps);
    case LossKind::IGIE: return loss_igie(h, gens, batch);
    }
    throw std::logic_error("unknown loss kind");
}

LossValue symmetry_loss_grad(const ParametricDynamics& h, std::span<const Generator> gens, const Eigen::MatrixXd& batch,
                             const LossSettings& s)
{
    switch (s.kind) {
    case LossKind::IGFE: return loss_igfe_grad(h, gens, batch, s.tau, s.substeps);
    case LossKind::FGFE: return loss_fgfe_grad(h, gens, batch, s.tau, s.epsilon, s.substeps);
    case LossKind::FGIE: return loss_fgie_grad(h, precompute_group_action(gens, batch, s.epsilon, s.substeps));
    case LossKind::IGIE: return loss_igie_grad(h, gens, batch);
    }
    throw std::logic_error("unknown loss kind");
}

}  // namespace symode
