#include "pdeseg/solver.hpp"

#include "pdeseg/rng.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace pdeseg {

void AdamOpts::validate() const {
    if (!(step_size > 0.0))
        throw std::invalid_argument("AdamOpts: step_size must be > 0");
    if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0))
        throw std::invalid_argument("AdamOpts: betas must lie in (0,1)");
    if (!(eps > 0.0))
        throw std::invalid_argument("AdamOpts: eps must be > 0");
}

void SolveConfig::validate() const {
    if (stage1_iters < 0 || stage2_iters < 0)
        throw std::invalid_argument("SolveConfig: iteration counts must be >= 0");
    if (stage1_iters == 0 && stage2_iters == 0)
        throw std::invalid_argument("SolveConfig: at least one stage must run");
    adam.validate();
    weights.validate();
    rd.validate();
    pf.validate();
    grid.validate();
    if (init == FieldInit::noisy && !(init_sigma >= 0.0))
        throw std::invalid_argument("SolveConfig: init_sigma must be >= 0");
}

std::vector<double> adam_update(AdamState& state, std::span<const double> grad,
                                const AdamOpts& opts, long t) {
    if (t < 1)
        throw std::invalid_argument("adam_update: t must be >= 1");
    if (state.m.size() != grad.size() || state.v.size() != grad.size())
        throw std::invalid_argument("adam_update: state dims do not match gradient");

    const double c1 = 1.0 - std::pow(opts.beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(opts.beta2, static_cast<double>(t));

    std::vector<double> delta(grad.size());
    for (std::size_t k = 0; k < grad.size(); ++k) {
        state.m[k] = opts.beta1 * state.m[k] + (1.0 - opts.beta1) * grad[k];
        state.v[k] = opts.beta2 * state.v[k] + (1.0 - opts.beta2) * grad[k] * grad[k];
        const double mhat = state.m[k] / c1;
        const double vhat = state.v[k] / c2;
        delta[k] = -opts.step_size * mhat / (std::sqrt(vhat) + opts.eps);
    }
    return delta;
}

namespace {
Field2D sigmoid_of(const std::vector<double>& z, int h, int w) {
    Field2D u(h, w);
    for (std::size_t k = 0; k < z.size(); ++k)
        u[k] = 1.0 / (1.0 + std::exp(-z[k]));
    return u;
}
} // namespace

SolveReport solve_variational(const BinaryMask& target, const SolveConfig& cfg) {
    cfg.validate();
    const int M = target.height(), N = target.width();
    const std::size_t n = target.size();

    std::vector<double> z(n, 0.0);
    if (cfg.init == FieldInit::noisy) {
        Rng rng(cfg.seed);
        for (auto& zk : z)
            zk = rng.normal(0.0, cfg.init_sigma);
    }

    SolveReport report;
    report.stage_boundary = cfg.stage1_iters;
    report.loss_log.reserve(static_cast<std::size_t>(cfg.stage1_iters + cfg.stage2_iters));

    AdamState state(n);
    const CompositeWeights no_priors{};
    const int total_iters = cfg.stage1_iters + cfg.stage2_iters;

    Field2D u = sigmoid_of(z, M, N);
    for (int it = 0; it < total_iters; ++it) {
        const bool stage2 = it >= cfg.stage1_iters;
        const CompositeWeights& w = stage2 ? cfg.weights : no_priors;

        CompositeResult res = composite_loss(u, target, w, cfg.rd, cfg.pf, cfg.grid);
        if (!std::isfinite(res.value))
            throw DivergenceError("iteration", static_cast<std::size_t>(it));
        report.loss_log.push_back(res.parts);

        // chain rule through u = sigmoid(z): du/dz = u(1-u)
        std::vector<double> gz(n);
        for (std::size_t k = 0; k < n; ++k)
            gz[k] = res.grad[k] * u[k] * (1.0 - u[k]);

        const std::vector<double> delta = adam_update(state, gz, cfg.adam, it + 1);
        for (std::size_t k = 0; k < n; ++k)
            z[k] += delta[k];
        u = sigmoid_of(z, M, N);
    }

    report.final_field = std::move(u);
    return report;
}

void write_loss_log_csv(std::ostream& os, const SolveReport& report) {
    os << "iter,stage,dice,bce,rd,pf,total\n";
    char buf[160];
    for (std::size_t it = 0; it < report.loss_log.size(); ++it) {
        const LossBreakdown& b = report.loss_log[it];
        const int stage = static_cast<int>(it) >= report.stage_boundary ? 2 : 1;
        std::snprintf(buf, sizeof(buf), "%zu,%d,%.6g,%.6g,%.6g,%.6g,%.6g\n",
                      it, stage, b.dice, b.bce, b.rd, b.pf, b.total);
        os << buf;
    }
}

} // namespace pdeseg
