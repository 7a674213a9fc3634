#pragma once

#include "pdeseg/errors.hpp"
#include "pdeseg/fidelity.hpp"

#include <cstdint>
#include <ostream>
#include <span>
#include <vector>

namespace pdeseg {

/// Adam hyperparameters shared by the direct solver and network training.
struct AdamOpts {
    double step_size = 0.05;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    void validate() const;
};

/// First/second moment accumulators, one pair per parameter.
struct AdamState {
    std::vector<double> m;
    std::vector<double> v;

    explicit AdamState(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
};

/// One bias-corrected Adam step at time t (1-based). Updates the moments in
/// place and returns the parameter delta (already negated for descent).
std::vector<double> adam_update(AdamState& state, std::span<const double> grad,
                                const AdamOpts& opts, long t);

enum class FieldInit { zeros, noisy };

/// Direct variational solve configuration. The composite weights apply in
/// stage 2 only; stage 1 runs on the data terms alone.
struct SolveConfig {
    int stage1_iters = 300;
    int stage2_iters = 300;
    AdamOpts adam{};
    CompositeWeights weights{};
    RDParams rd{};
    PFParams pf{};
    GridSpec grid{};
    std::uint64_t seed = 0;
    FieldInit init = FieldInit::zeros;
    double init_sigma = 0.1;

    void validate() const;
};

struct SolveReport {
    Field2D final_field;                 // sigmoid image, values in (0,1)
    std::vector<LossBreakdown> loss_log; // one entry per iteration
    int stage_boundary = 0;              // iteration index where stage 2 began
};

/// Minimize the composite objective over a latent field z with
/// u = sigmoid(z), via Adam. Deterministic given the seed. Throws
/// DivergenceError when the loss goes non-finite.
SolveReport solve_variational(const BinaryMask& target, const SolveConfig& cfg);

/// Loss log as CSV: iter,stage,dice,bce,rd,pf,total.
void write_loss_log_csv(std::ostream& os, const SolveReport& report);

} // namespace pdeseg
