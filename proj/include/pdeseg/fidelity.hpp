#pragma once

#include "pdeseg/field.hpp"
#include "pdeseg/priors.hpp"

namespace pdeseg {

/// Weights on the two PDE penalty terms in the composite objective.
struct CompositeWeights {
    double lambda_rd = 0.0;
    double lambda_pf = 0.0;

    void validate() const;
};

/// Unweighted per-term values of one composite evaluation. Terms whose
/// weight is exactly zero are skipped and recorded as zero, which is what
/// makes stage-1 "PDE never evaluated" observable in the logs.
struct LossBreakdown {
    double dice = 0.0;
    double bce = 0.0;
    double rd = 0.0;
    double pf = 0.0;
    double total = 0.0;
};

/// A scalar loss plus its exact gradient with respect to the field.
struct LossValue {
    double value = 0.0;
    Field2D grad;
};

/// Mean binary cross-entropy of u against y, with u clamped to
/// [1e-7, 1-1e-7] before the logs. Gradient is evaluated on the clamped
/// values.
LossValue bce_loss(const Field2D& u, const BinaryMask& y);

/// Soft Dice loss 1 - (2 sum(u*y) + 1) / (sum(u) + sum(y) + 1).
LossValue soft_dice_loss(const Field2D& u, const BinaryMask& y);

struct CompositeResult {
    double value = 0.0;
    Field2D grad;
    LossBreakdown parts;
};

/// Composite objective: dice + bce + lambda_rd * rd_loss + lambda_pf * pf_energy,
/// with the matching weighted gradient sum.
CompositeResult composite_loss(const Field2D& u, const BinaryMask& y,
                               const CompositeWeights& w, const RDParams& rd,
                               const PFParams& pf, const GridSpec& g = {});

} // namespace pdeseg
