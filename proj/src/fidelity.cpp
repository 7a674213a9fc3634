#include "pdeseg/fidelity.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pdeseg {

namespace {
constexpr double kBceClamp = 1e-7;

void check_dims(const Field2D& u, const BinaryMask& y, const char* op) {
    if (u.height() != y.height() || u.width() != y.width())
        throw std::invalid_argument(std::string(op) + ": field and mask dims differ");
}
} // namespace

void CompositeWeights::validate() const {
    if (!(lambda_rd >= 0.0) || !(lambda_pf >= 0.0) ||
        !std::isfinite(lambda_rd) || !std::isfinite(lambda_pf))
        throw std::invalid_argument("CompositeWeights: weights must be finite and >= 0");
}

LossValue bce_loss(const Field2D& u, const BinaryMask& y) {
    check_dims(u, y, "bce_loss");
    const double inv_n = 1.0 / static_cast<double>(u.size());

    LossValue out;
    out.grad = Field2D(u.height(), u.width());
    double acc = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) {
        const double uc = std::clamp(u[k], kBceClamp, 1.0 - kBceClamp);
        const double t = static_cast<double>(y[k]);
        acc -= t * std::log(uc) + (1.0 - t) * std::log(1.0 - uc);
        out.grad[k] = inv_n * (uc - t) / (uc * (1.0 - uc));
    }
    out.value = acc * inv_n;
    return out;
}

LossValue soft_dice_loss(const Field2D& u, const BinaryMask& y) {
    check_dims(u, y, "soft_dice_loss");
    constexpr double smooth = 1.0;

    double inter = 0.0, sum_u = 0.0, sum_y = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) {
        sum_u += u[k];
        sum_y += static_cast<double>(y[k]);
        if (y[k]) inter += u[k];
    }
    const double num = 2.0 * inter + smooth;
    const double den = sum_u + sum_y + smooth;

    LossValue out;
    out.value = 1.0 - num / den;
    out.grad = Field2D(u.height(), u.width());
    const double inv_den2 = 1.0 / (den * den);
    for (std::size_t k = 0; k < u.size(); ++k)
        out.grad[k] = (num - 2.0 * static_cast<double>(y[k]) * den) * inv_den2;
    return out;
}

CompositeResult composite_loss(const Field2D& u, const BinaryMask& y,
                               const CompositeWeights& w, const RDParams& rd,
                               const PFParams& pf, const GridSpec& g) {
    w.validate();
    LossValue dice = soft_dice_loss(u, y);
    const LossValue bce = bce_loss(u, y);

    CompositeResult out;
    out.parts.dice = dice.value;
    out.parts.bce = bce.value;
    out.grad = std::move(dice.grad);
    for (std::size_t k = 0; k < u.size(); ++k)
        out.grad[k] += bce.grad[k];
    double total = dice.value + bce.value;

    if (w.lambda_rd != 0.0) {
        out.parts.rd = rd_loss(u, rd, g);
        const Field2D gr = rd_loss_grad(u, rd, g);
        for (std::size_t k = 0; k < u.size(); ++k)
            out.grad[k] += w.lambda_rd * gr[k];
        total += w.lambda_rd * out.parts.rd;
    }
    if (w.lambda_pf != 0.0) {
        out.parts.pf = pf_energy(u, pf, g);
        const Field2D gp = pf_energy_grad(u, pf, g);
        for (std::size_t k = 0; k < u.size(); ++k)
            out.grad[k] += w.lambda_pf * gp[k];
        total += w.lambda_pf * out.parts.pf;
    }
    out.parts.total = total;
    out.value = total;
    return out;
}

} // namespace pdeseg
