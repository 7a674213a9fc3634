#include "pdeseg/priors.hpp"

#include "pdeseg/grid.hpp"

#include <stdexcept>

namespace pdeseg {

void RDParams::validate() const {
    if (!(diffusion > 0.0))
        throw std::invalid_argument("RDParams: diffusion must be > 0");
    if (!(threshold > 0.0 && threshold < 1.0))
        throw std::invalid_argument("RDParams: threshold must lie in (0,1)");
}

void PFParams::validate() const {
    if (!(eps > 0.0))
        throw std::invalid_argument("PFParams: eps must be > 0");
}

Field2D reaction(const Field2D& u, double threshold) {
    Field2D out(u.height(), u.width());
    for (std::size_t k = 0; k < u.size(); ++k)
        out[k] = u[k] * (1.0 - u[k]) * (u[k] - threshold);
    return out;
}

Field2D rd_residual(const Field2D& u, const RDParams& p, const GridSpec& g) {
    p.validate();
    Field2D r = laplacian(u, g);
    for (std::size_t k = 0; k < u.size(); ++k)
        r[k] = p.diffusion * r[k] + u[k] * (1.0 - u[k]) * (u[k] - p.threshold);
    return r;
}

double rd_loss(const Field2D& u, const RDParams& p, const GridSpec& g) {
    const Field2D r = rd_residual(u, p, g);
    double acc = 0.0;
    for (std::size_t k = 0; k < r.size(); ++k)
        acc += r[k] * r[k];
    return acc / static_cast<double>(r.size());
}

Field2D rd_loss_grad(const Field2D& u, const RDParams& p, const GridSpec& g) {
    const Field2D r = rd_residual(u, p, g);
    Field2D grad = laplacian(r, g); // adjoint equals the operator itself
    const double scale = 2.0 / static_cast<double>(u.size());
    for (std::size_t k = 0; k < u.size(); ++k) {
        // f'(u) = (1-2u)(u-a) + u(1-u)
        const double fp = (1.0 - 2.0 * u[k]) * (u[k] - p.threshold) + u[k] * (1.0 - u[k]);
        grad[k] = scale * (p.diffusion * grad[k] + fp * r[k]);
    }
    return grad;
}

Field2D double_well(const Field2D& u) {
    Field2D out(u.height(), u.width());
    for (std::size_t k = 0; k < u.size(); ++k) {
        const double s = u[k] * (1.0 - u[k]);
        out[k] = s * s;
    }
    return out;
}

double pf_energy(const Field2D& u, const PFParams& p, const GridSpec& g) {
    p.validate();
    g.validate();
    const Field2D gms = grad_mag_sq(u, g);
    const double cell = g.dx * g.dy;
    double acc = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) {
        const double s = u[k] * (1.0 - u[k]);
        acc += (p.eps / 2.0) * gms[k] + (1.0 / p.eps) * s * s;
    }
    acc *= cell;
    if (p.mode == EnergyMode::mean)
        acc /= static_cast<double>(u.size());
    return acc;
}

Field2D pf_energy_grad(const Field2D& u, const PFParams& p, const GridSpec& g) {
    p.validate();
    g.validate();
    auto [gx, gy] = grad_central(u, g);

    double scale = g.dx * g.dy;
    if (p.mode == EnergyMode::mean)
        scale /= static_cast<double>(u.size());

    // d/d(gx) of (eps/2)(gx^2+gy^2) is eps*gx; pull it back through the
    // difference operators' adjoints.
    for (std::size_t k = 0; k < u.size(); ++k) {
        gx[k] *= p.eps * scale;
        gy[k] *= p.eps * scale;
    }
    Field2D grad = grad_central_x_adjoint(gx, g);
    const Field2D ay = grad_central_y_adjoint(gy, g);
    for (std::size_t k = 0; k < u.size(); ++k) {
        // W'(u) = 2u(1-u)(1-2u)
        const double wp = 2.0 * u[k] * (1.0 - u[k]) * (1.0 - 2.0 * u[k]);
        grad[k] += ay[k] + scale * wp / p.eps;
    }
    return grad;
}

} // namespace pdeseg
