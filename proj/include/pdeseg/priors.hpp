#pragma once

#include "pdeseg/field.hpp"

namespace pdeseg {

/// Reaction-diffusion prior parameters. `diffusion` is the coefficient on
/// the Laplacian, `threshold` the unstable root of the cubic reaction term
/// separating the 0 and 1 basins.
struct RDParams {
    double diffusion = 1.0;
    double threshold = 0.5;

    void validate() const;
};

enum class EnergyMode { raw_sum, mean };

/// Phase-field interface energy parameters. `eps` sets the interface
/// thickness. raw_sum is the plain Riemann sum; mean divides by the pixel
/// count so the weight stays scale-free across image sizes.
struct PFParams {
    double eps = 1.5;
    EnergyMode mode = EnergyMode::mean;

    void validate() const;
};

/// Cubic bistable reaction u(1-u)(u-threshold), pixelwise.
Field2D reaction(const Field2D& u, double threshold);

/// Steady-state residual diffusion * laplacian(u) + reaction(u).
Field2D rd_residual(const Field2D& u, const RDParams& p, const GridSpec& g = {});

/// Mean squared residual over all pixels.
double rd_loss(const Field2D& u, const RDParams& p, const GridSpec& g = {});

/// Exact gradient of rd_loss with respect to u:
/// (2/MN) * (diffusion * L(r) + f'(u) . r), using that the padded Laplacian
/// is its own adjoint.
Field2D rd_loss_grad(const Field2D& u, const RDParams& p, const GridSpec& g = {});

/// Double-well potential u^2 (1-u)^2, pixelwise.
Field2D double_well(const Field2D& u);

/// Interface energy: sum of (eps/2)|grad u|^2 + (1/eps) W(u) times the cell
/// area, divided by the pixel count in mean mode.
double pf_energy(const Field2D& u, const PFParams& p, const GridSpec& g = {});

/// Exact gradient of pf_energy with respect to u (reverse mode through the
/// central differences, including the padding adjoint).
Field2D pf_energy_grad(const Field2D& u, const PFParams& p, const GridSpec& g = {});

} // namespace pdeseg
