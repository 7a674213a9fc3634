#pragma once

#include "pdeseg/field.hpp"

#include <utility>

namespace pdeseg {

/// Reflect an index into [0, n). Edge-duplicating convention: -1 -> 0,
/// -2 -> 1, n -> n-1, n+1 -> n-2. Valid for offsets up to n.
inline int mirror_index(int k, int n) {
    if (k < 0) return -k - 1;
    if (k >= n) return 2 * n - 1 - k;
    return k;
}

/// Pad by `pad` pixels on every side with edge-duplication reflection.
/// pad must be >= 1 and <= min(height, width).
Field2D mirror_pad(const Field2D& f, int pad);

/// Five-point Laplacian with zero-flux boundaries (duplication padding),
/// scaled by 1/h^2. Self-adjoint in the unweighted pixel inner product.
Field2D laplacian(const Field2D& f, const GridSpec& g = {});

/// Central differences (d/dx along columns, d/dy along rows), mirrored at
/// the boundary, scaled by 1/(2h). Returns (df/dx, df/dy).
std::pair<Field2D, Field2D> grad_central(const Field2D& f, const GridSpec& g = {});

/// Pixelwise (df/dx)^2 + (df/dy)^2 from grad_central.
Field2D grad_mag_sq(const Field2D& f, const GridSpec& g = {});

/// Adjoint of the x central-difference operator: scatter v/(2h) into the
/// mirrored j+1 / j-1 slots. Used by reverse-mode energy gradients.
Field2D grad_central_x_adjoint(const Field2D& v, const GridSpec& g = {});

/// Adjoint of the y central-difference operator.
Field2D grad_central_y_adjoint(const Field2D& v, const GridSpec& g = {});

} // namespace pdeseg
