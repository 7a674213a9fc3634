#pragma once

#include "pdeseg/field.hpp"

#include <utility>
#include <vector>

namespace pdeseg {

/// Boundary-matching distance threshold in pixels.
struct BoundaryParams {
    double eta = 2.0;

    void validate() const;
};

/// Threshold a field at tau; u >= tau maps to foreground.
BinaryMask binarize(const Field2D& u, double tau = 0.5);

/// Dice overlap 2|A^B| / (|A|+|B|); both masks empty scores 1.
double dice(const BinaryMask& pred, const BinaryMask& gt);

/// Intersection over union; both masks empty scores 1.
double iou(const BinaryMask& pred, const BinaryMask& gt);

/// Foreground pixels with at least one 4-neighbor that is background or
/// lies outside the frame, in row-major scan order.
std::vector<std::pair<int, int>> boundary_pixels(const BinaryMask& m);

struct BoundaryScore {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

/// Boundary precision/recall/F1 with pixel-center Euclidean matching at
/// distance eta. Both boundaries empty scores (1,1,1); exactly one empty
/// scores (0,0,0).
BoundaryScore boundary_f1(const BinaryMask& pred, const BinaryMask& gt,
                          const BoundaryParams& p = {});

} // namespace pdeseg
