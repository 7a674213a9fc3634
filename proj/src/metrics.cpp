#include "pdeseg/metrics.hpp"

#include <stdexcept>
#include <string>

namespace pdeseg {

namespace {
void check_dims(const BinaryMask& a, const BinaryMask& b, const char* op) {
    if (!a.same_dims(b))
        throw std::invalid_argument(std::string(op) + ": mask dims differ");
}

// Fraction of `from` pixels whose nearest `to` pixel lies within eta.
double matched_fraction(const std::vector<std::pair<int, int>>& from,
                        const std::vector<std::pair<int, int>>& to, double eta) {
    const double eta2 = eta * eta;
    std::size_t hits = 0;
    for (const auto& [pi, pj] : from) {
        for (const auto& [qi, qj] : to) {
            const long di = pi - qi, dj = pj - qj;
            if (static_cast<double>(di * di + dj * dj) <= eta2) {
                ++hits;
                break;
            }
        }
    }
    return static_cast<double>(hits) / static_cast<double>(from.size());
}
} // namespace

void BoundaryParams::validate() const {
    if (!(eta > 0.0))
        throw std::invalid_argument("BoundaryParams: eta must be > 0");
}

BinaryMask binarize(const Field2D& u, double tau) {
    BinaryMask m(u.height(), u.width());
    for (std::size_t k = 0; k < u.size(); ++k)
        m[k] = u[k] >= tau ? 1 : 0;
    return m;
}

double dice(const BinaryMask& pred, const BinaryMask& gt) {
    check_dims(pred, gt, "dice");
    std::size_t inter = 0, np = 0, ng = 0;
    for (std::size_t k = 0; k < pred.size(); ++k) {
        np += pred[k];
        ng += gt[k];
        inter += pred[k] & gt[k];
    }
    if (np + ng == 0) return 1.0;
    return 2.0 * static_cast<double>(inter) / static_cast<double>(np + ng);
}

double iou(const BinaryMask& pred, const BinaryMask& gt) {
    check_dims(pred, gt, "iou");
    std::size_t inter = 0, uni = 0;
    for (std::size_t k = 0; k < pred.size(); ++k) {
        inter += pred[k] & gt[k];
        uni += pred[k] | gt[k];
    }
    if (uni == 0) return 1.0;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

std::vector<std::pair<int, int>> boundary_pixels(const BinaryMask& m) {
    const int M = m.height(), N = m.width();
    std::vector<std::pair<int, int>> out;
    for (int i = 0; i < M; ++i)
        for (int j = 0; j < N; ++j) {
            if (!m(i, j)) continue;
            const bool edge = i == 0 || i == M - 1 || j == 0 || j == N - 1 ||
                              !m(i - 1, j) || !m(i + 1, j) || !m(i, j - 1) || !m(i, j + 1);
            if (edge) out.emplace_back(i, j);
        }
    return out;
}

BoundaryScore boundary_f1(const BinaryMask& pred, const BinaryMask& gt,
                          const BoundaryParams& p) {
    check_dims(pred, gt, "boundary_f1");
    p.validate();

    const auto bp = boundary_pixels(pred);
    const auto bg = boundary_pixels(gt);
    if (bp.empty() && bg.empty()) return {1.0, 1.0, 1.0};
    if (bp.empty() || bg.empty()) return {0.0, 0.0, 0.0};

    BoundaryScore s;
    s.precision = matched_fraction(bp, bg, p.eta);
    s.recall = matched_fraction(bg, bp, p.eta);
    const double denom = s.precision + s.recall;
    s.f1 = denom > 0.0 ? 2.0 * s.precision * s.recall / denom : 0.0;
    return s;
}

} // namespace pdeseg
