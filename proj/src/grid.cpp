#include "pdeseg/grid.hpp"

#include <algorithm>
#include <stdexcept>

namespace pdeseg {

Field2D mirror_pad(const Field2D& f, int pad) {
    const int M = f.height(), N = f.width();
    if (pad < 1)
        throw std::invalid_argument("mirror_pad: pad must be >= 1");
    if (pad > std::min(M, N))
        throw std::invalid_argument("mirror_pad: pad exceeds field dimension");

    Field2D out(M + 2 * pad, N + 2 * pad);
    for (int i = -pad; i < M + pad; ++i) {
        const int si = mirror_index(i, M);
        for (int j = -pad; j < N + pad; ++j)
            out(i + pad, j + pad) = f(si, mirror_index(j, N));
    }
    return out;
}

Field2D laplacian(const Field2D& f, const GridSpec& g) {
    g.validate();
    const int M = f.height(), N = f.width();
    const double inv_h2 = 1.0 / (g.h * g.h);

    Field2D out(M, N);
    for (int i = 0; i < M; ++i) {
        const int iu = mirror_index(i - 1, M);
        const int id = mirror_index(i + 1, M);
        for (int j = 0; j < N; ++j) {
            const int jl = mirror_index(j - 1, N);
            const int jr = mirror_index(j + 1, N);
            out(i, j) = (f(id, j) + f(iu, j) + f(i, jr) + f(i, jl) - 4.0 * f(i, j)) * inv_h2;
        }
    }
    return out;
}

std::pair<Field2D, Field2D> grad_central(const Field2D& f, const GridSpec& g) {
    g.validate();
    const int M = f.height(), N = f.width();
    const double inv_2h = 1.0 / (2.0 * g.h);

    Field2D gx(M, N), gy(M, N);
    for (int i = 0; i < M; ++i) {
        const int iu = mirror_index(i - 1, M);
        const int id = mirror_index(i + 1, M);
        for (int j = 0; j < N; ++j) {
            const int jl = mirror_index(j - 1, N);
            const int jr = mirror_index(j + 1, N);
            gx(i, j) = (f(i, jr) - f(i, jl)) * inv_2h;
            gy(i, j) = (f(id, j) - f(iu, j)) * inv_2h;
        }
    }
    return {std::move(gx), std::move(gy)};
}

Field2D grad_mag_sq(const Field2D& f, const GridSpec& g) {
    auto [gx, gy] = grad_central(f, g);
    Field2D out(f.height(), f.width());
    for (std::size_t k = 0; k < out.size(); ++k)
        out[k] = gx[k] * gx[k] + gy[k] * gy[k];
    return out;
}

Field2D grad_central_x_adjoint(const Field2D& v, const GridSpec& g) {
    g.validate();
    const int M = v.height(), N = v.width();
    const double inv_2h = 1.0 / (2.0 * g.h);

    Field2D out(M, N, 0.0);
    for (int i = 0; i < M; ++i)
        for (int j = 0; j < N; ++j) {
            const double w = v(i, j) * inv_2h;
            out(i, mirror_index(j + 1, N)) += w;
            out(i, mirror_index(j - 1, N)) -= w;
        }
    return out;
}

Field2D grad_central_y_adjoint(const Field2D& v, const GridSpec& g) {
    g.validate();
    const int M = v.height(), N = v.width();
    const double inv_2h = 1.0 / (2.0 * g.h);

    Field2D out(M, N, 0.0);
    for (int i = 0; i < M; ++i)
        for (int j = 0; j < N; ++j) {
            const double w = v(i, j) * inv_2h;
            out(mirror_index(i + 1, M), j) += w;
            out(mirror_index(i - 1, M), j) -= w;
        }
    return out;
}

} // namespace pdeseg
