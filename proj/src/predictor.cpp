#include "pdeseg/predictor.hpp"

#include "pdeseg/errors.hpp"
#include "pdeseg/grid.hpp"
#include "pdeseg/metrics.hpp"
#include "pdeseg/rng.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace pdeseg {

using nlohmann::json;

void ArchConfig::validate() const {
    if (depth < 1)
        throw std::invalid_argument("ArchConfig: depth must be >= 1");
    if (base_channels < 1)
        throw std::invalid_argument("ArchConfig: base_channels must be >= 1");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
        throw std::invalid_argument("ArchConfig: dropout_rate must lie in [0,1)");
}

int ArchConfig::level_channels(int level) const { return base_channels << level; }

namespace {

// ---- small channel-major tensor -----------------------------------------

struct Tensor3 {
    int ch = 0, h = 0, w = 0;
    std::vector<double> v;

    Tensor3() = default;
    Tensor3(int ch_, int h_, int w_, double fill = 0.0)
        : ch(ch_), h(h_), w(w_),
          v(static_cast<std::size_t>(ch_) * h_ * w_, fill) {}

    double& at(int c, int i, int j) { return v[(static_cast<std::size_t>(c) * h + i) * w + j]; }
    double at(int c, int i, int j) const { return v[(static_cast<std::size_t>(c) * h + i) * w + j]; }
};

Tensor3 from_field(const Field2D& f) {
    Tensor3 t(1, f.height(), f.width());
    t.v = f.values();
    return t;
}

// duplication padding by one pixel per side, all channels
Tensor3 pad1(const Tensor3& in) {
    Tensor3 out(in.ch, in.h + 2, in.w + 2);
    for (int c = 0; c < in.ch; ++c)
        for (int i = -1; i <= in.h; ++i) {
            const int si = mirror_index(i, in.h);
            for (int j = -1; j <= in.w; ++j)
                out.at(c, i + 1, j + 1) = in.at(c, si, mirror_index(j, in.w));
        }
    return out;
}

// adjoint of pad1: fold the padded border back onto its source pixels
Tensor3 pad1_adjoint(const Tensor3& dpad, int h, int w) {
    Tensor3 out(dpad.ch, h, w);
    for (int c = 0; c < dpad.ch; ++c)
        for (int i = -1; i <= h; ++i) {
            const int si = mirror_index(i, h);
            for (int j = -1; j <= w; ++j)
                out.at(c, si, mirror_index(j, w)) += dpad.at(c, i + 1, j + 1);
        }
    return out;
}

Tensor3 conv_forward(const ConvParam& p, const Tensor3& in) {
    Tensor3 out(p.out_ch, in.h, in.w);
    if (p.ksize == 1) {
        for (int o = 0; o < p.out_ch; ++o)
            for (int i = 0; i < in.h; ++i)
                for (int j = 0; j < in.w; ++j) {
                    double acc = p.b[static_cast<std::size_t>(o)];
                    for (int c = 0; c < p.in_ch; ++c)
                        acc += p.wat(o, c, 0, 0) * in.at(c, i, j);
                    out.at(o, i, j) = acc;
                }
        return out;
    }
    const Tensor3 padded = pad1(in);
    for (int o = 0; o < p.out_ch; ++o)
        for (int i = 0; i < in.h; ++i)
            for (int j = 0; j < in.w; ++j) {
                double acc = p.b[static_cast<std::size_t>(o)];
                for (int c = 0; c < p.in_ch; ++c)
                    for (int a = 0; a < 3; ++a)
                        for (int bb = 0; bb < 3; ++bb)
                            acc += p.wat(o, c, a, bb) * padded.at(c, i + a, j + bb);
                out.at(o, i, j) = acc;
            }
    return out;
}

// accumulates dW/db into `grad`; returns the input gradient
Tensor3 conv_backward(const ConvParam& p, const Tensor3& in, const Tensor3& dout,
                      ConvParam& grad) {
    if (p.ksize == 1) {
        Tensor3 din(in.ch, in.h, in.w);
        for (int o = 0; o < p.out_ch; ++o)
            for (int i = 0; i < in.h; ++i)
                for (int j = 0; j < in.w; ++j) {
                    const double g = dout.at(o, i, j);
                    grad.b[static_cast<std::size_t>(o)] += g;
                    for (int c = 0; c < p.in_ch; ++c) {
                        grad.wat(o, c, 0, 0) += g * in.at(c, i, j);
                        din.at(c, i, j) += g * p.wat(o, c, 0, 0);
                    }
                }
        return din;
    }
    const Tensor3 padded = pad1(in);
    Tensor3 dpad(in.ch, in.h + 2, in.w + 2);
    for (int o = 0; o < p.out_ch; ++o)
        for (int i = 0; i < in.h; ++i)
            for (int j = 0; j < in.w; ++j) {
                const double g = dout.at(o, i, j);
                grad.b[static_cast<std::size_t>(o)] += g;
                for (int c = 0; c < p.in_ch; ++c)
                    for (int a = 0; a < 3; ++a)
                        for (int bb = 0; bb < 3; ++bb) {
                            grad.wat(o, c, a, bb) += g * padded.at(c, i + a, j + bb);
                            dpad.at(c, i + a, j + bb) += g * p.wat(o, c, a, bb);
                        }
            }
    return pad1_adjoint(dpad, in.h, in.w);
}

void relu_inplace(Tensor3& t) {
    for (auto& x : t.v)
        x = x > 0.0 ? x : 0.0;
}

Tensor3 relu_backward(const Tensor3& post, const Tensor3& dout) {
    Tensor3 din = dout;
    for (std::size_t k = 0; k < din.v.size(); ++k)
        if (post.v[k] <= 0.0) din.v[k] = 0.0;
    return din;
}

// 2x2 max pool, stride 2; ties go to the smallest linear index in the window
Tensor3 maxpool2(const Tensor3& in, std::vector<std::int32_t>& argmax) {
    Tensor3 out(in.ch, in.h / 2, in.w / 2);
    argmax.assign(out.v.size(), 0);
    std::size_t n = 0;
    for (int c = 0; c < in.ch; ++c)
        for (int i = 0; i < out.h; ++i)
            for (int j = 0; j < out.w; ++j, ++n) {
                double best = in.at(c, 2 * i, 2 * j);
                int best_pos = 0;
                int pos = 0;
                for (int a = 0; a < 2; ++a)
                    for (int bb = 0; bb < 2; ++bb, ++pos) {
                        const double x = in.at(c, 2 * i + a, 2 * j + bb);
                        if (x > best) {
                            best = x;
                            best_pos = pos;
                        }
                    }
                out.v[n] = best;
                argmax[n] = best_pos;
            }
    return out;
}

Tensor3 maxpool2_backward(int in_h, int in_w, const Tensor3& dout,
                          const std::vector<std::int32_t>& argmax) {
    Tensor3 din(dout.ch, in_h, in_w);
    std::size_t n = 0;
    for (int c = 0; c < dout.ch; ++c)
        for (int i = 0; i < dout.h; ++i)
            for (int j = 0; j < dout.w; ++j, ++n) {
                const int pos = argmax[n];
                din.at(c, 2 * i + pos / 2, 2 * j + pos % 2) += dout.v[n];
            }
    return din;
}

Tensor3 upsample2(const Tensor3& in) {
    Tensor3 out(in.ch, in.h * 2, in.w * 2);
    for (int c = 0; c < in.ch; ++c)
        for (int i = 0; i < out.h; ++i)
            for (int j = 0; j < out.w; ++j)
                out.at(c, i, j) = in.at(c, i / 2, j / 2);
    return out;
}

Tensor3 upsample2_backward(const Tensor3& dout) {
    Tensor3 din(dout.ch, dout.h / 2, dout.w / 2);
    for (int c = 0; c < dout.ch; ++c)
        for (int i = 0; i < dout.h; ++i)
            for (int j = 0; j < dout.w; ++j)
                din.at(c, i / 2, j / 2) += dout.at(c, i, j);
    return din;
}

// channel order: decoder path first, then the encoder skip
Tensor3 concat(const Tensor3& a, const Tensor3& b) {
    Tensor3 out(a.ch + b.ch, a.h, a.w);
    std::copy(a.v.begin(), a.v.end(), out.v.begin());
    std::copy(b.v.begin(), b.v.end(), out.v.begin() + static_cast<std::ptrdiff_t>(a.v.size()));
    return out;
}

void split(const Tensor3& dcat, Tensor3& da, Tensor3& db) {
    std::copy(dcat.v.begin(), dcat.v.begin() + static_cast<std::ptrdiff_t>(da.v.size()),
              da.v.begin());
    std::copy(dcat.v.begin() + static_cast<std::ptrdiff_t>(da.v.size()), dcat.v.end(),
              db.v.begin());
}

// inverted dropout; mask entries are 0 or 1/(1-rate)
void dropout_inplace(Tensor3& t, double rate, Rng& rng, std::vector<double>& mask_out) {
    const double keep = 1.0 - rate;
    mask_out.resize(t.v.size());
    for (std::size_t k = 0; k < t.v.size(); ++k) {
        mask_out[k] = rng.uniform() < keep ? 1.0 / keep : 0.0;
        t.v[k] *= mask_out[k];
    }
}

// ---- network assembly ----------------------------------------------------

// canonical conv index helpers (see ParamSet doc)
int enc_conv_index(int level, int which) { return 2 * level + which; }
int bott_conv_index(const ArchConfig& a, int which) { return 2 * a.depth + which; }
int dec_conv_index(const ArchConfig& a, int level, int which) {
    // decoder groups run from the deepest level down to 0, three convs each
    return 2 * a.depth + 2 + 3 * (a.depth - 1 - level) + which;
}
int final_conv_index(const ArchConfig& a) { return 5 * a.depth + 2; }

std::vector<ConvParam> conv_shapes(const ArchConfig& arch) {
    std::vector<ConvParam> shapes;
    auto add = [&](int out_ch, int in_ch, int k) {
        ConvParam p;
        p.out_ch = out_ch;
        p.in_ch = in_ch;
        p.ksize = k;
        p.w.assign(static_cast<std::size_t>(out_ch) * in_ch * k * k, 0.0);
        p.b.assign(static_cast<std::size_t>(out_ch), 0.0);
        shapes.push_back(std::move(p));
    };
    for (int l = 0; l < arch.depth; ++l) {
        const int cin = l == 0 ? 1 : arch.level_channels(l - 1);
        add(arch.level_channels(l), cin, 3);
        add(arch.level_channels(l), arch.level_channels(l), 3);
    }
    add(arch.level_channels(arch.depth), arch.level_channels(arch.depth - 1), 3);
    add(arch.level_channels(arch.depth), arch.level_channels(arch.depth), 3);
    for (int l = arch.depth - 1; l >= 0; --l) {
        add(arch.level_channels(l), arch.level_channels(l + 1), 3); // up-projection
        add(arch.level_channels(l), 2 * arch.level_channels(l), 3);
        add(arch.level_channels(l), arch.level_channels(l), 3);
    }
    add(1, arch.base_channels, 1);
    return shapes;
}

struct BlockCache {
    Tensor3 in;   // block input
    Tensor3 mid;  // post-relu of conv1
    Tensor3 out;  // post-relu of conv2
    std::vector<double> drop_mid, drop_out;
};

struct ForwardCache {
    std::vector<BlockCache> enc;                    // per level
    std::vector<std::vector<std::int32_t>> argmax;  // per level
    BlockCache bott;
    std::vector<Tensor3> up_in;      // decoder input before upsampling, per level
    std::vector<Tensor3> upconv_out; // after the up-projection conv, per level
    std::vector<BlockCache> dec;     // per level (in == concat tensor)
    Tensor3 final_in;
    Field2D u;
};

void run_block(const ConvParam& c1, const ConvParam& c2, Tensor3 input, BlockCache& cache,
               double dropout_rate, Rng* drop_rng) {
    cache.in = std::move(input);
    cache.mid = conv_forward(c1, cache.in);
    relu_inplace(cache.mid);
    if (drop_rng && dropout_rate > 0.0)
        dropout_inplace(cache.mid, dropout_rate, *drop_rng, cache.drop_mid);
    cache.out = conv_forward(c2, cache.mid);
    relu_inplace(cache.out);
    if (drop_rng && dropout_rate > 0.0)
        dropout_inplace(cache.out, dropout_rate, *drop_rng, cache.drop_out);
}

// backward through a double-conv block; returns gradient wrt the block input
Tensor3 block_backward(const ConvParam& c1, const ConvParam& c2, const BlockCache& cache,
                       Tensor3 dout, ConvParam& g1, ConvParam& g2) {
    if (!cache.drop_out.empty())
        for (std::size_t k = 0; k < dout.v.size(); ++k)
            dout.v[k] *= cache.drop_out[k];
    dout = relu_backward(cache.out, dout);
    Tensor3 dmid = conv_backward(c2, cache.mid, dout, g2);
    if (!cache.drop_mid.empty())
        for (std::size_t k = 0; k < dmid.v.size(); ++k)
            dmid.v[k] *= cache.drop_mid[k];
    dmid = relu_backward(cache.mid, dmid);
    return conv_backward(c1, cache.in, dmid, g1);
}

ForwardCache forward_cached(const Field2D& image, const ParamSet& params,
                            const ArchConfig& arch, Rng* drop_rng) {
    arch.validate();
    const int div = 1 << arch.depth;
    if (image.height() % div != 0 || image.width() % div != 0)
        throw std::invalid_argument("forward: image dims must be divisible by 2^depth");
    if (params.convs.size() != static_cast<std::size_t>(5 * arch.depth + 3))
        throw std::invalid_argument("forward: ParamSet does not match ArchConfig");

    ForwardCache fc;
    fc.enc.resize(static_cast<std::size_t>(arch.depth));
    fc.argmax.resize(static_cast<std::size_t>(arch.depth));
    fc.up_in.resize(static_cast<std::size_t>(arch.depth));
    fc.upconv_out.resize(static_cast<std::size_t>(arch.depth));
    fc.dec.resize(static_cast<std::size_t>(arch.depth));

    Tensor3 x = from_field(image);
    for (int l = 0; l < arch.depth; ++l) {
        auto& blk = fc.enc[static_cast<std::size_t>(l)];
        run_block(params.convs[static_cast<std::size_t>(enc_conv_index(l, 0))],
                  params.convs[static_cast<std::size_t>(enc_conv_index(l, 1))], std::move(x), blk,
                  arch.dropout_rate, drop_rng);
        x = maxpool2(blk.out, fc.argmax[static_cast<std::size_t>(l)]);
    }

    run_block(params.convs[static_cast<std::size_t>(bott_conv_index(arch, 0))],
              params.convs[static_cast<std::size_t>(bott_conv_index(arch, 1))], std::move(x),
              fc.bott, arch.dropout_rate, drop_rng);
    x = fc.bott.out;

    for (int l = arch.depth - 1; l >= 0; --l) {
        fc.up_in[static_cast<std::size_t>(l)] = x;
        const Tensor3 big = upsample2(x);
        fc.upconv_out[static_cast<std::size_t>(l)] = conv_forward(
            params.convs[static_cast<std::size_t>(dec_conv_index(arch, l, 0))], big);
        Tensor3 cat = concat(fc.upconv_out[static_cast<std::size_t>(l)],
                             fc.enc[static_cast<std::size_t>(l)].out);
        auto& blk = fc.dec[static_cast<std::size_t>(l)];
        run_block(params.convs[static_cast<std::size_t>(dec_conv_index(arch, l, 1))],
                  params.convs[static_cast<std::size_t>(dec_conv_index(arch, l, 2))],
                  std::move(cat), blk, arch.dropout_rate, drop_rng);
        x = blk.out;
    }

    fc.final_in = std::move(x);
    const Tensor3 logits = conv_forward(
        params.convs[static_cast<std::size_t>(final_conv_index(arch))], fc.final_in);

    fc.u = Field2D(image.height(), image.width());
    for (std::size_t k = 0; k < fc.u.size(); ++k)
        fc.u[k] = 1.0 / (1.0 + std::exp(-logits.v[k]));
    return fc;
}

// reverse pass from dL/du; accumulates parameter gradients into `grad`
void backward_from(const Field2D& dLdu, const ForwardCache& fc, const ParamSet& params,
                   const ArchConfig& arch, ParamSet& grad) {
    Tensor3 dlogits(1, fc.u.height(), fc.u.width());
    for (std::size_t k = 0; k < fc.u.size(); ++k)
        dlogits.v[k] = dLdu[k] * fc.u[k] * (1.0 - fc.u[k]);

    const int fi = final_conv_index(arch);
    Tensor3 dx = conv_backward(params.convs[static_cast<std::size_t>(fi)], fc.final_in, dlogits,
                               grad.convs[static_cast<std::size_t>(fi)]);

    std::vector<Tensor3> denc_out(static_cast<std::size_t>(arch.depth));
    for (int l = 0; l <= arch.depth - 1; ++l) {
        const auto& blk = fc.dec[static_cast<std::size_t>(l)];
        Tensor3 dcat = block_backward(
            params.convs[static_cast<std::size_t>(dec_conv_index(arch, l, 1))],
            params.convs[static_cast<std::size_t>(dec_conv_index(arch, l, 2))], blk, std::move(dx),
            grad.convs[static_cast<std::size_t>(dec_conv_index(arch, l, 1))],
            grad.convs[static_cast<std::size_t>(dec_conv_index(arch, l, 2))]);

        Tensor3 dup = fc.upconv_out[static_cast<std::size_t>(l)];
        std::fill(dup.v.begin(), dup.v.end(), 0.0);
        denc_out[static_cast<std::size_t>(l)] =
            Tensor3(fc.enc[static_cast<std::size_t>(l)].out.ch,
                    fc.enc[static_cast<std::size_t>(l)].out.h,
                    fc.enc[static_cast<std::size_t>(l)].out.w);
        split(dcat, dup, denc_out[static_cast<std::size_t>(l)]);

        const Tensor3 big = upsample2(fc.up_in[static_cast<std::size_t>(l)]);
        const Tensor3 dbig = conv_backward(
            params.convs[static_cast<std::size_t>(dec_conv_index(arch, l, 0))], big, dup,
            grad.convs[static_cast<std::size_t>(dec_conv_index(arch, l, 0))]);
        dx = upsample2_backward(dbig);
    }

    dx = block_backward(params.convs[static_cast<std::size_t>(bott_conv_index(arch, 0))],
                        params.convs[static_cast<std::size_t>(bott_conv_index(arch, 1))], fc.bott,
                        std::move(dx), grad.convs[static_cast<std::size_t>(bott_conv_index(arch, 0))],
                        grad.convs[static_cast<std::size_t>(bott_conv_index(arch, 1))]);

    for (int l = arch.depth - 1; l >= 0; --l) {
        const auto& blk = fc.enc[static_cast<std::size_t>(l)];
        Tensor3 dout = maxpool2_backward(blk.out.h, blk.out.w, dx,
                                         fc.argmax[static_cast<std::size_t>(l)]);
        for (std::size_t k = 0; k < dout.v.size(); ++k)
            dout.v[k] += denc_out[static_cast<std::size_t>(l)].v[k];
        dx = block_backward(params.convs[static_cast<std::size_t>(enc_conv_index(l, 0))],
                            params.convs[static_cast<std::size_t>(enc_conv_index(l, 1))], blk,
                            std::move(dout), grad.convs[static_cast<std::size_t>(enc_conv_index(l, 0))],
                            grad.convs[static_cast<std::size_t>(enc_conv_index(l, 1))]);
    }
    // dx now holds the image gradient, which nothing consumes
}

} // namespace

std::size_t ParamSet::scalar_count() const {
    std::size_t n = 0;
    for (const auto& c : convs)
        n += c.w.size() + c.b.size();
    return n;
}

std::vector<double> ParamSet::flatten() const {
    std::vector<double> flat;
    flat.reserve(scalar_count());
    for (const auto& c : convs) {
        flat.insert(flat.end(), c.w.begin(), c.w.end());
        flat.insert(flat.end(), c.b.begin(), c.b.end());
    }
    return flat;
}

void ParamSet::unflatten(const std::vector<double>& flat) {
    if (flat.size() != scalar_count())
        throw std::invalid_argument("ParamSet::unflatten: size mismatch");
    std::size_t pos = 0;
    for (auto& c : convs) {
        std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(pos), c.w.size(), c.w.begin());
        pos += c.w.size();
        std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(pos), c.b.size(), c.b.begin());
        pos += c.b.size();
    }
}

ParamSet init_params(const ArchConfig& arch, std::uint64_t seed) {
    arch.validate();
    ParamSet ps;
    ps.convs = conv_shapes(arch);
    Rng rng(seed);
    for (auto& c : ps.convs) {
        const double bound = std::sqrt(1.0 / (static_cast<double>(c.in_ch) * c.ksize * c.ksize));
        for (auto& wk : c.w)
            wk = rng.uniform(-bound, bound);
    }
    return ps;
}

ParamSet zero_params(const ArchConfig& arch) {
    arch.validate();
    ParamSet ps;
    ps.convs = conv_shapes(arch);
    return ps;
}

Field2D forward(const Field2D& image, const ParamSet& params, const ArchConfig& arch) {
    return forward_cached(image, params, arch, nullptr).u;
}

ParamSet forward_sum_grad(const Field2D& image, const ParamSet& params, const ArchConfig& arch) {
    const ForwardCache fc = forward_cached(image, params, arch, nullptr);
    ParamSet grad = zero_params(arch);
    const Field2D ones(image.height(), image.width(), 1.0);
    backward_from(ones, fc, params, arch, grad);
    return grad;
}

BackwardResult backward(const Field2D& image, const BinaryMask& target, const ParamSet& params,
                        const ArchConfig& arch, const CompositeWeights& weights,
                        const RDParams& rd, const PFParams& pf, const GridSpec& grid) {
    const ForwardCache fc = forward_cached(image, params, arch, nullptr);
    const CompositeResult comp = composite_loss(fc.u, target, weights, rd, pf, grid);

    BackwardResult out;
    out.loss = comp.value;
    out.parts = comp.parts;
    out.grad = zero_params(arch);
    backward_from(comp.grad, fc, params, arch, out.grad);
    return out;
}

void TrainConfig::validate() const {
    if (epochs_stage1 < 0 || epochs_stage2 < 0)
        throw std::invalid_argument("TrainConfig: epoch counts must be >= 0");
    if (epochs_stage1 == 0 && epochs_stage2 == 0)
        throw std::invalid_argument("TrainConfig: at least one stage must run");
    if (batch_size < 1)
        throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
    adam.validate();
    weights.validate();
    rd.validate();
    pf.validate();
    grid.validate();
}

namespace {

double mean_split_dice(const Corpus& corpus, const std::vector<std::size_t>& idx,
                       const ParamSet& params, const ArchConfig& arch) {
    if (idx.empty()) return 0.0;
    double acc = 0.0;
    for (std::size_t k : idx) {
        const Sample& s = corpus.samples[k];
        acc += dice(binarize(forward(s.image, params, arch), 0.5), s.mask);
    }
    return acc / static_cast<double>(idx.size());
}

} // namespace

TrainResult train(const Corpus& corpus, const TrainConfig& cfg, const ArchConfig& arch) {
    cfg.validate();
    arch.validate();
    const auto train_idx = corpus.split_indices(Split::train);
    if (train_idx.empty())
        throw std::invalid_argument("train: corpus has no training samples");
    auto val_idx = corpus.split_indices(Split::val);
    if (val_idx.empty())
        val_idx = train_idx;

    TrainResult result;
    result.params = init_params(arch, cfg.seed);
    result.stage1_params = result.params;

    std::vector<double> flat = result.params.flatten();
    AdamState state(flat.size());
    const CompositeWeights no_priors{};

    long t = 0;
    const int total_epochs = cfg.epochs_stage1 + cfg.epochs_stage2;
    std::vector<double> grad_acc(flat.size());
    for (int epoch = 0; epoch < total_epochs; ++epoch) {
        const bool stage2 = epoch >= cfg.epochs_stage1;
        const CompositeWeights& w = stage2 ? cfg.weights : no_priors;

        // shuffle depends only on (seed, epoch), never on the stage split
        std::vector<std::size_t> order = train_idx;
        Rng shuffle_rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(epoch)));
        shuffle_rng.shuffle(order);
        Rng drop_rng(derive_seed(cfg.seed ^ 0xD509D509ULL, static_cast<std::uint64_t>(epoch)));
        Rng* drop = arch.dropout_rate > 0.0 ? &drop_rng : nullptr;

        LossBreakdown epoch_sum;
        for (std::size_t pos = 0; pos < order.size(); pos += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end = std::min(order.size(), pos + static_cast<std::size_t>(cfg.batch_size));
            std::fill(grad_acc.begin(), grad_acc.end(), 0.0);

            for (std::size_t b = pos; b < end; ++b) {
                const Sample& s = corpus.samples[order[b]];
                const ForwardCache fc = forward_cached(s.image, result.params, arch, drop);
                const CompositeResult comp = composite_loss(fc.u, s.mask, w, cfg.rd, cfg.pf, cfg.grid);
                if (!std::isfinite(comp.value))
                    throw DivergenceError("epoch", static_cast<std::size_t>(epoch));
                ParamSet g = zero_params(arch);
                backward_from(comp.grad, fc, result.params, arch, g);
                const std::vector<double> gf = g.flatten();
                for (std::size_t k = 0; k < grad_acc.size(); ++k)
                    grad_acc[k] += gf[k];
                epoch_sum.dice += comp.parts.dice;
                epoch_sum.bce += comp.parts.bce;
                epoch_sum.rd += comp.parts.rd;
                epoch_sum.pf += comp.parts.pf;
                epoch_sum.total += comp.parts.total;
            }

            const double inv_batch = 1.0 / static_cast<double>(end - pos);
            for (auto& gk : grad_acc)
                gk *= inv_batch;
            const std::vector<double> delta = adam_update(state, grad_acc, cfg.adam, ++t);
            for (std::size_t k = 0; k < flat.size(); ++k)
                flat[k] += delta[k];
            result.params.unflatten(flat);
        }

        EpochLog log;
        log.epoch = epoch;
        log.stage = stage2 ? 2 : 1;
        const double inv_n = 1.0 / static_cast<double>(order.size());
        log.mean = {epoch_sum.dice * inv_n, epoch_sum.bce * inv_n, epoch_sum.rd * inv_n,
                    epoch_sum.pf * inv_n, epoch_sum.total * inv_n};
        log.val_dice = mean_split_dice(corpus, val_idx, result.params, arch);
        result.log.push_back(log);

        if (epoch + 1 == cfg.epochs_stage1)
            result.stage1_params = result.params;
    }
    return result;
}

void write_train_log_csv(std::ostream& os, const std::vector<EpochLog>& log) {
    os << "epoch,stage,dice,bce,rd,pf,total,val_dice\n";
    char buf[200];
    for (const EpochLog& e : log) {
        std::snprintf(buf, sizeof(buf), "%d,%d,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g\n", e.epoch, e.stage,
                      e.mean.dice, e.mean.bce, e.mean.rd, e.mean.pf, e.mean.total, e.val_dice);
        os << buf;
    }
}

void save_params_json(const std::string& path, const ParamSet& params, const ArchConfig& arch) {
    json doc;
    doc["arch"] = {{"depth", arch.depth},
                   {"base_channels", arch.base_channels},
                   {"dropout_rate", arch.dropout_rate}};
    doc["convs"] = json::array();
    for (const auto& c : params.convs)
        doc["convs"].push_back({{"out_ch", c.out_ch},
                                {"in_ch", c.in_ch},
                                {"ksize", c.ksize},
                                {"w", c.w},
                                {"b", c.b}});
    std::ofstream os(path);
    if (!os)
        throw IoError("cannot write params: " + path);
    os << doc.dump() << "\n";
}

std::pair<ParamSet, ArchConfig> load_params_json(const std::string& path) {
    std::ifstream is(path);
    if (!is)
        throw IoError("cannot open params: " + path);
    json doc;
    try {
        is >> doc;
    } catch (const json::exception& e) {
        throw IoError("bad params file " + path + ": " + e.what());
    }

    try {
        ArchConfig arch;
        arch.depth = doc.at("arch").at("depth").get<int>();
        arch.base_channels = doc.at("arch").at("base_channels").get<int>();
        arch.dropout_rate = doc.at("arch").at("dropout_rate").get<double>();
        arch.validate();

        ParamSet ps = zero_params(arch);
        const auto& convs = doc.at("convs");
        if (convs.size() != ps.convs.size())
            throw IoError(path + ": conv count does not match arch");
        for (std::size_t k = 0; k < ps.convs.size(); ++k) {
            auto& c = ps.convs[k];
            const auto& e = convs[k];
            if (e.at("out_ch").get<int>() != c.out_ch || e.at("in_ch").get<int>() != c.in_ch ||
                e.at("ksize").get<int>() != c.ksize)
                throw IoError(path + ": conv shape mismatch at index " + std::to_string(k));
            const auto w = e.at("w").get<std::vector<double>>();
            const auto b = e.at("b").get<std::vector<double>>();
            if (w.size() != c.w.size() || b.size() != c.b.size())
                throw IoError(path + ": conv payload size mismatch at index " + std::to_string(k));
            c.w = w;
            c.b = b;
        }
        return {std::move(ps), arch};
    } catch (const json::exception& e) {
        throw IoError("bad params file " + path + ": " + e.what());
    }
}

} // namespace pdeseg
