#include "pdeseg/datagen.hpp"

#include "pdeseg/errors.hpp"
#include "pdeseg/grid.hpp"
#include "pdeseg/io.hpp"
#include "pdeseg/metrics.hpp"
#include "pdeseg/rng.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace pdeseg {

namespace fs = std::filesystem;
using nlohmann::json;

const char* to_string(MorphKind k) {
    switch (k) {
        case MorphKind::adherent: return "adherent";
        case MorphKind::raft: return "raft";
        case MorphKind::spherical: return "spherical";
    }
    return "?";
}

MorphKind morph_from_string(const std::string& s) {
    if (s == "adherent") return MorphKind::adherent;
    if (s == "raft") return MorphKind::raft;
    if (s == "spherical") return MorphKind::spherical;
    throw ConfigError("unknown morphology: " + s);
}

const char* to_string(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::val: return "val";
        case Split::test_in: return "test_in";
        case Split::test_ood: return "test_ood";
    }
    return "?";
}

Split split_from_string(const std::string& s) {
    if (s == "train") return Split::train;
    if (s == "val") return Split::val;
    if (s == "test_in") return Split::test_in;
    if (s == "test_ood") return Split::test_ood;
    throw ConfigError("unknown split: " + s);
}

Morphology Morphology::preset(MorphKind kind) {
    Morphology m;
    m.kind = kind;
    switch (kind) {
        case MorphKind::adherent:
            // large irregular blobs, one or two per frame
            m.radius_frac = 0.26;
            m.irregularity = 0.18;
            m.harmonics = 5;
            m.cells_min = 1;
            m.cells_max = 2;
            m.cluster_spread = 0.45;
            break;
        case MorphKind::raft:
            // dense touching clusters of mid-size cells
            m.radius_frac = 0.14;
            m.irregularity = 0.10;
            m.harmonics = 4;
            m.cells_min = 4;
            m.cells_max = 6;
            m.cluster_spread = 0.18;
            break;
        case MorphKind::spherical:
            // small, round, homogeneous
            m.radius_frac = 0.09;
            m.irregularity = 0.015;
            m.harmonics = 2;
            m.cells_min = 3;
            m.cells_max = 5;
            m.cluster_spread = 0.55;
            break;
    }
    return m;
}

void Morphology::validate() const {
    if (!(radius_frac > 0.0) || !(radius_jitter >= 0.0) || !(irregularity >= 0.0))
        throw std::invalid_argument("Morphology: size parameters must be positive");
    if (harmonics < 1 || vertices < 3 || cells_min < 1 || cells_max < cells_min)
        throw std::invalid_argument("Morphology: count parameters out of range");
    if (!(cluster_spread >= 0.0))
        throw std::invalid_argument("Morphology: cluster_spread must be >= 0");
}

void Polygon::translate(double dx, double dy) {
    for (auto& x : xs) x += dx;
    for (auto& y : ys) y += dy;
}

Polygon gen_shape(const Morphology& morph, std::uint64_t seed, int canvas_h, int canvas_w) {
    morph.validate();
    if (canvas_h < 16 || canvas_w < 16)
        throw std::invalid_argument("gen_shape: canvas must be at least 16x16");

    Rng rng(seed);
    const double short_side = static_cast<double>(std::min(canvas_h, canvas_w));
    const double base_r =
        morph.radius_frac * short_side * (1.0 + morph.radius_jitter * (rng.uniform() - 0.5));

    // Low-order radial harmonic series r(theta) = R (1 + sum a_k cos(k theta + phi_k)).
    std::vector<double> amp(static_cast<std::size_t>(morph.harmonics));
    std::vector<double> phase(amp.size());
    double amp_total = 0.0;
    for (std::size_t k = 0; k < amp.size(); ++k) {
        amp[k] = morph.irregularity * rng.uniform(0.5, 1.0) / static_cast<double>(k + 2);
        phase[k] = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
        amp_total += amp[k];
    }

    const double max_r = base_r * (1.0 + amp_total);
    const double margin = max_r + 2.0;
    const double cx = std::clamp(canvas_w / 2.0 + (rng.uniform() - 0.5) * canvas_w * 0.2,
                                 margin, canvas_w - margin);
    const double cy = std::clamp(canvas_h / 2.0 + (rng.uniform() - 0.5) * canvas_h * 0.2,
                                 margin, canvas_h - margin);

    Polygon poly;
    poly.xs.resize(static_cast<std::size_t>(morph.vertices));
    poly.ys.resize(static_cast<std::size_t>(morph.vertices));
    for (int v = 0; v < morph.vertices; ++v) {
        const double theta = 2.0 * 3.14159265358979323846 * v / morph.vertices;
        double r = 1.0;
        for (std::size_t k = 0; k < amp.size(); ++k)
            r += amp[k] * std::cos(static_cast<double>(k + 2) * theta + phase[k]);
        r = std::max(0.15, r) * base_r;
        poly.xs[static_cast<std::size_t>(v)] = cx + r * std::cos(theta);
        poly.ys[static_cast<std::size_t>(v)] = cy + r * std::sin(theta);
    }
    return poly;
}

BinaryMask rasterize_polygon(const Polygon& poly, int height, int width) {
    if (poly.size() < 3)
        throw std::invalid_argument("rasterize_polygon: need at least 3 vertices");

    BinaryMask mask(height, width);
    const std::size_t n = poly.size();
    std::vector<double> xs_hit;
    xs_hit.reserve(n);

    for (int i = 0; i < height; ++i) {
        const double py = i + 0.5;
        xs_hit.clear();
        for (std::size_t a = 0; a < n; ++a) {
            const std::size_t b = (a + 1) % n;
            const double y0 = poly.ys[a], y1 = poly.ys[b];
            // half-open rule in y avoids double-counting shared vertices
            if ((y0 <= py) == (y1 <= py)) continue;
            const double t = (py - y0) / (y1 - y0);
            xs_hit.push_back(poly.xs[a] + t * (poly.xs[b] - poly.xs[a]));
        }
        std::sort(xs_hit.begin(), xs_hit.end());
        // even-odd fill: centers in [x_c, x_{c+1}) are inside, matching the
        // crossing-number test with a strict px < x comparison
        for (std::size_t c = 0; c + 1 < xs_hit.size(); c += 2) {
            const int j0 = std::max(0, static_cast<int>(std::ceil(xs_hit[c] - 0.5)));
            const int j1 = std::min(width - 1, static_cast<int>(std::ceil(xs_hit[c + 1] - 0.5)) - 1);
            for (int j = j0; j <= j1; ++j)
                mask(i, j) = 1;
        }
    }
    return mask;
}

void RenderParams::validate() const {
    const bool intensities_ok = v_in >= 0.0 && v_in <= 1.0 && v_bg >= 0.0 && v_bg <= 1.0;
    if (!intensities_ok || !(halo_amp >= 0.0) || !(halo_width > 0.0) ||
        !(blur_sigma >= 0.0) || !(noise_sigma >= 0.0))
        throw std::invalid_argument("RenderParams: parameter out of range");
}

namespace {

Field2D gaussian_blur(const Field2D& img, double sigma) {
    if (sigma <= 0.0) return img;
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
    double norm = 0.0;
    for (int t = -radius; t <= radius; ++t) {
        kernel[static_cast<std::size_t>(t + radius)] = std::exp(-0.5 * t * t / (sigma * sigma));
        norm += kernel[static_cast<std::size_t>(t + radius)];
    }
    for (auto& k : kernel) k /= norm;

    const int M = img.height(), N = img.width();
    Field2D tmp(M, N), out(M, N);
    for (int i = 0; i < M; ++i)
        for (int j = 0; j < N; ++j) {
            double acc = 0.0;
            for (int t = -radius; t <= radius; ++t)
                acc += kernel[static_cast<std::size_t>(t + radius)] * img(i, mirror_index(j + t, N));
            tmp(i, j) = acc;
        }
    for (int i = 0; i < M; ++i)
        for (int j = 0; j < N; ++j) {
            double acc = 0.0;
            for (int t = -radius; t <= radius; ++t)
                acc += kernel[static_cast<std::size_t>(t + radius)] * tmp(mirror_index(i + t, M), j);
            out(i, j) = acc;
        }
    return out;
}

} // namespace

Field2D render(const BinaryMask& mask, const RenderParams& rp, std::uint64_t seed) {
    rp.validate();
    const int M = mask.height(), N = mask.width();

    Field2D img(M, N);
    for (std::size_t k = 0; k < mask.size(); ++k)
        img[k] = mask[k] ? rp.v_in : rp.v_bg;

    if (rp.halo_amp > 0.0) {
        const auto boundary = boundary_pixels(mask);
        if (!boundary.empty()) {
            const double inv = 1.0 / (2.0 * rp.halo_width * rp.halo_width);
            for (int i = 0; i < M; ++i)
                for (int j = 0; j < N; ++j) {
                    if (mask(i, j)) continue;
                    long best = std::numeric_limits<long>::max();
                    for (const auto& [bi, bj] : boundary) {
                        const long di = i - bi, dj = j - bj;
                        best = std::min(best, di * di + dj * dj);
                    }
                    img(i, j) += rp.halo_amp * std::exp(-static_cast<double>(best) * inv);
                }
        }
    }

    img = gaussian_blur(img, rp.blur_sigma);

    if (rp.noise_sigma > 0.0) {
        Rng rng(seed);
        for (std::size_t k = 0; k < img.size(); ++k)
            img[k] += rng.normal(0.0, rp.noise_sigma);
    }

    for (std::size_t k = 0; k < img.size(); ++k)
        img[k] = std::clamp(img[k], 0.0, 1.0);
    return img;
}

void CorpusConfig::validate() const {
    if (total < 4)
        throw std::invalid_argument("CorpusConfig: total must be >= 4 (one per split)");
    if (height < 16 || width < 16)
        throw std::invalid_argument("CorpusConfig: canvas must be at least 16x16");
    double sum = 0.0;
    for (double p : proportions) {
        if (!(p > 0.0))
            throw std::invalid_argument("CorpusConfig: proportions must be > 0");
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-6)
        throw std::invalid_argument("CorpusConfig: proportions must sum to 1");
    render.validate();
}

std::array<int, 4> split_counts(int total, const std::array<double, 4>& proportions) {
    std::array<int, 4> counts{};
    std::array<double, 4> remainder{};
    int assigned = 0;
    for (std::size_t s = 0; s < 4; ++s) {
        const double exact = proportions[s] * total;
        counts[s] = static_cast<int>(std::floor(exact));
        remainder[s] = exact - counts[s];
        assigned += counts[s];
    }
    // hand leftovers to the largest remainders
    std::array<std::size_t, 4> order{0, 1, 2, 3};
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
    for (int r = 0; r < total - assigned; ++r)
        ++counts[order[static_cast<std::size_t>(r)]];
    for (std::size_t s = 0; s < 4; ++s)
        if (counts[s] < 1)
            throw std::invalid_argument("split_counts: a split came out empty; increase total");
    return counts;
}

namespace {

BinaryMask compose_cells(MorphKind kind, std::uint64_t seed, int H, int W) {
    const Morphology morph = Morphology::preset(kind);
    Rng rng(derive_seed(seed, 0));
    const int cells = morph.cells_min +
                      static_cast<int>(rng.uniform_int(
                          static_cast<std::uint64_t>(morph.cells_max - morph.cells_min + 1)));

    BinaryMask mask(H, W);
    for (int c = 0; c < cells; ++c) {
        Polygon poly = gen_shape(morph, derive_seed(seed, static_cast<std::uint64_t>(c + 1)), H, W);
        // scatter cell centers; raft keeps them tight so blobs touch
        const double spread = morph.cluster_spread;
        poly.translate((rng.uniform() - 0.5) * spread * W, (rng.uniform() - 0.5) * spread * H);
        const BinaryMask cell = rasterize_polygon(poly, H, W);
        for (std::size_t k = 0; k < mask.size(); ++k)
            mask[k] |= cell[k];
    }
    return mask;
}

} // namespace

std::vector<std::size_t> Corpus::split_indices(Split s) const {
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < samples.size(); ++k)
        if (samples[k].split == s) out.push_back(k);
    return out;
}

std::vector<std::size_t> Corpus::train_fraction(int percent) const {
    if (percent < 1 || percent > 100)
        throw std::invalid_argument("train_fraction: percent must lie in [1,100]");
    auto train = split_indices(Split::train);
    const auto keep = static_cast<std::size_t>(
        std::llround(static_cast<double>(train.size()) * percent / 100.0));
    if (keep < 1)
        throw std::invalid_argument("train_fraction: fraction selects no training samples");
    train.resize(std::min(train.size(), keep));
    return train;
}

Corpus Corpus::with_train_fraction(int percent) const {
    const auto keep = train_fraction(percent);
    Corpus out;
    out.height = height;
    out.width = width;
    out.seed = seed;
    std::vector<bool> keep_mask(samples.size(), false);
    for (std::size_t k : keep) keep_mask[k] = true;
    for (std::size_t k = 0; k < samples.size(); ++k)
        if (samples[k].split != Split::train || keep_mask[k])
            out.samples.push_back(samples[k]);
    return out;
}

Corpus make_corpus(const CorpusConfig& cfg) {
    cfg.validate();
    const auto counts = split_counts(cfg.total, cfg.proportions);

    Corpus corpus;
    corpus.height = cfg.height;
    corpus.width = cfg.width;
    corpus.seed = cfg.seed;
    corpus.samples.reserve(static_cast<std::size_t>(cfg.total));

    const Split order[4] = {Split::train, Split::val, Split::test_in, Split::test_ood};
    std::uint64_t index = 0;
    for (std::size_t s = 0; s < 4; ++s) {
        for (int k = 0; k < counts[s]; ++k, ++index) {
            Sample sample;
            sample.split = order[s];
            sample.morphology = order[s] == Split::test_ood
                                    ? MorphKind::spherical
                                    : (k % 2 == 0 ? MorphKind::adherent : MorphKind::raft);
            sample.seed = derive_seed(cfg.seed, index);
            sample.mask = compose_cells(sample.morphology, sample.seed, cfg.height, cfg.width);
            sample.image = render(sample.mask, cfg.render, derive_seed(sample.seed, 9001));
            corpus.samples.push_back(std::move(sample));
        }
    }
    return corpus;
}

BinaryMask corrupt_mask(const BinaryMask& m, double flip_rate, std::uint64_t seed) {
    if (!(flip_rate >= 0.0 && flip_rate <= 1.0))
        throw std::invalid_argument("corrupt_mask: flip_rate must lie in [0,1]");
    BinaryMask out = m;
    Rng rng(seed);
    for (std::size_t k = 0; k < out.size(); ++k)
        if (rng.uniform() < flip_rate)
            out[k] ^= 1;
    return out;
}

void write_corpus(const Corpus& corpus, const std::string& dir) {
    fs::create_directories(dir);
    json manifest;
    manifest["height"] = corpus.height;
    manifest["width"] = corpus.width;
    manifest["seed"] = corpus.seed;
    manifest["samples"] = json::array();

    char name[64];
    for (std::size_t k = 0; k < corpus.samples.size(); ++k) {
        const Sample& s = corpus.samples[k];
        std::snprintf(name, sizeof(name), "img_%04zu.pgm", k);
        const std::string img_name = name;
        std::snprintf(name, sizeof(name), "msk_%04zu.pgm", k);
        const std::string msk_name = name;
        write_pgm((fs::path(dir) / img_name).string(), s.image);
        write_pgm((fs::path(dir) / msk_name).string(), s.mask);
        manifest["samples"].push_back({{"image", img_name},
                                       {"mask", msk_name},
                                       {"morphology", to_string(s.morphology)},
                                       {"split", to_string(s.split)},
                                       {"seed", s.seed}});
    }

    std::ofstream os(fs::path(dir) / "manifest.json");
    if (!os)
        throw IoError("cannot write manifest in " + dir);
    os << manifest.dump(2) << "\n";
}

Corpus read_corpus(const std::string& manifest_path) {
    std::ifstream is(manifest_path);
    if (!is)
        throw IoError("cannot open manifest: " + manifest_path);
    json manifest;
    try {
        is >> manifest;
    } catch (const json::exception& e) {
        throw IoError("bad manifest " + manifest_path + ": " + e.what());
    }

    Corpus corpus;
    const fs::path base = fs::path(manifest_path).parent_path();
    try {
        corpus.height = manifest.at("height").get<int>();
        corpus.width = manifest.at("width").get<int>();
        corpus.seed = manifest.at("seed").get<std::uint64_t>();
        for (const auto& e : manifest.at("samples")) {
            Sample s;
            s.image = read_pgm((base / e.at("image").get<std::string>()).string());
            s.mask = read_pgm_mask((base / e.at("mask").get<std::string>()).string());
            s.morphology = morph_from_string(e.at("morphology").get<std::string>());
            s.split = split_from_string(e.at("split").get<std::string>());
            s.seed = e.at("seed").get<std::uint64_t>();
            corpus.samples.push_back(std::move(s));
        }
    } catch (const json::exception& e) {
        throw IoError("bad manifest " + manifest_path + ": " + e.what());
    }
    return corpus;
}

std::vector<std::pair<int, BinaryMask>> read_coco_masks(const std::string& path) {
    std::ifstream is(path);
    if (!is)
        throw IoError("cannot open: " + path);
    json doc;
    try {
        is >> doc;
    } catch (const json::exception& e) {
        throw IoError("bad COCO json " + path + ": " + e.what());
    }

    std::vector<std::pair<int, BinaryMask>> out;
    try {
        for (const auto& img : doc.at("images")) {
            const int id = img.at("id").get<int>();
            const int h = img.at("height").get<int>();
            const int w = img.at("width").get<int>();
            out.emplace_back(id, BinaryMask(h, w));
        }
        for (const auto& ann : doc.at("annotations")) {
            const int image_id = ann.at("image_id").get<int>();
            auto it = std::find_if(out.begin(), out.end(),
                                   [&](const auto& p) { return p.first == image_id; });
            if (it == out.end())
                throw IoError(path + ": annotation references unknown image_id " +
                              std::to_string(image_id));
            for (const auto& seg : ann.at("segmentation")) {
                Polygon poly;
                if (seg.size() < 6 || seg.size() % 2 != 0)
                    throw IoError(path + ": segmentation must hold >= 3 (x,y) pairs");
                for (std::size_t k = 0; k < seg.size(); k += 2) {
                    poly.xs.push_back(seg[k].get<double>());
                    poly.ys.push_back(seg[k + 1].get<double>());
                }
                const BinaryMask m = rasterize_polygon(poly, it->second.height(), it->second.width());
                for (std::size_t k = 0; k < m.size(); ++k)
                    it->second[k] |= m[k];
            }
        }
    } catch (const json::exception& e) {
        throw IoError("bad COCO json " + path + ": " + e.what());
    }
    return out;
}

} // namespace pdeseg
