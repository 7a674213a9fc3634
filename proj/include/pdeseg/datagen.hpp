#pragma once

#include "pdeseg/field.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace pdeseg {

/// The three synthetic cell morphologies. `adherent` and `raft` are the
/// seen classes; `spherical` is reserved for the out-of-distribution split.
enum class MorphKind { adherent, raft, spherical };

const char* to_string(MorphKind k);
MorphKind morph_from_string(const std::string& s);

/// Shape-family parameters. Radii are fractions of the canvas short side;
/// `irregularity` scales the random radial harmonics, so spherical must
/// keep the lowest value of the three presets.
struct Morphology {
    MorphKind kind = MorphKind::adherent;
    double radius_frac = 0.28;
    double radius_jitter = 0.25;
    double irregularity = 0.18;
    int harmonics = 5;
    int vertices = 40;
    int cells_min = 1;
    int cells_max = 2;
    double cluster_spread = 0.5; // cell-center scatter as a fraction of canvas

    static Morphology preset(MorphKind kind);

    void validate() const;
};

/// Closed polygon in (x, y) = (column, row) pixel coordinates.
struct Polygon {
    std::vector<double> xs;
    std::vector<double> ys;

    std::size_t size() const { return xs.size(); }
    void translate(double dx, double dy);
};

/// One blob: a circle of morphology-dependent radius perturbed by a
/// low-order random radial harmonic series. Deterministic per seed.
Polygon gen_shape(const Morphology& morph, std::uint64_t seed, int canvas_h, int canvas_w);

/// Even-odd scanline fill; a pixel is foreground iff its center
/// (j+0.5, i+0.5) lies inside the polygon.
BinaryMask rasterize_polygon(const Polygon& poly, int height, int width);

/// Phase-contrast-style appearance model: flat interior/background levels,
/// a bright halo decaying with distance from the boundary on the background
/// side, Gaussian blur, additive Gaussian noise, clipped to [0,1].
struct RenderParams {
    double v_in = 0.35;
    double v_bg = 0.55;
    double halo_amp = 0.25;
    double halo_width = 2.5;
    double blur_sigma = 0.8;
    double noise_sigma = 0.03;

    void validate() const;
};

Field2D render(const BinaryMask& mask, const RenderParams& rp, std::uint64_t seed);

enum class Split { train, val, test_in, test_ood };

const char* to_string(Split s);
Split split_from_string(const std::string& s);

struct Sample {
    Field2D image;
    BinaryMask mask;
    MorphKind morphology = MorphKind::adherent;
    Split split = Split::train;
    std::uint64_t seed = 0;
};

struct CorpusConfig {
    int total = 100;
    int height = 64;
    int width = 64;
    std::uint64_t seed = 0;
    // train / val / test_in / test_ood
    std::array<double, 4> proportions = {0.48, 0.21, 0.16, 0.15};
    RenderParams render{};

    void validate() const;
};

struct Corpus {
    int height = 0;
    int width = 0;
    std::uint64_t seed = 0;
    std::vector<Sample> samples;

    std::vector<std::size_t> split_indices(Split s) const;

    /// Prefix subset of the train split: smaller fractions are subsets of
    /// larger ones by construction.
    std::vector<std::size_t> train_fraction(int percent) const;

    /// Copy containing only the given train fraction plus all other splits.
    Corpus with_train_fraction(int percent) const;
};

/// Split sizes from total and proportions by largest remainder, every
/// split nonempty.
std::array<int, 4> split_counts(int total, const std::array<double, 4>& proportions);

/// Synthesize a corpus: train/val/test_in alternate adherent and raft,
/// test_ood is exclusively spherical. Every sample derives its own
/// sub-seed from the corpus seed and index.
Corpus make_corpus(const CorpusConfig& cfg);

/// Flip each pixel independently with probability flip_rate.
BinaryMask corrupt_mask(const BinaryMask& m, double flip_rate, std::uint64_t seed);

/// Write images/masks as PGM plus a JSON manifest into `dir`.
void write_corpus(const Corpus& corpus, const std::string& dir);

/// Load a corpus previously written by write_corpus.
Corpus read_corpus(const std::string& manifest_path);

/// Minimal COCO-subset reader: images[{id,height,width}] and
/// annotations[{image_id, segmentation:[[x0,y0,...]]}]. Returns per-image
/// masks (union of the polygons), ordered as in the images array.
std::vector<std::pair<int, BinaryMask>> read_coco_masks(const std::string& path);

} // namespace pdeseg
