#pragma once

#include "pdeseg/datagen.hpp"
#include "pdeseg/fidelity.hpp"
#include "pdeseg/solver.hpp"

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

namespace pdeseg {

/// Miniature encoder-decoder topology. `depth` counts the pooling levels;
/// channels double per level starting from `base_channels`. Dropout (after
/// each in-block ReLU) applies to training passes only and must stay 0 for
/// gradient checks.
struct ArchConfig {
    int depth = 2;
    int base_channels = 8;
    double dropout_rate = 0.0;

    void validate() const;
    int level_channels(int level) const; // base * 2^level
};

/// One convolution's kernel and bias. Weight layout [out][in][ky][kx].
struct ConvParam {
    int out_ch = 0;
    int in_ch = 0;
    int ksize = 0;
    std::vector<double> w;
    std::vector<double> b;

    double& wat(int o, int c, int a, int bb) {
        return w[((static_cast<std::size_t>(o) * in_ch + c) * ksize + a) * ksize + bb];
    }
    double wat(int o, int c, int a, int bb) const {
        return w[((static_cast<std::size_t>(o) * in_ch + c) * ksize + a) * ksize + bb];
    }
};

/// All network parameters in canonical order: encoder blocks (two convs per
/// level), bottleneck pair, then per decoder level an up-projection conv and
/// the two block convs (deepest level first), and the final 1x1 projection.
struct ParamSet {
    std::vector<ConvParam> convs;

    std::size_t scalar_count() const;
    std::vector<double> flatten() const;
    void unflatten(const std::vector<double>& flat);
};

/// Uniform fan-in-scaled kernels (bound sqrt(1/fan_in)), zero biases.
/// Deterministic per seed.
ParamSet init_params(const ArchConfig& arch, std::uint64_t seed);

/// All-zero parameters; forward then yields 0.5 everywhere.
ParamSet zero_params(const ArchConfig& arch);

/// Map an image to a segmentation field in (0,1). Input dims must be
/// divisible by 2^depth.
Field2D forward(const Field2D& image, const ParamSet& params, const ArchConfig& arch);

/// Gradient of sum(forward(image)) with respect to every parameter;
/// diagnostic hook for finite-difference verification of the network alone.
ParamSet forward_sum_grad(const Field2D& image, const ParamSet& params, const ArchConfig& arch);

struct BackwardResult {
    double loss = 0.0;
    LossBreakdown parts;
    ParamSet grad;
};

/// Composite loss of forward(image) against the target, plus its exact
/// gradient with respect to every parameter.
BackwardResult backward(const Field2D& image, const BinaryMask& target,
                        const ParamSet& params, const ArchConfig& arch,
                        const CompositeWeights& weights, const RDParams& rd,
                        const PFParams& pf, const GridSpec& grid = {});

struct TrainConfig {
    int epochs_stage1 = 50;
    int epochs_stage2 = 50;
    int batch_size = 4;
    AdamOpts adam{0.01, 0.9, 0.999, 1e-8};
    CompositeWeights weights{};
    RDParams rd{};
    PFParams pf{};
    GridSpec grid{};
    std::uint64_t seed = 0;

    void validate() const;
};

struct EpochLog {
    int epoch = 0;
    int stage = 0;
    LossBreakdown mean; // per-sample mean over the epoch
    double val_dice = 0.0;
};

struct TrainResult {
    ParamSet params;        // after both stages
    ParamSet stage1_params; // snapshot at the stage boundary
    std::vector<EpochLog> log;
};

/// Two-stage Adam training over the corpus train split: stage 1 on the data
/// terms alone, stage 2 continuing from the stage-1 weights with the PDE
/// terms active. The shuffle schedule depends only on (seed, epoch), so a
/// zero-weight stage 2 extends stage 1 exactly. Validation Dice comes from
/// the val split, falling back to the train split when val is empty.
/// Throws DivergenceError (with the epoch) if the loss goes non-finite.
TrainResult train(const Corpus& corpus, const TrainConfig& cfg, const ArchConfig& arch);

/// Train log as CSV: epoch,stage,dice,bce,rd,pf,total,val_dice.
void write_train_log_csv(std::ostream& os, const std::vector<EpochLog>& log);

/// Shape-tagged JSON round trip for a trained model.
void save_params_json(const std::string& path, const ParamSet& params, const ArchConfig& arch);
std::pair<ParamSet, ArchConfig> load_params_json(const std::string& path);

} // namespace pdeseg
