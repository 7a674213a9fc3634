#pragma once

#include "pdeseg/datagen.hpp"
#include "pdeseg/predictor.hpp"

#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace pdeseg {

enum class Constraint { baseline, rd_only, pf_only, rd_pf };

const char* to_string(Constraint c);
Constraint constraint_from_string(const std::string& s);

enum class SweepAxis { none, reaction_threshold, diffusion, interface_eps, lambda_rd, lambda_pf };

const char* to_string(SweepAxis a);
SweepAxis sweep_axis_from_string(const std::string& s);

/// One experiment grid: constraints x data fractions x sweep values x seeds,
/// evaluated on the chosen splits and metrics after each training stage.
struct ExperimentSpec {
    std::vector<Constraint> constraints{Constraint::rd_pf};
    std::vector<int> fractions{100};
    SweepAxis axis = SweepAxis::none;
    std::vector<double> values{};
    int repeats = 1;
    std::vector<std::string> metrics{"dice", "iou", "boundary_f1"};
    std::vector<Split> splits{Split::test_in, Split::test_ood};
    double eta = 2.0;
    double tau = 0.5;

    void validate() const;
};

struct ResultRow {
    std::string constraint;
    int fraction = 100;
    std::string sweep_param = "none";
    double sweep_value = 0.0;
    std::string split;
    std::string metric;
    int stage = 1;
    std::uint64_t seed = 0;
    double value = 0.0; // NaN flags a diverged cell
};

/// Train/evaluate every cell of the grid. Baseline trains stage 1 only; the
/// other constraints run both stages with the named priors active. Cells are
/// independent, so jobs > 1 fans them out across threads; row order and
/// content do not depend on the job count. Divergent cells yield NaN rows.
std::vector<ResultRow> run_experiment(const ExperimentSpec& spec, const Corpus& corpus,
                                      const TrainConfig& base_cfg, const ArchConfig& arch,
                                      int jobs = 1);

/// Relative stage-2-over-stage-1 gain in percent; empty when stage1 <= 0.
std::optional<double> improvement(double stage1, double stage2);

struct SummaryRow {
    std::string constraint;
    int fraction = 100;
    std::string sweep_param = "none";
    double sweep_value = 0.0;
    std::string split;
    std::string metric;
    double stage1_mean = 0.0, stage1_std = 0.0;
    double stage2_mean = 0.0, stage2_std = 0.0;
    std::optional<double> improvement_pct;
};

/// Group over seeds: mean, standard deviation and the stage-2 improvement
/// percentage per (constraint, fraction, sweep value, split, metric), in the
/// stable order the groups first appear.
std::vector<SummaryRow> summarize(const std::vector<ResultRow>& rows);

/// Fixed header: constraint,fraction,sweep_param,sweep_value,split,metric,stage,seed,value.
void write_rows_csv(std::ostream& os, const std::vector<ResultRow>& rows);
void write_summary_csv(std::ostream& os, const std::vector<SummaryRow>& rows);

} // namespace pdeseg
