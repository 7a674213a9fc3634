#include "pdeseg/harness.hpp"

#include "pdeseg/errors.hpp"
#include "pdeseg/metrics.hpp"
#include "pdeseg/rng.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <stdexcept>
#include <thread>
#include <tuple>

namespace pdeseg {

const char* to_string(Constraint c) {
    switch (c) {
        case Constraint::baseline: return "baseline";
        case Constraint::rd_only: return "rd_only";
        case Constraint::pf_only: return "pf_only";
        case Constraint::rd_pf: return "rd_pf";
    }
    return "?";
}

Constraint constraint_from_string(const std::string& s) {
    if (s == "baseline") return Constraint::baseline;
    if (s == "rd_only") return Constraint::rd_only;
    if (s == "pf_only") return Constraint::pf_only;
    if (s == "rd_pf") return Constraint::rd_pf;
    throw ConfigError("unknown constraint: " + s);
}

const char* to_string(SweepAxis a) {
    switch (a) {
        case SweepAxis::none: return "none";
        case SweepAxis::reaction_threshold: return "a";
        case SweepAxis::diffusion: return "D";
        case SweepAxis::interface_eps: return "eps";
        case SweepAxis::lambda_rd: return "lambda_rd";
        case SweepAxis::lambda_pf: return "lambda_pf";
    }
    return "?";
}

SweepAxis sweep_axis_from_string(const std::string& s) {
    if (s == "none") return SweepAxis::none;
    if (s == "a") return SweepAxis::reaction_threshold;
    if (s == "D") return SweepAxis::diffusion;
    if (s == "eps") return SweepAxis::interface_eps;
    if (s == "lambda_rd") return SweepAxis::lambda_rd;
    if (s == "lambda_pf") return SweepAxis::lambda_pf;
    throw ConfigError("unknown sweep axis: " + s);
}

void ExperimentSpec::validate() const {
    if (constraints.empty() || fractions.empty() || metrics.empty() || splits.empty())
        throw std::invalid_argument("ExperimentSpec: constraint/fraction/metric/split lists must be nonempty");
    if (axis != SweepAxis::none && values.empty())
        throw std::invalid_argument("ExperimentSpec: sweep axis set but no values given");
    if (repeats < 1)
        throw std::invalid_argument("ExperimentSpec: repeats must be >= 1");
    for (int f : fractions)
        if (f < 1 || f > 100)
            throw std::invalid_argument("ExperimentSpec: fractions must lie in [1,100]");
    for (const auto& m : metrics)
        if (m != "dice" && m != "iou" && m != "boundary_f1")
            throw std::invalid_argument("ExperimentSpec: unknown metric " + m);
    if (!(eta > 0.0))
        throw std::invalid_argument("ExperimentSpec: eta must be > 0");
}

namespace {

double eval_metric(const std::string& metric, const BinaryMask& pred, const BinaryMask& gt,
                   double eta) {
    if (metric == "dice") return dice(pred, gt);
    if (metric == "iou") return iou(pred, gt);
    return boundary_f1(pred, gt, {eta}).f1;
}

struct Cell {
    Constraint constraint;
    int fraction;
    double sweep_value;
    std::uint64_t seed;
};

TrainConfig cell_config(const ExperimentSpec& spec, const TrainConfig& base, const Cell& cell) {
    TrainConfig cfg = base;
    cfg.seed = cell.seed;
    switch (spec.axis) {
        case SweepAxis::none: break;
        case SweepAxis::reaction_threshold: cfg.rd.threshold = cell.sweep_value; break;
        case SweepAxis::diffusion: cfg.rd.diffusion = cell.sweep_value; break;
        case SweepAxis::interface_eps: cfg.pf.eps = cell.sweep_value; break;
        case SweepAxis::lambda_rd: cfg.weights.lambda_rd = cell.sweep_value; break;
        case SweepAxis::lambda_pf: cfg.weights.lambda_pf = cell.sweep_value; break;
    }
    switch (cell.constraint) {
        case Constraint::baseline:
            cfg.epochs_stage2 = 0;
            cfg.weights = {};
            break;
        case Constraint::rd_only: cfg.weights.lambda_pf = 0.0; break;
        case Constraint::pf_only: cfg.weights.lambda_rd = 0.0; break;
        case Constraint::rd_pf: break;
    }
    return cfg;
}

} // namespace

std::vector<ResultRow> run_experiment(const ExperimentSpec& spec, const Corpus& corpus,
                                      const TrainConfig& base_cfg, const ArchConfig& arch,
                                      int jobs) {
    spec.validate();
    base_cfg.validate();
    arch.validate();
    if (jobs < 1)
        throw std::invalid_argument("run_experiment: jobs must be >= 1");

    const std::vector<double> sweep_values =
        spec.axis == SweepAxis::none ? std::vector<double>{0.0} : spec.values;

    std::vector<Cell> cells;
    for (Constraint c : spec.constraints)
        for (int fraction : spec.fractions)
            for (double value : sweep_values)
                for (int r = 0; r < spec.repeats; ++r)
                    cells.push_back({c, fraction, value,
                                     base_cfg.seed + static_cast<std::uint64_t>(r)});

    // per-cell row blocks, assembled in cell order so the output is
    // independent of scheduling
    std::vector<std::vector<ResultRow>> blocks(cells.size());

    auto run_cell = [&](std::size_t ci) {
        const Cell& cell = cells[ci];
        const TrainConfig cfg = cell_config(spec, base_cfg, cell);
        const Corpus sub = corpus.with_train_fraction(cell.fraction);

        bool diverged = false;
        TrainResult tr;
        try {
            tr = train(sub, cfg, arch);
        } catch (const DivergenceError&) {
            diverged = true;
        }

        const int stages = cell.constraint == Constraint::baseline ? 1 : 2;
        std::vector<ResultRow>& rows = blocks[ci];
        for (int stage = 1; stage <= stages; ++stage) {
            const ParamSet& params = stage == 1 ? tr.stage1_params : tr.params;
            for (Split split : spec.splits) {
                const auto idx = corpus.split_indices(split);
                for (const std::string& metric : spec.metrics) {
                    ResultRow row;
                    row.constraint = to_string(cell.constraint);
                    row.fraction = cell.fraction;
                    row.sweep_param = to_string(spec.axis);
                    row.sweep_value = cell.sweep_value;
                    row.split = to_string(split);
                    row.metric = metric;
                    row.stage = stage;
                    row.seed = cell.seed;
                    if (diverged || idx.empty()) {
                        row.value = std::numeric_limits<double>::quiet_NaN();
                    } else {
                        double acc = 0.0;
                        for (std::size_t k : idx) {
                            const Sample& s = corpus.samples[k];
                            const BinaryMask pred =
                                binarize(forward(s.image, params, arch), spec.tau);
                            acc += eval_metric(metric, pred, s.mask, spec.eta);
                        }
                        row.value = acc / static_cast<double>(idx.size());
                    }
                    rows.push_back(std::move(row));
                }
            }
        }
    };

    if (jobs == 1 || cells.size() <= 1) {
        for (std::size_t ci = 0; ci < cells.size(); ++ci)
            run_cell(ci);
    } else {
        std::atomic<std::size_t> next{0};
        auto worker = [&] {
            for (;;) {
                const std::size_t ci = next.fetch_add(1);
                if (ci >= cells.size()) break;
                run_cell(ci);
            }
        };
        std::vector<std::thread> pool;
        const int n = std::min<int>(jobs, static_cast<int>(cells.size()));
        pool.reserve(static_cast<std::size_t>(n));
        for (int k = 0; k < n; ++k)
            pool.emplace_back(worker);
        for (auto& th : pool)
            th.join();
    }

    std::vector<ResultRow> rows;
    for (auto& block : blocks)
        for (auto& row : block)
            rows.push_back(std::move(row));
    return rows;
}

std::optional<double> improvement(double stage1, double stage2) {
    if (!(stage1 > 0.0))
        return std::nullopt;
    return 100.0 * (stage2 - stage1) / stage1;
}

std::vector<SummaryRow> summarize(const std::vector<ResultRow>& rows) {
    if (rows.empty())
        throw std::invalid_argument("summarize: no rows");

    using Key = std::tuple<std::string, int, std::string, double, std::string, std::string>;
    std::vector<Key> order;
    std::map<Key, std::array<std::vector<double>, 2>> groups;
    for (const ResultRow& r : rows) {
        Key key{r.constraint, r.fraction, r.sweep_param, r.sweep_value, r.split, r.metric};
        auto [it, inserted] = groups.try_emplace(key);
        if (inserted) order.push_back(key);
        if (r.stage == 1 || r.stage == 2)
            it->second[static_cast<std::size_t>(r.stage - 1)].push_back(r.value);
    }

    auto mean_std = [](const std::vector<double>& v) -> std::pair<double, double> {
        if (v.empty()) return {std::numeric_limits<double>::quiet_NaN(), 0.0};
        double mean = 0.0;
        for (double x : v) mean += x;
        mean /= static_cast<double>(v.size());
        double var = 0.0;
        for (double x : v) var += (x - mean) * (x - mean);
        var /= static_cast<double>(v.size());
        return {mean, std::sqrt(var)};
    };

    std::vector<SummaryRow> out;
    out.reserve(order.size());
    for (const Key& key : order) {
        const auto& [s1, s2] = std::pair(groups[key][0], groups[key][1]);
        SummaryRow row;
        std::tie(row.constraint, row.fraction, row.sweep_param, row.sweep_value, row.split,
                 row.metric) = key;
        std::tie(row.stage1_mean, row.stage1_std) = mean_std(s1);
        std::tie(row.stage2_mean, row.stage2_std) = mean_std(s2);
        if (!s1.empty() && !s2.empty() && std::isfinite(row.stage1_mean) &&
            std::isfinite(row.stage2_mean))
            row.improvement_pct = improvement(row.stage1_mean, row.stage2_mean);
        out.push_back(std::move(row));
    }
    return out;
}

void write_rows_csv(std::ostream& os, const std::vector<ResultRow>& rows) {
    os << "constraint,fraction,sweep_param,sweep_value,split,metric,stage,seed,value\n";
    char buf[96];
    for (const ResultRow& r : rows) {
        os << r.constraint << ',' << r.fraction << ',' << r.sweep_param << ',';
        std::snprintf(buf, sizeof(buf), "%.6g", r.sweep_value);
        os << buf << ',' << r.split << ',' << r.metric << ',' << r.stage << ',' << r.seed << ',';
        std::snprintf(buf, sizeof(buf), "%.6g", r.value);
        os << buf << '\n';
    }
}

void write_summary_csv(std::ostream& os, const std::vector<SummaryRow>& rows) {
    os << "constraint,fraction,sweep_param,sweep_value,split,metric,"
          "stage1_mean,stage1_std,stage2_mean,stage2_std,improvement_pct\n";
    char buf[96];
    auto put = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.6g", v);
        os << buf;
    };
    for (const SummaryRow& r : rows) {
        os << r.constraint << ',' << r.fraction << ',' << r.sweep_param << ',';
        put(r.sweep_value);
        os << ',' << r.split << ',' << r.metric << ',';
        put(r.stage1_mean);
        os << ',';
        put(r.stage1_std);
        os << ',';
        put(r.stage2_mean);
        os << ',';
        put(r.stage2_std);
        os << ',';
        if (r.improvement_pct)
            put(*r.improvement_pct);
        else
            os << "missing";
        os << '\n';
    }
}

} // namespace pdeseg
