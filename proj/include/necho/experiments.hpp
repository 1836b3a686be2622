#pragma once

#include <filesystem>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "necho/trainer.hpp"

namespace necho {

/// One table row: a config variant trained once per seed.
struct ExperimentRow {
    std::string name;   // "full", an ablation switch, or "lambda_hrchy=..."
    std::string label;  // display label
    std::vector<std::uint64_t> seeds;
    std::vector<std::map<int, Scalar>> test_acc;  // one per seed
    std::vector<int> epochs_run;

    std::map<int, Scalar> mean() const;
};

struct ExperimentTable {
    std::vector<int> ks;
    std::vector<ExperimentRow> rows;

    const ExperimentRow& row(const std::string& name) const;
    /// One line per (row, seed) plus one "mean" line per row.
    std::string csv() const;
    /// Fixed-width table of the per-row means, in percent.
    std::string formatted() const;
};

std::string ablation_label(const std::string& switch_name);

struct ExperimentOptions {
    std::vector<std::uint64_t> seeds = {1};
    std::filesystem::path out_dir;  // per-cell run dirs and the tables; empty: nothing written
    std::ostream* log = nullptr;
};

/// "full" plus one row per switch in `axes`, each cell sharing the dataset and
/// the seed. The dataset is generated once from `base.data`.
ExperimentTable run_ablation(const TrainConfig& base, const std::vector<std::string>& axes,
                             const ExperimentOptions& options);

/// One row per lambda_hrchy value.
ExperimentTable sweep_lambda(const TrainConfig& base, const std::vector<Scalar>& lambdas,
                             const ExperimentOptions& options);

inline const std::vector<Scalar> kLambdaGrid = {0.01, 0.1, 1.0};

}  // namespace necho
