#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "necho/data.hpp"
#include "necho/model_config.hpp"
#include "necho/objectives.hpp"

namespace necho {

enum class OptimizerKind { Adam, Sgd };

/// Where the cohort comes from. With `dir` set, `dir/cohort.jsonl` and
/// `dir/ontology.txt` are read; otherwise a cohort is generated.
struct DataConfig {
    std::string dir;
    std::size_t patients = 600;
    std::uint64_t seed = 1;
    Index n_parents = 12;
    Index children_per_parent = 10;
    SplitRatios split;
    std::uint64_t split_seed = 1;
};

struct TrainConfig {
    std::uint64_t seed = 1;
    ModelConfig model;
    Ablations ablations;
    LossWeights loss;
    PatientPooling pooling = PatientPooling::Mean;

    OptimizerKind optimizer = OptimizerKind::Adam;
    Scalar lr = 1e-4;
    Scalar momentum = 0.0;  // sgd only
    std::size_t batch_size = 4;
    std::size_t eval_batch_size = 16;
    int max_epochs = 50;
    int patience = 5;
    int monitor_k = 30;
    std::vector<int> eval_ks = {5, 10, 20, 30};
    bool log_steps = true;  // per-step loss lines in metrics.jsonl

    DataConfig data;

    /// Loss weights after the loss ablations are applied.
    LossWeights effective_weights() const;
    void validate() const;
};

nlohmann::ordered_json to_json(const TrainConfig& cfg);
/// Unknown keys are a ConfigError so typos never pass silently.
TrainConfig config_from_json(const nlohmann::json& j);
TrainConfig load_config(const std::filesystem::path& path);

/// Applies "a.b.c=value" overrides. The value is parsed as JSON when
/// possible, otherwise taken as a string.
TrainConfig apply_overrides(const TrainConfig& cfg, const std::vector<std::string>& overrides);

/// Defaults, then the file (if `path` is not empty), then the overrides;
/// validated once on the combined result.
TrainConfig resolve_config(const std::filesystem::path& path, const std::vector<std::string>& overrides);

/// FNV-1a 64 of the canonical config JSON, as 16 hex digits.
std::string config_hash(const TrainConfig& cfg);

}  // namespace necho
