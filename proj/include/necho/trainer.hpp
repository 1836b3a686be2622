#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "necho/config.hpp"
#include "necho/model.hpp"
#include "necho/ontology.hpp"

namespace necho {

struct Dataset {
    Ontology ontology;
    Cohort train;
    Cohort valid;
    Cohort test;
};

/// Generates (or reads) the cohort described by `data` and splits it.
/// The ontology must match the model's label spaces.
Dataset load_dataset(const DataConfig& data, const ModelConfig& model);

/// {"acc@5": ..., "acc@10": ...} in ascending k.
nlohmann::ordered_json acc_json(const std::map<int, Scalar>& acc);

struct EvalReport {
    std::map<int, Scalar> acc;  // k -> visit-averaged Acc@k
    std::size_t visits = 0;

    nlohmann::ordered_json to_json() const;
};

/// Eval-mode pass over `records`; no tape, no parameter or RNG mutation.
EvalReport evaluate(const NechoModel& model, const Cohort& records, const Ontology& ont, const std::vector<int>& ks,
                    std::size_t batch_size);

/// Stops once `patience` consecutive epochs bring no strict improvement.
class EarlyStopping {
  public:
    explicit EarlyStopping(int patience);

    /// Records one epoch's metric; returns true when it is a new best.
    bool update(Scalar metric);
    bool should_stop() const { return since_best_ >= patience_; }
    int best_epoch() const { return best_epoch_; }  // 1-based, 0 before any update
    Scalar best() const { return best_; }
    int epochs_seen() const { return seen_; }

  private:
    int patience_;
    int seen_ = 0;
    int best_epoch_ = 0;
    int since_best_ = 0;
    Scalar best_ = 0.0;
};

/// The individual loss terms for one batch; terms with zero effective weight
/// are not computed at all.
LossParts compute_losses(const ForwardOutput& out, const Batch& batch, const LossWeights& weights,
                         PatientPooling pooling);

struct EpochRecord {
    int epoch = 0;
    Scalar train_loss = 0.0;  // mean total loss over the epoch's steps
    std::map<int, Scalar> valid_acc;
};

struct TrainResult {
    std::string config_hash;
    std::uint64_t seed = 0;
    std::vector<EpochRecord> epochs;
    int best_epoch = 0;
    bool stopped_early = false;
    long steps = 0;
    EvalReport valid;  // best parameters
    EvalReport test;
    std::map<std::string, std::map<int, Scalar>> baselines;  // on the test split
    std::vector<std::string> metrics_lines;  // exactly the lines of metrics.jsonl
    std::unique_ptr<NechoModel> model;       // restored to the best epoch

    nlohmann::ordered_json report() const;
};

struct TrainOptions {
    std::filesystem::path run_dir;  // empty: nothing is written
    std::ostream* log = nullptr;    // human-readable progress, may include timings
    bool baselines = true;
};

TrainResult train(const TrainConfig& cfg, const Dataset& data, const TrainOptions& options = {});
TrainResult train(const TrainConfig& cfg, const TrainOptions& options = {});

/// Rebuilds the model of a run directory (config.json + checkpoint/).
std::unique_ptr<NechoModel> load_run_model(const std::filesystem::path& run_dir, TrainConfig* cfg_out = nullptr);

void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace necho
