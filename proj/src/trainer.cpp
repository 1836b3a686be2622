#include "necho/trainer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>

#include "necho/checkpoint.hpp"
#include "necho/metrics.hpp"
#include "necho/optim.hpp"

namespace necho {

using nlohmann::ordered_json;

namespace {

void check_label_spaces(const Ontology& ont, const ModelConfig& model) {
    if (ont.num_leaves() != model.num_leaves || ont.num_parents() != model.num_parents)
        throw ConfigError("ontology has |C|=" + std::to_string(ont.num_leaves()) + ", |A|=" +
                          std::to_string(ont.num_parents()) + " but the model expects |C|=" +
                          std::to_string(model.num_leaves) + ", |A|=" + std::to_string(model.num_parents));
}

void check_vocabulary(const Cohort& records, Index vocab) {
    for (const auto& p : records)
        for (const auto& v : p.visits)
            for (const Index w : v.note)
                if (w < 0 || w >= vocab)
                    throw ConfigError("patient " + std::to_string(p.patient_id) + " has note token " +
                                      std::to_string(w) + " outside vocabulary of " + std::to_string(vocab));
}

}  // namespace

ordered_json acc_json(const std::map<int, Scalar>& acc) {
    ordered_json j = ordered_json::object();
    for (const auto& [k, v] : acc) j["acc@" + std::to_string(k)] = v;
    return j;
}

Dataset load_dataset(const DataConfig& data, const ModelConfig& model) {
    Cohort cohort;
    std::optional<Ontology> ont;
    if (!data.dir.empty()) {
        const std::filesystem::path dir(data.dir);
        ont = parse_ontology_file(dir / "ontology.txt").ontology;
        cohort = preprocess(read_cohort_file(dir / "cohort.jsonl"));
    } else {
        ont = Ontology::balanced(data.n_parents, data.children_per_parent);
        GeneratorParams gen;
        gen.vocab_size = model.vocab_size;
        cohort = preprocess(generate_cohort(data.seed, data.patients, *ont, gen));
    }
    check_label_spaces(*ont, model);
    check_vocabulary(cohort, model.vocab_size);
    auto parts = split(cohort, data.split, data.split_seed);
    return Dataset{std::move(*ont), std::move(parts.train), std::move(parts.valid), std::move(parts.test)};
}

ordered_json EvalReport::to_json() const {
    ordered_json j = acc_json(acc);
    j["visits"] = visits;
    return j;
}

EvalReport evaluate(const NechoModel& model, const Cohort& records, const Ontology& ont, const std::vector<int>& ks,
                    std::size_t batch_size) {
    AccuracyAccumulator acc(ks);
    const ForwardContext ctx{};
    for (const auto& batch : make_batches(records, batch_size, ont)) {
        const auto out = model.forward(batch, ctx);
        acc.add_batch(out.probabilities.value(), batch);
    }
    return EvalReport{acc.means(), acc.visits()};
}

EarlyStopping::EarlyStopping(int patience) : patience_(patience) {
    if (patience < 1) throw ConfigError("patience must be >= 1");
}

bool EarlyStopping::update(Scalar metric) {
    ++seen_;
    if (best_epoch_ == 0 || metric > best_) {
        best_ = metric;
        best_epoch_ = seen_;
        since_best_ = 0;
        return true;
    }
    ++since_best_;
    return false;
}

LossParts compute_losses(const ForwardOutput& out, const Batch& batch, const LossWeights& weights,
                         PatientPooling pooling) {
    LossParts parts;
    if (weights.ce != 0.0) parts.ce = multilabel_ce(out.probabilities, batch.y, batch.target_mask);
    if (weights.bi_con != 0.0) {
        std::array<Tensor, 3> reps;
        for (std::size_t m = 0; m < 3; ++m)
            reps[m] = patient_representation(out.projected[m], batch.target_mask, pooling);
        parts.bi_con = contrastive_total(reps[0], reps[1], reps[2], weights.temperature, weights.alpha_con);
    }
    if (weights.hrchy != 0.0) parts.hrchy = hierarchical_loss(out.parent_probabilities, batch.o, batch.target_mask);
    return parts;
}

ordered_json TrainResult::report() const {
    ordered_json j;
    j["config_hash"] = config_hash;
    j["seed"] = seed;
    j["epochs_run"] = epochs.size();
    j["best_epoch"] = best_epoch;
    j["stopped_early"] = stopped_early;
    j["steps"] = steps;
    ordered_json curve = ordered_json::array();
    for (const auto& e : epochs) {
        ordered_json row;
        row["epoch"] = e.epoch;
        row["train_loss"] = e.train_loss;
        row["valid"] = acc_json(e.valid_acc);
        curve.push_back(row);
    }
    j["epochs"] = curve;
    j["valid"] = valid.to_json();
    j["test"] = test.to_json();
    ordered_json b = ordered_json::object();
    for (const auto& [name, acc] : baselines) b[name] = acc_json(acc);
    j["baselines"] = b;
    return j;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

TrainResult train(const TrainConfig& cfg, const Dataset& data, const TrainOptions& options) {
    cfg.validate();
    check_label_spaces(data.ontology, cfg.model);
    if (data.train.empty() || data.valid.empty()) throw ConfigError("training and validation splits must be nonempty");
    const LossWeights weights = cfg.effective_weights();
    weights.validate();

    TrainResult result;
    result.config_hash = config_hash(cfg);
    result.seed = cfg.seed;
    result.model = std::make_unique<NechoModel>(cfg.model, cfg.ablations, cfg.seed);
    NechoModel& model = *result.model;
    ParameterSet& params = model.parameters();

    std::ofstream metrics;
    if (!options.run_dir.empty()) {
        std::filesystem::create_directories(options.run_dir);
        write_text_file(options.run_dir / "config.json", to_json(cfg).dump(2) + "\n");
        metrics.open(options.run_dir / "metrics.jsonl", std::ios::binary);
        if (!metrics) throw std::runtime_error("cannot write metrics.jsonl in " + options.run_dir.string());
    }
    const auto emit = [&](const std::string& line) {
        result.metrics_lines.push_back(line);
        if (metrics.is_open()) metrics << line << '\n';
    };

    std::unique_ptr<Adam> adam;
    std::unique_ptr<Sgd> sgd;
    if (cfg.optimizer == OptimizerKind::Adam)
        adam = std::make_unique<Adam>(params, AdamOptions{cfg.lr});
    else
        sgd = std::make_unique<Sgd>(params, cfg.lr, cfg.momentum);

    std::mt19937_64 dropout_rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
    const ForwardContext train_ctx{true, &dropout_rng, cfg.model.dropout};
    std::vector<int> ks = cfg.eval_ks;
    if (std::find(ks.begin(), ks.end(), cfg.monitor_k) == ks.end()) ks.push_back(cfg.monitor_k);
    std::sort(ks.begin(), ks.end());

    EarlyStopping stopper(cfg.patience);
    std::vector<Matrix> best_params = params.snapshot();
    long step = 0;
    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        const auto batches =
            make_batches(data.train, cfg.batch_size, data.ontology, cfg.seed * 1000003ull + static_cast<std::uint64_t>(epoch));
        Scalar loss_sum = 0.0;
        for (const auto& batch : batches) {
            ++step;
            Tape tape;
            LossParts parts;
            Tensor loss;
            {
                TapeScope scope(tape);
                const auto out = model.forward(batch, train_ctx);
                parts = compute_losses(out, batch, weights, cfg.pooling);
                loss = total_loss(parts, weights);
            }
            if (!std::isfinite(loss.item()))
                throw NumericError("loss became non-finite at step " + std::to_string(step) + " (epoch " +
                                   std::to_string(epoch) + "): " + loss_json_line(step, parts, loss));
            params.zero_grad();
            tape.backward(loss);
            if (adam) adam->step();
            else sgd->step();
            loss_sum += loss.item();
            if (cfg.log_steps) emit(loss_json_line(step, parts, loss));
        }
        params.zero_grad();

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_sum / static_cast<Scalar>(batches.size());
        rec.valid_acc = evaluate(model, data.valid, data.ontology, ks, cfg.eval_batch_size).acc;
        const bool improved = stopper.update(rec.valid_acc.at(cfg.monitor_k));
        if (improved) best_params = params.snapshot();

        ordered_json line;
        line["epoch"] = epoch;
        line["train_loss"] = rec.train_loss;
        line["valid"] = acc_json(rec.valid_acc);
        line["best"] = improved;
        emit(line.dump());
        result.epochs.push_back(rec);

        if (options.log) {
            const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            *options.log << "epoch " << epoch << " loss " << std::setprecision(5) << rec.train_loss << " valid acc@"
                         << cfg.monitor_k << " " << rec.valid_acc.at(cfg.monitor_k) << (improved ? " *" : "") << " ("
                         << std::setprecision(3) << secs << "s)" << std::endl;
        }
        if (stopper.should_stop()) {
            result.stopped_early = epoch < cfg.max_epochs;
            break;
        }
    }
    result.steps = step;
    result.best_epoch = stopper.best_epoch();
    params.restore(best_params);

    result.valid = evaluate(model, data.valid, data.ontology, ks, cfg.eval_batch_size);
    if (!data.test.empty()) result.test = evaluate(model, data.test, data.ontology, ks, cfg.eval_batch_size);
    if (options.baselines && !data.test.empty()) {
        const Index C = cfg.model.num_leaves;
        result.baselines["random_ranking"] = random_ranking_expected(data.test, C, ks);
        result.baselines["random_ranking_mc"] = random_ranking_monte_carlo(data.test, C, ks, 200, cfg.seed);
        result.baselines["repeat_previous_visit"] = repeat_previous_visit(data.test, C, ks);
        result.baselines["marginal_frequency"] = marginal_frequency(data.train, data.test, C, ks);
    }

    if (!options.run_dir.empty()) {
        metrics.close();
        save_checkpoint(params, options.run_dir / "checkpoint");
        write_text_file(options.run_dir / "report.json", result.report().dump(2) + "\n");
    }
    return result;
}

TrainResult train(const TrainConfig& cfg, const TrainOptions& options) {
    cfg.validate();
    return train(cfg, load_dataset(cfg.data, cfg.model), options);
}

std::unique_ptr<NechoModel> load_run_model(const std::filesystem::path& run_dir, TrainConfig* cfg_out) {
    const TrainConfig cfg = load_config(run_dir / "config.json");
    auto model = std::make_unique<NechoModel>(cfg.model, cfg.ablations, cfg.seed);
    load_checkpoint(model->parameters(), run_dir / "checkpoint");
    if (cfg_out) *cfg_out = cfg;
    return model;
}

}  // namespace necho
