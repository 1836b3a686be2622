// Command-line front end: data generation, training, evaluation, ablations,
// lambda sweeps and the full-model gradient check.

#include <filesystem>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "necho/checkpoint.hpp"
#include "necho/experiments.hpp"
#include "necho/metrics.hpp"
#include "necho/toy.hpp"
#include "necho/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace necho;

namespace {

enum ExitCode { kOk = 0, kFailed = 1, kUsage = 2, kData = 3, kNumeric = 4 };

int report_error(const std::string& type, const std::string& message, int code) {
    ordered_json j;
    j["error"] = {{"type", type}, {"message", message}, {"exit_code", code}};
    std::cerr << j.dump() << std::endl;
    return code;
}

struct ConfigFlags {
    std::string config_path;
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;
    std::optional<int> epochs;
    std::string data_dir;

    void attach(CLI::App* app) {
        app->add_option("-c,--config", config_path, "JSON config file")->check(CLI::ExistingFile);
        app->add_option("-s,--set", overrides, "Override a config key, e.g. --set train.lr=0.001");
        app->add_option("--seed", seed, "Training seed");
        app->add_option("--epochs", epochs, "Maximum epochs");
        app->add_option("--data", data_dir, "Directory with cohort.jsonl and ontology.txt");
    }

    TrainConfig resolve() const {
        std::vector<std::string> all = overrides;
        if (seed) all.push_back("seed=" + std::to_string(*seed));
        if (epochs) all.push_back("train.max_epochs=" + std::to_string(*epochs));
        if (!data_dir.empty()) all.push_back("data.dir=" + nlohmann::json(data_dir).dump());
        return resolve_config(config_path, all);
    }
};

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
    std::vector<std::uint64_t> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(std::stoull(item));
    if (out.empty()) throw ConfigError("no seeds given");
    return out;
}

void print_json(const ordered_json& j) { std::cout << j.dump(2) << std::endl; }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multimodal next-visit diagnosis prediction"};
    app.require_subcommand(1);

    // generate-data
    auto* gen = app.add_subcommand("generate-data", "Write a synthetic cohort and its ontology");
    std::uint64_t gen_seed = 1;
    std::size_t gen_patients = 600;
    Index gen_parents = 12, gen_children = 10, gen_vocab = 2000;
    std::string gen_out;
    gen->add_option("--seed", gen_seed, "Generator seed");
    gen->add_option("--patients", gen_patients, "Number of patients before preprocessing");
    gen->add_option("--parents", gen_parents, "Parent categories");
    gen->add_option("--children", gen_children, "Leaf codes per parent");
    gen->add_option("--vocab", gen_vocab, "Note vocabulary size");
    gen->add_option("-o,--out", gen_out, "Output directory")->required();

    // train
    auto* tr = app.add_subcommand("train", "Train one model into a run directory");
    ConfigFlags tr_flags;
    tr_flags.attach(tr);
    std::string tr_out;
    bool tr_quiet = false;
    tr->add_option("-o,--out", tr_out, "Run directory")->required();
    tr->add_flag("-q,--quiet", tr_quiet, "No per-epoch progress");

    // evaluate
    auto* ev = app.add_subcommand("evaluate", "Evaluate a run's checkpoint");
    std::string ev_run, ev_data, ev_split = "test", ev_out;
    ev->add_option("--run", ev_run, "Run directory (config.json + checkpoint/)")->required()->check(CLI::ExistingDirectory);
    ev->add_option("--data", ev_data, "Directory with cohort.jsonl and ontology.txt; evaluates every patient");
    ev->add_option("--split", ev_split, "train, valid or test of the run's own data")
        ->check(CLI::IsMember({"train", "valid", "test"}));
    ev->add_option("-o,--out", ev_out, "Write the report here as well");

    // ablate
    auto* ab = app.add_subcommand("ablate", "Ablation table: full model vs. each switch");
    ConfigFlags ab_flags;
    ab_flags.attach(ab);
    std::vector<std::string> ab_axes = {"drop_code",      "drop_demo", "drop_note",      "no_transformers",
                                        "no_mag",         "no_contrastive", "no_hierarchy"};
    std::string ab_seeds = "1", ab_out;
    ab->add_option("--axes", ab_axes, "Ablation switches")->delimiter(',');
    ab->add_option("--seeds", ab_seeds, "Comma-separated seeds");
    ab->add_option("-o,--out", ab_out, "Output directory")->required();

    // sweep-lambda
    auto* sw = app.add_subcommand("sweep-lambda", "Sweep the hierarchical-loss weight");
    ConfigFlags sw_flags;
    sw_flags.attach(sw);
    std::vector<Scalar> sw_grid = kLambdaGrid;
    std::string sw_seeds = "1", sw_out;
    sw->add_option("--grid", sw_grid, "lambda_hrchy values")->delimiter(',');
    sw->add_option("--seeds", sw_seeds, "Comma-separated seeds");
    sw->add_option("-o,--out", sw_out, "Output directory")->required();

    // gradcheck
    auto* gc = app.add_subcommand("gradcheck", "Finite-difference check of the full model on the toy problem");
    std::uint64_t gc_seed = 0;
    Scalar gc_tol = 1e-4, gc_step = 1e-5;
    gc->add_option("--seed", gc_seed, "Toy problem and init seed");
    gc->add_option("--tolerance", gc_tol, "Relative tolerance");
    gc->add_option("--step", gc_step, "Finite-difference step");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return report_error("usage", e.what(), kUsage);
    }

    try {
        if (*gen) {
            if (gen_parents < 1 || gen_children < 1) throw ConfigError("--parents and --children must be >= 1");
            const Ontology ont = Ontology::balanced(gen_parents, gen_children);
            GeneratorParams params;
            params.vocab_size = gen_vocab;
            const Cohort raw = generate_cohort(gen_seed, gen_patients, ont, params);
            const Cohort kept = preprocess(raw);
            fs::create_directories(gen_out);
            write_cohort_file(kept, fs::path(gen_out) / "cohort.jsonl");
            write_ontology_file(ont, fs::path(gen_out) / "ontology.txt");
            std::size_t visits = 0;
            for (const auto& p : kept) visits += p.visits.size();
            ordered_json j;
            j["out"] = gen_out;
            j["patients_generated"] = raw.size();
            j["patients_kept"] = kept.size();
            j["visits"] = visits;
            j["num_leaves"] = ont.num_leaves();
            j["num_parents"] = ont.num_parents();
            print_json(j);
        } else if (*tr) {
            const TrainConfig cfg = tr_flags.resolve();
            TrainOptions opt;
            opt.run_dir = tr_out;
            opt.log = tr_quiet ? nullptr : &std::cerr;
            const auto res = train(cfg, opt);
            print_json(res.report());
        } else if (*ev) {
            TrainConfig cfg;
            const auto model = load_run_model(ev_run, &cfg);
            Cohort records;
            Ontology ont = Ontology::balanced(1, 2);
            if (!ev_data.empty()) {
                ont = parse_ontology_file(fs::path(ev_data) / "ontology.txt").ontology;
                records = preprocess(read_cohort_file(fs::path(ev_data) / "cohort.jsonl"));
            } else {
                Dataset data = load_dataset(cfg.data, cfg.model);
                ont = data.ontology;
                records = ev_split == "train" ? data.train : ev_split == "valid" ? data.valid : data.test;
            }
            if (ont.num_leaves() != cfg.model.num_leaves || ont.num_parents() != cfg.model.num_parents)
                throw DimensionError("evaluation ontology has |C|=" + std::to_string(ont.num_leaves()) + ", |A|=" +
                                     std::to_string(ont.num_parents()) + " but the checkpoint expects |C|=" +
                                     std::to_string(cfg.model.num_leaves) + ", |A|=" +
                                     std::to_string(cfg.model.num_parents));
            const auto report = evaluate(*model, records, ont, cfg.eval_ks, cfg.eval_batch_size);
            ordered_json j;
            j["run"] = ev_run;
            j["config_hash"] = config_hash(cfg);
            j["seed"] = cfg.seed;
            j["data"] = ev_data.empty() ? ev_split : ev_data;
            j["report"] = report.to_json();
            ordered_json b;
            b["random_ranking"] = acc_json(random_ranking_expected(records, cfg.model.num_leaves, cfg.eval_ks));
            b["repeat_previous_visit"] = acc_json(repeat_previous_visit(records, cfg.model.num_leaves, cfg.eval_ks));
            j["baselines"] = b;
            if (!ev_out.empty()) write_text_file(ev_out, j.dump(2) + "\n");
            print_json(j);
        } else if (*ab || *sw) {
            const bool ablate = static_cast<bool>(*ab);
            const TrainConfig cfg = (ablate ? ab_flags : sw_flags).resolve();
            ExperimentOptions opt;
            opt.seeds = parse_seeds(ablate ? ab_seeds : sw_seeds);
            opt.out_dir = ablate ? ab_out : sw_out;
            opt.log = &std::cerr;
            const auto table = ablate ? run_ablation(cfg, ab_axes, opt) : sweep_lambda(cfg, sw_grid, opt);
            std::cout << table.formatted();
        } else if (*gc) {
            const ToyProblem toy = make_toy_problem(gc_seed);
            NechoModel model(toy.model, {}, gc_seed);
            randomize_parameters(model.parameters(), gc_seed + 1);
            GradCheckOptions opt;
            opt.tolerance = gc_tol;
            opt.step = gc_step;
            const auto r = gradcheck_model(model, toy.batch, LossWeights{}, opt);
            ordered_json j;
            j["passed"] = r.passed;
            j["max_rel_error"] = r.max_rel_error;
            j["tolerance"] = gc_tol;
            j["coords_checked"] = r.coords_checked;
            j["parameters"] = model.parameters().size();
            j["worst"] = {{"parameter", r.worst_input},
                          {"index", r.worst_index},
                          {"analytic", r.worst_analytic},
                          {"numeric", r.worst_numeric}};
            print_json(j);
            return r.passed ? kOk : kFailed;
        }
    } catch (const ConfigError& e) {
        return report_error("config", e.what(), kUsage);
    } catch (const HierarchyError& e) {
        return report_error("hierarchy", e.what(), kData);
    } catch (const DimensionError& e) {
        return report_error("dimension", e.what(), kData);
    } catch (const NumericError& e) {
        return report_error("numeric", e.what(), kNumeric);
    } catch (const std::exception& e) {
        return report_error("runtime", e.what(), kFailed);
    }
    return kOk;
}
