#include "necho/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>

namespace necho {

using nlohmann::json;
using nlohmann::ordered_json;

LossWeights TrainConfig::effective_weights() const {
    LossWeights w = loss;
    if (ablations.no_contrastive) w.bi_con = 0.0;
    if (ablations.no_hierarchy) w.hrchy = 0.0;
    return w;
}

void TrainConfig::validate() const {
    model.validate();
    loss.validate();
    if (!(lr > 0.0)) throw ConfigError("lr must be positive");
    if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("momentum must be in [0, 1)");
    if (batch_size < 1 || eval_batch_size < 1) throw ConfigError("batch sizes must be >= 1");
    if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
    if (patience < 1) throw ConfigError("patience must be >= 1");
    if (monitor_k < 1) throw ConfigError("monitor_k must be >= 1");
    for (const int k : eval_ks)
        if (k < 1) throw ConfigError("evaluation k must be >= 1");
    if (data.dir.empty() && data.patients < 3) throw ConfigError("need at least 3 patients to split");
    if (data.dir.empty() && data.n_parents * data.children_per_parent != model.num_leaves)
        throw ConfigError("generated ontology has " + std::to_string(data.n_parents * data.children_per_parent) +
                          " leaves but model.num_leaves is " + std::to_string(model.num_leaves));
    if (data.dir.empty() && data.n_parents != model.num_parents)
        throw ConfigError("generated ontology has " + std::to_string(data.n_parents) +
                          " parents but model.num_parents is " + std::to_string(model.num_parents));
}

namespace {

std::string optimizer_name(OptimizerKind k) { return k == OptimizerKind::Adam ? "adam" : "sgd"; }

OptimizerKind parse_optimizer(const std::string& s) {
    if (s == "adam") return OptimizerKind::Adam;
    if (s == "sgd") return OptimizerKind::Sgd;
    throw ConfigError("unknown optimizer '" + s + "' (expected adam or sgd)");
}

// Reads known keys of one object and rejects the rest.
class Reader {
  public:
    Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError("config section '" + path_ + "' must be an object");
    }
    ~Reader() = default;

    template <typename T>
    void get(const char* key, T& out) {
        seen_.insert(key);
        if (!j_.contains(key)) return;
        try {
            out = j_.at(key).get<T>();
        } catch (const json::exception& e) {
            throw ConfigError("config key '" + path_ + key + "': " + e.what());
        }
    }
    const json* section(const char* key) {
        seen_.insert(key);
        return j_.contains(key) ? &j_.at(key) : nullptr;
    }
    void finish() const {
        for (const auto& [k, v] : j_.items())
            if (!seen_.count(k)) throw ConfigError("unknown config key '" + path_ + k + "'");
    }

  private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

}  // namespace

ordered_json to_json(const TrainConfig& c) {
    ordered_json j;
    j["seed"] = c.seed;
    const auto& m = c.model;
    j["model"] = {{"num_leaves", m.num_leaves},
                  {"num_parents", m.num_parents},
                  {"vocab_size", m.vocab_size},
                  {"d_model", m.d_model},
                  {"d_word", m.d_word},
                  {"d_note", m.d_note},
                  {"filter_widths", m.filter_widths},
                  {"heads", m.heads},
                  {"layers", m.layers},
                  {"d_ff", m.d_ff},
                  {"projector_width", m.projector_width},
                  {"dropout", m.dropout},
                  {"layer_norm_eps", m.layer_norm_eps},
                  {"causal", m.causal},
                  {"freeze_word_embeddings", m.freeze_word_embeddings},
                  {"embedding_init_std", m.embedding_init_std}};
    ordered_json abl;
    for (const auto& n : Ablations::names()) abl[n] = c.ablations.is_enabled(n);
    j["ablations"] = abl;
    j["loss"] = {{"ce", c.loss.ce},
                 {"bi_con", c.loss.bi_con},
                 {"hrchy", c.loss.hrchy},
                 {"temperature", c.loss.temperature},
                 {"alpha_con", c.loss.alpha_con},
                 {"pooling", to_string(c.pooling)}};
    j["train"] = {{"optimizer", optimizer_name(c.optimizer)},
                  {"lr", c.lr},
                  {"momentum", c.momentum},
                  {"batch_size", c.batch_size},
                  {"eval_batch_size", c.eval_batch_size},
                  {"max_epochs", c.max_epochs},
                  {"patience", c.patience},
                  {"monitor_k", c.monitor_k},
                  {"eval_ks", c.eval_ks},
                  {"log_steps", c.log_steps}};
    j["data"] = {{"dir", c.data.dir},
                 {"patients", c.data.patients},
                 {"seed", c.data.seed},
                 {"n_parents", c.data.n_parents},
                 {"children_per_parent", c.data.children_per_parent},
                 {"split", {{"train", c.data.split.train}, {"valid", c.data.split.valid}, {"test", c.data.split.test}}},
                 {"split_seed", c.data.split_seed}};
    return j;
}

TrainConfig config_from_json(const json& j) {
    TrainConfig c;
    Reader root(j, "");
    root.get("seed", c.seed);
    if (const json* s = root.section("model")) {
        Reader r(*s, "model.");
        auto& m = c.model;
        r.get("num_leaves", m.num_leaves);
        r.get("num_parents", m.num_parents);
        r.get("vocab_size", m.vocab_size);
        r.get("d_model", m.d_model);
        r.get("d_word", m.d_word);
        r.get("d_note", m.d_note);
        r.get("filter_widths", m.filter_widths);
        r.get("heads", m.heads);
        r.get("layers", m.layers);
        r.get("d_ff", m.d_ff);
        r.get("projector_width", m.projector_width);
        r.get("dropout", m.dropout);
        r.get("layer_norm_eps", m.layer_norm_eps);
        r.get("causal", m.causal);
        r.get("freeze_word_embeddings", m.freeze_word_embeddings);
        r.get("embedding_init_std", m.embedding_init_std);
        r.finish();
    }
    if (const json* s = root.section("ablations")) {
        if (!s->is_object()) throw ConfigError("config section 'ablations' must be an object");
        for (const auto& [k, v] : s->items()) {
            if (!v.is_boolean()) throw ConfigError("ablation '" + k + "' must be a boolean");
            if (v.get<bool>()) c.ablations.enable(k);
            else c.ablations.is_enabled(k);  // still rejects unknown names
        }
    }
    if (const json* s = root.section("loss")) {
        Reader r(*s, "loss.");
        r.get("ce", c.loss.ce);
        r.get("bi_con", c.loss.bi_con);
        r.get("hrchy", c.loss.hrchy);
        r.get("temperature", c.loss.temperature);
        r.get("alpha_con", c.loss.alpha_con);
        std::string pooling = to_string(c.pooling);
        r.get("pooling", pooling);
        c.pooling = parse_pooling(pooling);
        r.finish();
    }
    if (const json* s = root.section("train")) {
        Reader r(*s, "train.");
        std::string opt = optimizer_name(c.optimizer);
        r.get("optimizer", opt);
        c.optimizer = parse_optimizer(opt);
        r.get("lr", c.lr);
        r.get("momentum", c.momentum);
        r.get("batch_size", c.batch_size);
        r.get("eval_batch_size", c.eval_batch_size);
        r.get("max_epochs", c.max_epochs);
        r.get("patience", c.patience);
        r.get("monitor_k", c.monitor_k);
        r.get("eval_ks", c.eval_ks);
        r.get("log_steps", c.log_steps);
        r.finish();
    }
    if (const json* s = root.section("data")) {
        Reader r(*s, "data.");
        r.get("dir", c.data.dir);
        r.get("patients", c.data.patients);
        r.get("seed", c.data.seed);
        r.get("n_parents", c.data.n_parents);
        r.get("children_per_parent", c.data.children_per_parent);
        if (const json* sp = r.section("split")) {
            Reader rs(*sp, "data.split.");
            rs.get("train", c.data.split.train);
            rs.get("valid", c.data.split.valid);
            rs.get("test", c.data.split.test);
            rs.finish();
        }
        r.get("split_seed", c.data.split_seed);
        r.finish();
    }
    root.finish();
    c.validate();
    return c;
}

namespace {

json read_config_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
    }
}

void merge_overrides(json& j, const std::vector<std::string>& overrides) {
    for (const auto& o : overrides) {
        const auto eq = o.find('=');
        if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + o + "' is not key=value");
        const std::string key = o.substr(0, eq);
        const std::string raw = o.substr(eq + 1);
        json value = json::parse(raw, nullptr, false);
        if (value.is_discarded()) value = raw;
        json::json_pointer ptr;
        std::size_t start = 0;
        while (true) {
            const auto dot = key.find('.', start);
            ptr /= key.substr(start, dot - start);
            if (dot == std::string::npos) break;
            start = dot + 1;
        }
        if (!j.contains(ptr)) throw ConfigError("unknown config key '" + key + "'");
        j[ptr] = value;
    }
}

}  // namespace

TrainConfig load_config(const std::filesystem::path& path) { return config_from_json(read_config_json(path)); }

TrainConfig apply_overrides(const TrainConfig& cfg, const std::vector<std::string>& overrides) {
    json j = to_json(cfg);
    merge_overrides(j, overrides);
    return config_from_json(j);
}

TrainConfig resolve_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
    json j = to_json(TrainConfig{});
    if (!path.empty()) {
        const json file = read_config_json(path);
        if (!file.is_object()) throw ConfigError("config file " + path.string() + " must hold a JSON object");
        // Unknown keys survive the patch and are rejected by config_from_json.
        j.merge_patch(file);
    }
    merge_overrides(j, overrides);
    return config_from_json(j);
}

std::string config_hash(const TrainConfig& cfg) {
    const std::string text = to_json(cfg).dump();
    std::uint64_t h = 14695981039346656037ull;
    for (const unsigned char ch : text) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace necho
