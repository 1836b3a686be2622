#include "necho/experiments.hpp"

#include <cstdio>
#include <functional>
#include <sstream>

namespace necho {

std::map<int, Scalar> ExperimentRow::mean() const {
    std::map<int, Scalar> out;
    for (const auto& acc : test_acc)
        for (const auto& [k, v] : acc) out[k] += v;
    for (auto& [k, v] : out) v /= static_cast<Scalar>(test_acc.size());
    return out;
}

const ExperimentRow& ExperimentTable::row(const std::string& name) const {
    for (const auto& r : rows)
        if (r.name == name) return r;
    throw std::out_of_range("no experiment row '" + name + "'");
}

std::string ExperimentTable::csv() const {
    std::ostringstream out;
    out << "row,label,seed,epochs";
    for (const int k : ks) out << ",acc@" << k;
    out << '\n';
    char buf[32];
    for (const auto& r : rows) {
        for (std::size_t s = 0; s < r.seeds.size(); ++s) {
            out << r.name << ',' << r.label << ',' << r.seeds[s] << ',' << r.epochs_run[s];
            for (const int k : ks) {
                std::snprintf(buf, sizeof buf, "%.6f", r.test_acc[s].at(k));
                out << ',' << buf;
            }
            out << '\n';
        }
        out << r.name << ',' << r.label << ",mean,";
        const auto m = r.mean();
        for (const int k : ks) {
            std::snprintf(buf, sizeof buf, "%.6f", m.at(k));
            out << ',' << buf;
        }
        out << '\n';
    }
    return out.str();
}

std::string ExperimentTable::formatted() const {
    std::size_t width = 5;
    for (const auto& r : rows) width = std::max(width, r.label.size());
    std::ostringstream out;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%-*s", static_cast<int>(width), "Model");
    out << buf;
    for (const int k : ks) {
        std::snprintf(buf, sizeof buf, " | Acc@%-3d", k);
        out << buf;
    }
    out << '\n' << std::string(width, '-');
    for (std::size_t i = 0; i < ks.size(); ++i) out << "-+--------";
    out << '\n';
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%-*s", static_cast<int>(width), r.label.c_str());
        out << buf;
        const auto m = r.mean();
        for (const int k : ks) {
            std::snprintf(buf, sizeof buf, " | %7.2f", 100.0 * m.at(k));
            out << buf;
        }
        out << '\n';
    }
    return out.str();
}

std::string ablation_label(const std::string& name) {
    static const std::map<std::string, std::string> labels = {
        {"full", "NECHO"},
        {"drop_code", "w/o Code"},
        {"drop_demo", "w/o Demo"},
        {"drop_note", "w/o Note"},
        {"no_transformers", "w/o Transformers"},
        {"no_mag", "w/o MAG"},
        {"no_contrastive", "w/o L_bi-con"},
        {"no_hierarchy", "w/o L_hrchy"},
        {"no_code_centring", "w/o code centring"},
    };
    const auto it = labels.find(name);
    if (it == labels.end()) throw ConfigError("unknown ablation '" + name + "'");
    return it->second;
}

namespace {

struct Cell {
    std::string name;
    std::string label;
    TrainConfig cfg;
};

ExperimentTable run_cells(const TrainConfig& base, const std::vector<Cell>& cells, const ExperimentOptions& options) {
    if (options.seeds.empty()) throw ConfigError("at least one seed is required");
    const Dataset data = load_dataset(base.data, base.model);
    ExperimentTable table;
    table.ks = base.eval_ks;
    for (const auto& c : cells) table.rows.push_back(ExperimentRow{c.name, c.label, {}, {}, {}});
    for (const auto seed : options.seeds) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            TrainConfig cfg = cells[i].cfg;
            cfg.seed = seed;
            TrainOptions topt;
            if (!options.out_dir.empty())
                topt.run_dir = options.out_dir / (cells[i].name + "_seed" + std::to_string(seed));
            topt.baselines = false;
            const auto res = train(cfg, data, topt);
            auto& row = table.rows[i];
            row.seeds.push_back(seed);
            row.test_acc.push_back(res.test.acc);
            row.epochs_run.push_back(static_cast<int>(res.epochs.size()));
            if (options.log) {
                *options.log << cells[i].label << " seed " << seed << ":";
                for (const int k : table.ks) *options.log << " acc@" << k << "=" << res.test.acc.at(k);
                *options.log << " (" << res.epochs.size() << " epochs)" << std::endl;
            }
        }
    }
    if (!options.out_dir.empty()) {
        std::filesystem::create_directories(options.out_dir);
        write_text_file(options.out_dir / "table.csv", table.csv());
        write_text_file(options.out_dir / "table.txt", table.formatted());
    }
    return table;
}

}  // namespace

ExperimentTable run_ablation(const TrainConfig& base, const std::vector<std::string>& axes,
                             const ExperimentOptions& options) {
    std::vector<Cell> cells{{"full", ablation_label("full"), base}};
    for (const auto& axis : axes) {
        TrainConfig cfg = base;
        cfg.ablations.enable(axis);
        cfg.validate();
        cells.push_back({axis, ablation_label(axis), cfg});
    }
    return run_cells(base, cells, options);
}

ExperimentTable sweep_lambda(const TrainConfig& base, const std::vector<Scalar>& lambdas,
                             const ExperimentOptions& options) {
    std::vector<Cell> cells;
    for (const Scalar l : lambdas) {
        TrainConfig cfg = base;
        cfg.loss.hrchy = l;
        cfg.validate();
        std::ostringstream name;
        name << "lambda_hrchy=" << l;
        cells.push_back({name.str(), name.str(), cfg});
    }
    return run_cells(base, cells, options);
}

}  // namespace necho
