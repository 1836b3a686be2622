#include "necho/objectives.hpp"

#include <cmath>

#include <json.hpp>

#include "necho/diagnostics.hpp"
#include "necho/nn.hpp"

namespace necho {

void LossWeights::validate() const {
    if (!(ce >= 0.0) || !(bi_con >= 0.0) || !(hrchy >= 0.0))
        throw ConfigError("loss weights must be nonnegative, got (" + std::to_string(ce) + ", " +
                          std::to_string(bi_con) + ", " + std::to_string(hrchy) + ")");
    if (!(temperature > 0.0)) throw ConfigError("contrastive temperature must be positive");
    if (!(alpha_con >= 0.0 && alpha_con <= 1.0)) throw ConfigError("alpha_con must lie in [0, 1]");
}

Tensor multilabel_ce(const Tensor& probabilities, const Matrix& targets, const Matrix& mask) {
    if (probabilities.rows() != targets.rows() || probabilities.cols() != targets.cols())
        throw DimensionError("multilabel_ce: predictions " + to_string(probabilities.shape()) + " vs targets " +
                             to_string(Shape{targets.rows(), targets.cols()}));
    if (probabilities.rows() != mask.size())
        throw DimensionError("multilabel_ce: " + std::to_string(probabilities.rows()) +
                             " rows but mask covers " + std::to_string(mask.size()) + " visits");
    if (!all_finite(probabilities.value())) throw NumericError("multilabel_ce: non-finite prediction");

    // Constant per-row weights carry both averages: 1 / (visits of the patient * patients).
    const Index T = mask.cols();
    Matrix w = Matrix::Zero(probabilities.rows(), 1);
    Index patients = 0;
    for (Index b = 0; b < mask.rows(); ++b)
        if ((mask.row(b).array() != 0.0).any()) ++patients;
    if (patients == 0) {
        warn("multilabel_ce: every visit is masked; loss is 0");
        return Tensor::scalar(0.0);
    }
    for (Index b = 0; b < mask.rows(); ++b) {
        const Scalar visits = (mask.row(b).array() != 0.0).cast<Scalar>().sum();
        if (visits == 0.0) continue;
        for (Index t = 0; t < T; ++t)
            if (mask(b, t) != 0.0) w(b * T + t, 0) = 1.0 / (visits * static_cast<Scalar>(patients));
    }

    const Tensor p = clamp(probabilities, kProbabilityClamp, 1.0 - kProbabilityClamp);
    const Tensor y(targets);
    const Tensor not_y(Matrix((1.0 - targets.array()).matrix()));
    const Tensor ll = add(mul(y, log(p)), mul(not_y, log(add_scalar(scale(p, -1.0), 1.0))));
    return scale(sum(mul(row_sum(ll), Tensor(w))), -1.0);
}

PatientPooling parse_pooling(const std::string& name) {
    if (name == "mean") return PatientPooling::Mean;
    if (name == "last" || name == "last_visit") return PatientPooling::LastVisit;
    throw ConfigError("unknown patient pooling '" + name + "' (expected mean or last_visit)");
}

std::string to_string(PatientPooling p) { return p == PatientPooling::Mean ? "mean" : "last_visit"; }

Matrix pooling_matrix(const Matrix& mask, PatientPooling pooling) {
    const Index T = mask.cols();
    std::vector<Index> kept;
    for (Index b = 0; b < mask.rows(); ++b)
        if ((mask.row(b).array() != 0.0).any()) kept.push_back(b);
    Matrix P = Matrix::Zero(static_cast<Index>(kept.size()), mask.size());
    for (std::size_t i = 0; i < kept.size(); ++i) {
        const Index b = kept[i];
        const auto row = static_cast<Index>(i);
        if (pooling == PatientPooling::Mean) {
            const Scalar visits = (mask.row(b).array() != 0.0).cast<Scalar>().sum();
            for (Index t = 0; t < T; ++t)
                if (mask(b, t) != 0.0) P(row, b * T + t) = 1.0 / visits;
        } else {
            Index last = 0;
            for (Index t = 0; t < T; ++t)
                if (mask(b, t) != 0.0) last = t;
            P(row, b * T + last) = 1.0;
        }
    }
    return P;
}

Tensor patient_representation(const Tensor& stream, const Matrix& mask, PatientPooling pooling) {
    if (stream.rows() != mask.size())
        throw DimensionError("patient_representation: stream has " + std::to_string(stream.rows()) +
                             " rows, mask covers " + std::to_string(mask.size()));
    return matmul(Tensor(pooling_matrix(mask, pooling)), stream);
}

Tensor bimodal_contrastive(const Tensor& first, const Tensor& second, Scalar temperature, Scalar alpha) {
    if (first.rows() != second.rows() || first.cols() != second.cols())
        throw DimensionError("bimodal_contrastive: representations " + to_string(first.shape()) + " vs " +
                             to_string(second.shape()));
    if (first.rows() < 1) throw DimensionError("bimodal_contrastive: need at least one patient");
    if (!(temperature > 0.0)) throw ConfigError("contrastive temperature must be positive");
    const Index n = first.rows();
    const Tensor sim = scale(matmul(row_normalize(first), transpose(row_normalize(second))), 1.0 / temperature);
    const Tensor eye(Matrix(Matrix::Identity(n, n)));
    const Scalar inv_n = 1.0 / static_cast<Scalar>(n);
    const Tensor forward = scale(sum(mul(log_softmax(sim), eye)), -inv_n);
    const Tensor backward = scale(sum(mul(log_softmax(transpose(sim)), eye)), -inv_n);
    return add(scale(forward, alpha), scale(backward, 1.0 - alpha));
}

Tensor contrastive_total(const Tensor& code, const Tensor& demo, const Tensor& note, Scalar temperature,
                         Scalar alpha) {
    return add(bimodal_contrastive(code, demo, temperature, alpha),
               bimodal_contrastive(code, note, temperature, alpha));
}

Tensor hierarchical_loss(const std::array<Tensor, 3>& parent_probabilities, const Matrix& parent_targets,
                         const Matrix& mask) {
    Tensor total = multilabel_ce(parent_probabilities[0], parent_targets, mask);
    for (std::size_t m = 1; m < 3; ++m) total = add(total, multilabel_ce(parent_probabilities[m], parent_targets, mask));
    return total;
}

Tensor total_loss(const LossParts& parts, const LossWeights& weights) {
    weights.validate();
    Tensor total;
    const auto accumulate = [&total](const Tensor& term, Scalar weight, const char* name) {
        if (weight == 0.0) return;
        if (!term.defined()) throw ConfigError(std::string("loss term ") + name + " has weight but was not computed");
        const Tensor weighted = weight == 1.0 ? term : scale(term, weight);
        total = total.defined() ? add(total, weighted) : weighted;
    };
    accumulate(parts.ce, weights.ce, "L_ce");
    accumulate(parts.bi_con, weights.bi_con, "L_bi_con");
    accumulate(parts.hrchy, weights.hrchy, "L_hrchy");
    return total.defined() ? total : Tensor::scalar(0.0);
}

std::string loss_json_line(long step, const LossParts& parts, const Tensor& total) {
    const auto value = [](const Tensor& t) -> nlohmann::json { return t.defined() ? nlohmann::json(t.item()) : nlohmann::json(); };
    nlohmann::ordered_json j;
    j["step"] = step;
    j["L_ce"] = value(parts.ce);
    j["L_bi_con"] = value(parts.bi_con);
    j["L_hrchy"] = value(parts.hrchy);
    j["L_total"] = value(total);
    return j.dump();
}

}  // namespace necho
