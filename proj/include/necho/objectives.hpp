#pragma once

#include <array>
#include <string>

#include "necho/tensor.hpp"

namespace necho {

/// Probabilities are clamped to [eps, 1 - eps] before any log.
inline constexpr Scalar kProbabilityClamp = 1e-12;

struct LossWeights {
    Scalar ce = 1.0;
    Scalar bi_con = 1.0;
    Scalar hrchy = 0.1;
    Scalar temperature = 0.1;
    Scalar alpha_con = 0.25;  // weight of the first->second direction

    void validate() const;
};

/// Binary cross-entropy summed over labels per visit, averaged over each
/// patient's unmasked visits, then over patients that have any.
///
/// `probabilities` and `targets` are (B*T) x L in the flattened batch layout;
/// `mask` is B x T. A fully masked batch yields 0 and a warning.
Tensor multilabel_ce(const Tensor& probabilities, const Matrix& targets, const Matrix& mask);

enum class PatientPooling { Mean, LastVisit };

PatientPooling parse_pooling(const std::string& name);
std::string to_string(PatientPooling p);

/// N x (B*T) matrix mapping per-visit rows to one row per patient that has at
/// least one unmasked visit. Patients without any are skipped.
Matrix pooling_matrix(const Matrix& mask, PatientPooling pooling);

/// Patient-level representation of a per-visit stream.
Tensor patient_representation(const Tensor& stream, const Matrix& mask, PatientPooling pooling);

/// Two-direction InfoNCE over cosine similarities of matched rows:
/// alpha * l(1->2) + (1 - alpha) * l(2->1), averaged over the N patients.
/// Zero-norm rows have similarity 0 with everything.
Tensor bimodal_contrastive(const Tensor& first, const Tensor& second, Scalar temperature, Scalar alpha);

/// Sum of the (code, demo) and (code, note) pair losses.
Tensor contrastive_total(const Tensor& code, const Tensor& demo, const Tensor& note, Scalar temperature,
                         Scalar alpha);

/// Sum of the three parent-level cross-entropies.
Tensor hierarchical_loss(const std::array<Tensor, 3>& parent_probabilities, const Matrix& parent_targets,
                         const Matrix& mask);

/// The individual terms. Undefined tensors are treated as absent.
struct LossParts {
    Tensor ce;
    Tensor bi_con;
    Tensor hrchy;
};

/// Weighted sum. Terms with zero weight are left out entirely, so the graph
/// (and hence every gradient) is bitwise the one of the remaining terms.
Tensor total_loss(const LossParts& parts, const LossWeights& weights);

/// One JSON line: {"step", "L_ce", "L_bi_con", "L_hrchy", "L_total"}.
std::string loss_json_line(long step, const LossParts& parts, const Tensor& total);

}  // namespace necho
