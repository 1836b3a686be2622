#include "necho/optim.hpp"

#include <cmath>

namespace necho {

Adam::Adam(ParameterSet& params, AdamOptions options) : params_(params), opt_(options) {
    for (const auto& [name, p] : params_.entries()) {
        m_.push_back(Matrix::Zero(p.rows(), p.cols()));
        v_.push_back(Matrix::Zero(p.rows(), p.cols()));
    }
    counts_.assign(m_.size(), 0);
}

void Adam::step() {
    ++t_;
    const auto& entries = params_.entries();
    for (std::size_t i = 0; i < entries.size(); ++i) {
        Tensor p = entries[i].second;
        if (!p.requires_grad() || !p.has_grad()) continue;
        // Bias correction counts the updates this parameter actually received.
        const long n = ++counts_[i];
        const Matrix& g = p.impl()->grad;
        m_[i] = opt_.beta1 * m_[i] + (1.0 - opt_.beta1) * g;
        v_[i] = opt_.beta2 * v_[i] + (1.0 - opt_.beta2) * g.cwiseProduct(g);
        const Scalar c1 = 1.0 - std::pow(opt_.beta1, static_cast<Scalar>(n));
        const Scalar c2 = 1.0 - std::pow(opt_.beta2, static_cast<Scalar>(n));
        p.mutable_value().array() -=
            opt_.lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + opt_.eps);
    }
}

Sgd::Sgd(ParameterSet& params, Scalar lr, Scalar momentum) : params_(params), lr_(lr), momentum_(momentum) {
    for (const auto& [name, p] : params_.entries()) velocity_.push_back(Matrix::Zero(p.rows(), p.cols()));
}

void Sgd::step() {
    const auto& entries = params_.entries();
    for (std::size_t i = 0; i < entries.size(); ++i) {
        Tensor p = entries[i].second;
        if (!p.requires_grad() || !p.has_grad()) continue;
        velocity_[i] = momentum_ * velocity_[i] + p.impl()->grad;
        p.mutable_value() -= lr_ * velocity_[i];
    }
}

}  // namespace necho
