#include "necho/nn.hpp"

#include <cmath>

namespace necho {

bool all_finite(const Matrix& m) { return m.allFinite(); }

Tensor ParameterSet::create(std::string name, Matrix init) {
    if (index_.count(name) != 0) throw ConfigError("duplicate parameter name: " + name);
    Tensor t(std::move(init), true);
    index_.emplace(name, entries_.size());
    entries_.emplace_back(std::move(name), t);
    return t;
}

const Tensor& ParameterSet::at(std::string_view name) const {
    auto it = index_.find(std::string(name));
    if (it == index_.end()) throw ConfigError("unknown parameter: " + std::string(name));
    return entries_[it->second].second;
}

bool ParameterSet::contains(std::string_view name) const {
    return index_.count(std::string(name)) != 0;
}

std::size_t ParameterSet::scalar_count() const {
    std::size_t n = 0;
    for (const auto& [_, t] : entries_) n += static_cast<std::size_t>(t.value().size());
    return n;
}

void ParameterSet::zero_grad() {
    for (auto& [_, t] : entries_) {
        Tensor copy = t;
        copy.zero_grad();
    }
}

void ParameterSet::set_requires_grad(bool on) {
    for (auto& [_, t] : entries_) {
        Tensor copy = t;
        copy.set_requires_grad(on);
    }
}

std::vector<Matrix> ParameterSet::snapshot() const {
    std::vector<Matrix> out;
    out.reserve(entries_.size());
    for (const auto& [_, t] : entries_) out.push_back(t.value());
    return out;
}

void ParameterSet::restore(const std::vector<Matrix>& values) {
    if (values.size() != entries_.size())
        throw ConfigError("restore: snapshot has " + std::to_string(values.size()) +
                          " tensors, expected " + std::to_string(entries_.size()));
    for (std::size_t i = 0; i < values.size(); ++i) {
        Tensor t = entries_[i].second;
        if (t.rows() != values[i].rows() || t.cols() != values[i].cols())
            throw DimensionError("restore: shape mismatch for " + entries_[i].first);
        t.mutable_value() = values[i];
    }
}

Matrix Initializer::fan_in_uniform(Index rows, Index cols, Index fan_in) {
    const Scalar bound = 1.0 / std::sqrt(static_cast<Scalar>(fan_in));
    return uniform(rows, cols, -bound, bound);
}

Matrix Initializer::normal(Index rows, Index cols, Scalar stddev) {
    std::normal_distribution<Scalar> dist(0.0, stddev);
    Matrix m(rows, cols);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng_);
    return m;
}

Matrix Initializer::uniform(Index rows, Index cols, Scalar lo, Scalar hi) {
    std::uniform_real_distribution<Scalar> dist(lo, hi);
    Matrix m(rows, cols);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng_);
    return m;
}

Linear::Linear(ParameterSet& params, const std::string& name, Index in, Index out,
               Initializer& init, bool with_bias)
    : weight(params.create(name + ".weight", init.fan_in_uniform(in, out, in))) {
    if (with_bias) bias = params.create(name + ".bias", Matrix::Zero(1, out));
}

Tensor Linear::operator()(const Tensor& x) const {
    Tensor y = matmul(x, weight);
    return bias.defined() ? add(y, bias) : y;
}

LayerNorm::LayerNorm(ParameterSet& params, const std::string& name, Index dim, Scalar eps_)
    : gain(params.create(name + ".gain", Matrix::Ones(1, dim))),
      bias(params.create(name + ".bias", Matrix::Zero(1, dim))),
      eps(eps_) {}

Conv1d::Conv1d(ParameterSet& params, const std::string& name, Index width_, Index d_in,
               Index d_out, Initializer& init)
    : kernels(params.create(name + ".kernels", init.fan_in_uniform(width_ * d_in, d_out, width_ * d_in))),
      bias(params.create(name + ".bias", Matrix::Zero(1, d_out))),
      width(width_) {}

}  // namespace necho
