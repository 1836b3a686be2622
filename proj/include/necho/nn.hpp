#pragma once

#include <random>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "necho/tensor.hpp"

namespace necho {

bool all_finite(const Matrix& m);

/// Named, ordered collection of trainable leaf tensors.
///
/// Names are stable across runs and double as checkpoint keys, e.g.
/// "fusion.cmt_h.layer0.attn.wq.weight".
class ParameterSet {
  public:
    using Entry = std::pair<std::string, Tensor>;

    Tensor create(std::string name, Matrix init);
    const Tensor& at(std::string_view name) const;
    bool contains(std::string_view name) const;

    const std::vector<Entry>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }
    std::size_t scalar_count() const;

    void zero_grad();
    void set_requires_grad(bool on);

    std::vector<Matrix> snapshot() const;
    void restore(const std::vector<Matrix>& values);

  private:
    std::vector<Entry> entries_;
    std::unordered_map<std::string, std::size_t> index_;
};

/// Parameter initialisation: uniform(+-1/sqrt(fan_in)) for weights,
/// normal(0, 0.02) for embedding tables, zeros for biases.
class Initializer {
  public:
    explicit Initializer(std::uint64_t seed) : rng_(seed) {}

    Matrix fan_in_uniform(Index rows, Index cols, Index fan_in);
    Matrix normal(Index rows, Index cols, Scalar stddev = 0.02);
    Matrix uniform(Index rows, Index cols, Scalar lo, Scalar hi);

  private:
    std::mt19937_64 rng_;
};

/// Affine map x W + b with W stored in x out.
struct Linear {
    Linear() = default;
    Linear(ParameterSet& params, const std::string& name, Index in, Index out, Initializer& init,
           bool with_bias = true);

    Tensor operator()(const Tensor& x) const;

    Tensor weight;
    Tensor bias;  // undefined when constructed without bias
};

struct LayerNorm {
    LayerNorm() = default;
    LayerNorm(ParameterSet& params, const std::string& name, Index dim, Scalar eps = 1e-5);

    Tensor operator()(const Tensor& x) const { return layer_norm(x, gain, bias, eps); }

    Tensor gain;
    Tensor bias;
    Scalar eps = 1e-5;
};

/// Valid conv over time with bias; kernels are (width*d_in) x d_out.
struct Conv1d {
    Conv1d() = default;
    Conv1d(ParameterSet& params, const std::string& name, Index width, Index d_in, Index d_out,
           Initializer& init);

    Tensor operator()(const Tensor& x) const { return add(conv1d(x, kernels, width), bias); }

    Tensor kernels;
    Tensor bias;
    Index width = 1;
};

}  // namespace necho
