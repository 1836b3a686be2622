#pragma once

#include <functional>
#include <memory>
#include <random>
#include <string_view>
#include <vector>

#include "necho/types.hpp"

namespace necho {

namespace detail {
struct TensorImpl {
    Matrix value;
    Matrix grad;  // empty until something flows into it
    bool requires_grad = false;
};
}  // namespace detail

/// Dense 2-D float64 tensor with an optional gradient buffer.
///
/// A Tensor is a shared handle: copies alias the same storage, which is what
/// lets the tape route gradients back to parameters. Rank is fixed at two; a
/// scalar is 1x1 and a vector is 1xn or nx1.
class Tensor {
  public:
    Tensor() = default;
    explicit Tensor(Matrix value, bool requires_grad = false);

    static Tensor zeros(Index rows, Index cols, bool requires_grad = false);
    static Tensor scalar(Scalar v, bool requires_grad = false);

    bool defined() const { return impl_ != nullptr; }
    Shape shape() const;
    Index rows() const { return impl_->value.rows(); }
    Index cols() const { return impl_->value.cols(); }

    const Matrix& value() const { return impl_->value; }
    /// Direct write access; only optimizers and finite-difference checks use this.
    Matrix& mutable_value() { return impl_->value; }

    bool requires_grad() const { return impl_->requires_grad; }
    void set_requires_grad(bool on) { impl_->requires_grad = on; }

    bool has_grad() const { return impl_->grad.size() != 0; }
    /// Gradient buffer, zero-filled if nothing has been accumulated.
    Matrix grad() const;
    void zero_grad() { impl_->grad.resize(0, 0); }

    Scalar item() const;

    const std::shared_ptr<detail::TensorImpl>& impl() const { return impl_; }
    bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

  private:
    explicit Tensor(std::shared_ptr<detail::TensorImpl> impl) : impl_(std::move(impl)) {}
    std::shared_ptr<detail::TensorImpl> impl_;

    friend class Tape;
    friend Tensor make_node(std::string_view, Matrix, std::vector<Tensor>,
                            std::function<void(const Matrix&)>);
};

/// Append-only record of differentiable operations.
///
/// Nodes are replayed in strict reverse append order by backward(). A tape
/// belongs to one thread; ops record onto the tape installed by TapeScope on
/// the calling thread. With no active tape, ops evaluate without recording.
class Tape {
  public:
    struct Node {
        std::string_view kind;
        std::vector<std::shared_ptr<detail::TensorImpl>> inputs;
        std::shared_ptr<detail::TensorImpl> output;
        std::function<void(const Matrix&)> backward;
    };

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    std::size_t size() const { return nodes_.size(); }
    const std::vector<Node>& nodes() const { return nodes_; }
    bool contains(const Tensor& t) const;

    void record(Node node) { nodes_.push_back(std::move(node)); }

    /// Seeds d(loss)/d(loss) = 1 and propagates to every traced tensor.
    void backward(const Tensor& loss);

  private:
    std::vector<Node> nodes_;
};

/// Installs a tape as the active recording target for the current thread.
class TapeScope {
  public:
    explicit TapeScope(Tape& tape);
    ~TapeScope();
    TapeScope(const TapeScope&) = delete;
    TapeScope& operator=(const TapeScope&) = delete;

  private:
    Tape* previous_;
};

Tape* active_tape();

inline void backward(const Tensor& loss, Tape& tape) { tape.backward(loss); }

/// Adds `delta` into the gradient of a traced input.
void accumulate_grad(detail::TensorImpl& target, const Matrix& delta);

/// Builds an op result. When a tape is active and any input requires a
/// gradient, the result is traced and `backward_fn` is recorded; it receives
/// d(loss)/d(result) and must call accumulate_grad on its inputs.
Tensor make_node(std::string_view kind, Matrix value, std::vector<Tensor> inputs,
                 std::function<void(const Matrix&)> backward_fn);

// ---------------------------------------------------------------------------
// Primitives. Every one is tape-aware.

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& x);

// Elementwise with broadcasting of `b` from 1x1, 1xn or mx1.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor scale(const Tensor& x, Scalar c);
Tensor add_scalar(const Tensor& x, Scalar c);

Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
Tensor clamp(const Tensor& x, Scalar lo, Scalar hi);
Tensor min_scalar(const Tensor& x, Scalar c);

enum class Axis { Rows = 0, Cols = 1 };

/// Softmax along `axis` (Axis::Cols normalises each row).
Tensor softmax(const Tensor& x, Axis axis = Axis::Cols);
/// Row-wise softmax restricted to entries where `allowed` is nonzero. Blocked
/// entries get exactly zero weight. A row with nothing allowed is an error.
Tensor masked_softmax(const Tensor& x, const Matrix& allowed);
Tensor log_softmax(const Tensor& x);

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, Scalar eps = 1e-5);

/// Valid-padding, stride-1 convolution over the row (time) axis.
/// `kernels` is (width * d_in) x d_out; row k*d_in + i holds tap k, channel i.
Tensor conv1d(const Tensor& x, const Tensor& kernels, Index width);
/// Column-wise max over rows, 1 x d.
Tensor max_pool_time(const Tensor& x);

/// Gathers rows of `table`.
Tensor embedding(const Tensor& table, const std::vector<Index>& rows);

Tensor concat(const std::vector<Tensor>& parts, Axis axis);
Tensor slice_rows(const Tensor& x, Index start, Index count);
Tensor slice_cols(const Tensor& x, Index start, Index count);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
/// Per-row sum, m x 1.
Tensor row_sum(const Tensor& x);
/// Per-row Euclidean norm, m x 1. Zero rows get a zero gradient.
Tensor row_l2_norm(const Tensor& x);
/// Divides each row by its norm; rows with norm < eps map to zero.
Tensor row_normalize(const Tensor& x, Scalar eps = 1e-12);

/// Inverted dropout. Identity when `training` is false or rate == 0.
Tensor dropout(const Tensor& x, Scalar rate, bool training, std::mt19937_64& rng);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(Scalar c, const Tensor& x) { return scale(x, c); }

}  // namespace necho
