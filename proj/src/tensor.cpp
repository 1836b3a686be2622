#include "necho/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace necho {

std::string to_string(const Shape& s) {
    std::ostringstream os;
    os << "[" << s.rows << "x" << s.cols << "]";
    return os.str();
}

namespace {

thread_local Tape* g_active_tape = nullptr;

Matrix& grad_buffer(detail::TensorImpl& t) {
    if (t.grad.size() == 0) t.grad = Matrix::Zero(t.value.rows(), t.value.cols());
    return t.grad;
}

[[noreturn]] void shape_error(std::string_view op, const Shape& a, const Shape& b) {
    throw DimensionError(std::string(op) + ": incompatible shapes " + to_string(a) + " and " +
                         to_string(b));
}

enum class Broadcast { Same, Row, Col, Scalar };

Broadcast broadcast_kind(std::string_view op, const Matrix& a, const Matrix& b) {
    if (a.rows() == b.rows() && a.cols() == b.cols()) return Broadcast::Same;
    if (b.rows() == 1 && b.cols() == 1) return Broadcast::Scalar;
    if (b.rows() == 1 && b.cols() == a.cols()) return Broadcast::Row;
    if (b.cols() == 1 && b.rows() == a.rows()) return Broadcast::Col;
    shape_error(op, {a.rows(), a.cols()}, {b.rows(), b.cols()});
}

Matrix expand(const Matrix& b, Broadcast kind, Index rows, Index cols) {
    switch (kind) {
        case Broadcast::Same: return b;
        case Broadcast::Row: return b.replicate(rows, 1);
        case Broadcast::Col: return b.replicate(1, cols);
        case Broadcast::Scalar: return Matrix::Constant(rows, cols, b(0, 0));
    }
    return b;
}

Matrix reduce_to(const Matrix& g, Broadcast kind) {
    switch (kind) {
        case Broadcast::Same: return g;
        case Broadcast::Row: return g.colwise().sum();
        case Broadcast::Col: return g.rowwise().sum();
        case Broadcast::Scalar: return Matrix::Constant(1, 1, g.sum());
    }
    return g;
}

Matrix row_softmax(const Matrix& x) {
    Matrix y(x.rows(), x.cols());
    for (Index r = 0; r < x.rows(); ++r) {
        const Scalar m = x.row(r).maxCoeff();
        y.row(r) = (x.row(r).array() - m).exp().matrix();
        y.row(r) /= y.row(r).sum();
    }
    return y;
}

Matrix row_softmax_backward(const Matrix& y, const Matrix& g) {
    const ColVector dots = (y.array() * g.array()).rowwise().sum().matrix();
    return (y.array() * (g.colwise() - dots).array()).matrix();
}

}  // namespace

// ---------------------------------------------------------------------------

Tensor::Tensor(Matrix value, bool requires_grad)
    : impl_(std::make_shared<detail::TensorImpl>()) {
    impl_->value = std::move(value);
    impl_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Index rows, Index cols, bool requires_grad) {
    return Tensor(Matrix::Zero(rows, cols), requires_grad);
}

Tensor Tensor::scalar(Scalar v, bool requires_grad) {
    return Tensor(Matrix::Constant(1, 1, v), requires_grad);
}

Shape Tensor::shape() const { return {impl_->value.rows(), impl_->value.cols()}; }

Matrix Tensor::grad() const {
    if (impl_->grad.size() == 0) return Matrix::Zero(rows(), cols());
    return impl_->grad;
}

Scalar Tensor::item() const {
    if (rows() != 1 || cols() != 1)
        throw DimensionError("item(): tensor is " + to_string(shape()) + ", not a scalar");
    return impl_->value(0, 0);
}

bool Tape::contains(const Tensor& t) const {
    return std::any_of(nodes_.begin(), nodes_.end(),
                       [&](const Node& n) { return n.output == t.impl(); });
}

void Tape::backward(const Tensor& loss) {
    if (!loss.defined() || loss.rows() != 1 || loss.cols() != 1)
        throw DimensionError("backward: loss must be a 1x1 scalar, got " +
                             (loss.defined() ? to_string(loss.shape()) : std::string("undefined")));
    if (!loss.requires_grad()) return;  // constant w.r.t. everything traced
    accumulate_grad(*loss.impl(), Matrix::Ones(1, 1));
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
        if (it->output->grad.size() == 0) continue;
        it->backward(it->output->grad);
    }
}

TapeScope::TapeScope(Tape& tape) : previous_(g_active_tape) { g_active_tape = &tape; }
TapeScope::~TapeScope() { g_active_tape = previous_; }

Tape* active_tape() { return g_active_tape; }

void accumulate_grad(detail::TensorImpl& target, const Matrix& delta) {
    if (!target.requires_grad) return;
    grad_buffer(target) += delta;
}

Tensor make_node(std::string_view kind, Matrix value, std::vector<Tensor> inputs,
                 std::function<void(const Matrix&)> backward_fn) {
    Tensor out(std::move(value));
    Tape* tape = g_active_tape;
    if (tape == nullptr) return out;
    const bool traced = std::any_of(inputs.begin(), inputs.end(),
                                    [](const Tensor& t) { return t.requires_grad(); });
    if (!traced) return out;
    out.impl_->requires_grad = true;
    Tape::Node node;
    node.kind = kind;
    node.inputs.reserve(inputs.size());
    for (const auto& in : inputs) node.inputs.push_back(in.impl());
    node.output = out.impl_;
    node.backward = std::move(backward_fn);
    tape->record(std::move(node));
    return out;
}

// ---------------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.cols() != b.rows()) shape_error("matmul", a.shape(), b.shape());
    Matrix v = a.value() * b.value();
    auto ai = a.impl();
    auto bi = b.impl();
    return make_node("matmul", std::move(v), {a, b}, [ai, bi](const Matrix& g) {
        if (ai->requires_grad) accumulate_grad(*ai, g * bi->value.transpose());
        if (bi->requires_grad) accumulate_grad(*bi, ai->value.transpose() * g);
    });
}

Tensor transpose(const Tensor& x) {
    auto xi = x.impl();
    return make_node("transpose", x.value().transpose(), {x},
                     [xi](const Matrix& g) { accumulate_grad(*xi, g.transpose()); });
}

Tensor add(const Tensor& a, const Tensor& b) {
    const Broadcast kind = broadcast_kind("add", a.value(), b.value());
    Matrix v = a.value() + expand(b.value(), kind, a.rows(), a.cols());
    auto ai = a.impl();
    auto bi = b.impl();
    return make_node("add", std::move(v), {a, b}, [ai, bi, kind](const Matrix& g) {
        accumulate_grad(*ai, g);
        if (bi->requires_grad) accumulate_grad(*bi, reduce_to(g, kind));
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    const Broadcast kind = broadcast_kind("sub", a.value(), b.value());
    Matrix v = a.value() - expand(b.value(), kind, a.rows(), a.cols());
    auto ai = a.impl();
    auto bi = b.impl();
    return make_node("sub", std::move(v), {a, b}, [ai, bi, kind](const Matrix& g) {
        accumulate_grad(*ai, g);
        if (bi->requires_grad) accumulate_grad(*bi, -reduce_to(g, kind));
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    const Broadcast kind = broadcast_kind("mul", a.value(), b.value());
    Matrix bx = expand(b.value(), kind, a.rows(), a.cols());
    Matrix v = a.value().cwiseProduct(bx);
    auto ai = a.impl();
    auto bi = b.impl();
    return make_node("mul", std::move(v), {a, b},
                     [ai, bi, kind, bx = std::move(bx)](const Matrix& g) {
                         if (ai->requires_grad) accumulate_grad(*ai, g.cwiseProduct(bx));
                         if (bi->requires_grad)
                             accumulate_grad(*bi, reduce_to(g.cwiseProduct(ai->value), kind));
                     });
}

Tensor div(const Tensor& a, const Tensor& b) {
    const Broadcast kind = broadcast_kind("div", a.value(), b.value());
    Matrix bx = expand(b.value(), kind, a.rows(), a.cols());
    Matrix v = a.value().cwiseQuotient(bx);
    auto ai = a.impl();
    auto bi = b.impl();
    return make_node("div", v, {a, b}, [ai, bi, kind, bx = std::move(bx), v](const Matrix& g) {
        if (ai->requires_grad) accumulate_grad(*ai, g.cwiseQuotient(bx));
        if (bi->requires_grad)
            accumulate_grad(*bi, reduce_to(-(g.cwiseProduct(v)).cwiseQuotient(bx), kind));
    });
}

Tensor scale(const Tensor& x, Scalar c) {
    auto xi = x.impl();
    return make_node("scale", x.value() * c, {x},
                     [xi, c](const Matrix& g) { accumulate_grad(*xi, g * c); });
}

Tensor add_scalar(const Tensor& x, Scalar c) {
    auto xi = x.impl();
    return make_node("add_scalar", (x.value().array() + c).matrix(), {x},
                     [xi](const Matrix& g) { accumulate_grad(*xi, g); });
}

Tensor relu(const Tensor& x) {
    auto xi = x.impl();
    return make_node("relu", x.value().cwiseMax(0.0), {x}, [xi](const Matrix& g) {
        accumulate_grad(*xi, (xi->value.array() > 0.0).select(g, 0.0).matrix());
    });
}

Tensor sigmoid(const Tensor& x) {
    Matrix v = (1.0 / (1.0 + (-x.value().array()).exp())).matrix();
    auto xi = x.impl();
    return make_node("sigmoid", v, {x}, [xi, v](const Matrix& g) {
        accumulate_grad(*xi, (g.array() * v.array() * (1.0 - v.array())).matrix());
    });
}

Tensor exp(const Tensor& x) {
    Matrix v = x.value().array().exp().matrix();
    auto xi = x.impl();
    return make_node("exp", v, {x},
                     [xi, v](const Matrix& g) { accumulate_grad(*xi, g.cwiseProduct(v)); });
}

Tensor log(const Tensor& x) {
    if ((x.value().array() <= 0.0).any())
        throw NumericError("log: non-positive input");
    auto xi = x.impl();
    return make_node("log", x.value().array().log().matrix(), {x}, [xi](const Matrix& g) {
        accumulate_grad(*xi, g.cwiseQuotient(xi->value));
    });
}

Tensor clamp(const Tensor& x, Scalar lo, Scalar hi) {
    auto xi = x.impl();
    return make_node("clamp", x.value().cwiseMax(lo).cwiseMin(hi), {x},
                     [xi, lo, hi](const Matrix& g) {
                         const auto& v = xi->value.array();
                         accumulate_grad(*xi, ((v >= lo) && (v <= hi)).select(g, 0.0).matrix());
                     });
}

Tensor min_scalar(const Tensor& x, Scalar c) {
    auto xi = x.impl();
    return make_node("min_scalar", x.value().cwiseMin(c), {x}, [xi, c](const Matrix& g) {
        accumulate_grad(*xi, (xi->value.array() < c).select(g, 0.0).matrix());
    });
}

Tensor softmax(const Tensor& x, Axis axis) {
    if (x.rows() == 0 || x.cols() == 0)
        throw DimensionError("softmax: empty axis in " + to_string(x.shape()));
    auto xi = x.impl();
    if (axis == Axis::Cols) {
        Matrix v = row_softmax(x.value());
        return make_node("softmax", v, {x}, [xi, v](const Matrix& g) {
            accumulate_grad(*xi, row_softmax_backward(v, g));
        });
    }
    Matrix vt = row_softmax(x.value().transpose());
    return make_node("softmax", vt.transpose(), {x}, [xi, vt](const Matrix& g) {
        accumulate_grad(*xi, row_softmax_backward(vt, g.transpose()).transpose());
    });
}

Tensor masked_softmax(const Tensor& x, const Matrix& allowed) {
    if (allowed.rows() != x.rows() || allowed.cols() != x.cols())
        shape_error("masked_softmax", x.shape(), {allowed.rows(), allowed.cols()});
    Matrix v = Matrix::Zero(x.rows(), x.cols());
    for (Index r = 0; r < x.rows(); ++r) {
        Scalar m = -std::numeric_limits<Scalar>::infinity();
        for (Index c = 0; c < x.cols(); ++c)
            if (allowed(r, c) != 0.0) m = std::max(m, x.value()(r, c));
        if (!std::isfinite(m))
            throw DimensionError("masked_softmax: row " + std::to_string(r) +
                                 " has every position masked");
        Scalar total = 0.0;
        for (Index c = 0; c < x.cols(); ++c) {
            if (allowed(r, c) == 0.0) continue;
            v(r, c) = std::exp(x.value()(r, c) - m);
            total += v(r, c);
        }
        v.row(r) /= total;
    }
    auto xi = x.impl();
    return make_node("masked_softmax", v, {x}, [xi, v](const Matrix& g) {
        accumulate_grad(*xi, row_softmax_backward(v, g));
    });
}

Tensor log_softmax(const Tensor& x) {
    if (x.cols() == 0) throw DimensionError("log_softmax: empty axis");
    Matrix v(x.rows(), x.cols());
    for (Index r = 0; r < x.rows(); ++r) {
        const Scalar m = x.value().row(r).maxCoeff();
        const Scalar lse = m + std::log((x.value().row(r).array() - m).exp().sum());
        v.row(r) = (x.value().row(r).array() - lse).matrix();
    }
    auto xi = x.impl();
    return make_node("log_softmax", v, {x}, [xi, v](const Matrix& g) {
        const Matrix p = v.array().exp().matrix();
        const ColVector gs = g.rowwise().sum();
        accumulate_grad(*xi, g - (p.array().colwise() * gs.array()).matrix());
    });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, Scalar eps) {
    const Index d = x.cols();
    if (d < 1) throw DimensionError("layer_norm: empty feature axis");
    if (gain.rows() != 1 || gain.cols() != d) shape_error("layer_norm gain", x.shape(), gain.shape());
    if (bias.rows() != 1 || bias.cols() != d) shape_error("layer_norm bias", x.shape(), bias.shape());
    if (!(eps > 0.0)) throw DimensionError("layer_norm: eps must be positive");

    const ColVector mu = x.value().rowwise().mean();
    Matrix centered = x.value().colwise() - mu;
    const ColVector var = centered.array().square().rowwise().mean();
    const ColVector inv_std = (var.array() + eps).rsqrt();
    Matrix xhat = (centered.array().colwise() * inv_std.array()).matrix();
    Matrix v = (xhat.array().rowwise() * gain.value().row(0).array()).matrix();
    v.rowwise() += bias.value().row(0);

    auto xi = x.impl();
    auto gi = gain.impl();
    auto bi = bias.impl();
    return make_node("layer_norm", std::move(v), {x, gain, bias},
                     [xi, gi, bi, xhat = std::move(xhat), inv_std](const Matrix& g) {
                         if (gi->requires_grad)
                             accumulate_grad(*gi, g.cwiseProduct(xhat).colwise().sum());
                         if (bi->requires_grad) accumulate_grad(*bi, g.colwise().sum());
                         if (!xi->requires_grad) return;
                         const Matrix dxhat =
                             (g.array().rowwise() * gi->value.row(0).array()).matrix();
                         const ColVector m1 = dxhat.rowwise().mean();
                         const ColVector m2 = dxhat.cwiseProduct(xhat).rowwise().mean();
                         Matrix dx = dxhat.colwise() - m1;
                         dx -= (xhat.array().colwise() * m2.array()).matrix();
                         dx = (dx.array().colwise() * inv_std.array()).matrix();
                         accumulate_grad(*xi, dx);
                     });
}

Tensor conv1d(const Tensor& x, const Tensor& kernels, Index width) {
    const Index len = x.rows();
    const Index d_in = x.cols();
    if (width < 1) throw DimensionError("conv1d: filter width must be >= 1");
    if (kernels.rows() != width * d_in)
        throw DimensionError("conv1d: kernel " + to_string(kernels.shape()) +
                             " does not match width " + std::to_string(width) + " x input " +
                             to_string(x.shape()));
    if (len < width)
        throw DimensionError("conv1d: input of length " + std::to_string(len) +
                             " is shorter than filter width " + std::to_string(width));
    const Index out_len = len - width + 1;
    // Row-major storage makes each window a contiguous run of width*d_in values.
    Matrix unfolded(out_len, width * d_in);
    for (Index t = 0; t < out_len; ++t)
        unfolded.row(t) = Eigen::Map<const RowVector>(x.value().data() + t * d_in, width * d_in);
    Matrix v = unfolded * kernels.value();

    auto xi = x.impl();
    auto ki = kernels.impl();
    return make_node("conv1d", std::move(v), {x, kernels},
                     [xi, ki, unfolded = std::move(unfolded), width, d_in](const Matrix& g) {
                         if (ki->requires_grad) accumulate_grad(*ki, unfolded.transpose() * g);
                         if (!xi->requires_grad) return;
                         const Matrix du = g * ki->value.transpose();
                         Matrix& dx = grad_buffer(*xi);
                         for (Index t = 0; t < du.rows(); ++t)
                             Eigen::Map<RowVector>(dx.data() + t * d_in, width * d_in) += du.row(t);
                     });
}

Tensor max_pool_time(const Tensor& x) {
    if (x.rows() < 1) throw DimensionError("max_pool_time: empty time axis");
    std::vector<Index> arg(static_cast<std::size_t>(x.cols()), 0);
    Matrix v(1, x.cols());
    for (Index c = 0; c < x.cols(); ++c) {
        Index best = 0;
        for (Index r = 1; r < x.rows(); ++r)
            if (x.value()(r, c) > x.value()(best, c)) best = r;
        arg[static_cast<std::size_t>(c)] = best;
        v(0, c) = x.value()(best, c);
    }
    auto xi = x.impl();
    return make_node("max_pool_time", std::move(v), {x}, [xi, arg](const Matrix& g) {
        if (!xi->requires_grad) return;
        Matrix& dx = grad_buffer(*xi);
        for (std::size_t c = 0; c < arg.size(); ++c)
            dx(arg[c], static_cast<Index>(c)) += g(0, static_cast<Index>(c));
    });
}

Tensor embedding(const Tensor& table, const std::vector<Index>& rows) {
    Matrix v(static_cast<Index>(rows.size()), table.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i] < 0 || rows[i] >= table.rows())
            throw DimensionError("embedding: index " + std::to_string(rows[i]) +
                                 " out of range for table " + to_string(table.shape()));
        v.row(static_cast<Index>(i)) = table.value().row(rows[i]);
    }
    auto ti = table.impl();
    return make_node("embedding", std::move(v), {table}, [ti, rows](const Matrix& g) {
        if (!ti->requires_grad) return;
        Matrix& dt = grad_buffer(*ti);
        for (std::size_t i = 0; i < rows.size(); ++i) dt.row(rows[i]) += g.row(static_cast<Index>(i));
    });
}

Tensor concat(const std::vector<Tensor>& parts, Axis axis) {
    if (parts.empty()) throw DimensionError("concat: no inputs");
    Index rows = 0, cols = 0;
    for (const auto& p : parts) {
        if (axis == Axis::Cols) {
            if (p.rows() != parts.front().rows()) shape_error("concat", parts.front().shape(), p.shape());
            cols += p.cols();
        } else {
            if (p.cols() != parts.front().cols()) shape_error("concat", parts.front().shape(), p.shape());
            rows += p.rows();
        }
    }
    if (axis == Axis::Cols) rows = parts.front().rows();
    else cols = parts.front().cols();

    Matrix v(rows, cols);
    std::vector<std::pair<Index, Index>> spans;  // (offset, extent)
    Index offset = 0;
    for (const auto& p : parts) {
        if (axis == Axis::Cols) {
            v.middleCols(offset, p.cols()) = p.value();
            spans.emplace_back(offset, p.cols());
            offset += p.cols();
        } else {
            v.middleRows(offset, p.rows()) = p.value();
            spans.emplace_back(offset, p.rows());
            offset += p.rows();
        }
    }
    std::vector<std::shared_ptr<detail::TensorImpl>> impls;
    for (const auto& p : parts) impls.push_back(p.impl());
    return make_node("concat", std::move(v), parts, [impls, spans, axis](const Matrix& g) {
        for (std::size_t i = 0; i < impls.size(); ++i) {
            if (!impls[i]->requires_grad) continue;
            if (axis == Axis::Cols)
                accumulate_grad(*impls[i], g.middleCols(spans[i].first, spans[i].second));
            else
                accumulate_grad(*impls[i], g.middleRows(spans[i].first, spans[i].second));
        }
    });
}

Tensor slice_rows(const Tensor& x, Index start, Index count) {
    if (start < 0 || count < 0 || start + count > x.rows())
        throw DimensionError("slice_rows: [" + std::to_string(start) + ", +" + std::to_string(count) +
                             ") outside " + to_string(x.shape()));
    auto xi = x.impl();
    return make_node("slice_rows", x.value().middleRows(start, count), {x},
                     [xi, start, count](const Matrix& g) {
                         if (xi->requires_grad) grad_buffer(*xi).middleRows(start, count) += g;
                     });
}

Tensor slice_cols(const Tensor& x, Index start, Index count) {
    if (start < 0 || count < 0 || start + count > x.cols())
        throw DimensionError("slice_cols: [" + std::to_string(start) + ", +" + std::to_string(count) +
                             ") outside " + to_string(x.shape()));
    auto xi = x.impl();
    return make_node("slice_cols", x.value().middleCols(start, count), {x},
                     [xi, start, count](const Matrix& g) {
                         if (xi->requires_grad) grad_buffer(*xi).middleCols(start, count) += g;
                     });
}

Tensor sum(const Tensor& x) {
    auto xi = x.impl();
    return make_node("sum", Matrix::Constant(1, 1, x.value().sum()), {x}, [xi](const Matrix& g) {
        accumulate_grad(*xi, Matrix::Constant(xi->value.rows(), xi->value.cols(), g(0, 0)));
    });
}

Tensor mean(const Tensor& x) {
    if (x.value().size() == 0) throw DimensionError("mean: empty tensor");
    return scale(sum(x), 1.0 / static_cast<Scalar>(x.value().size()));
}

Tensor row_sum(const Tensor& x) {
    auto xi = x.impl();
    return make_node("row_sum", x.value().rowwise().sum(), {x}, [xi](const Matrix& g) {
        accumulate_grad(*xi, g.replicate(1, xi->value.cols()));
    });
}

Tensor row_l2_norm(const Tensor& x) {
    Matrix v = x.value().rowwise().norm();
    auto xi = x.impl();
    return make_node("row_l2_norm", v, {x}, [xi, v](const Matrix& g) {
        Matrix dx = Matrix::Zero(xi->value.rows(), xi->value.cols());
        for (Index r = 0; r < dx.rows(); ++r)
            if (v(r, 0) > 0.0) dx.row(r) = xi->value.row(r) * (g(r, 0) / v(r, 0));
        accumulate_grad(*xi, dx);
    });
}

Tensor row_normalize(const Tensor& x, Scalar eps) {
    const ColVector norms = x.value().rowwise().norm();
    Matrix v = Matrix::Zero(x.rows(), x.cols());
    for (Index r = 0; r < x.rows(); ++r)
        if (norms(r) >= eps) v.row(r) = x.value().row(r) / norms(r);
    auto xi = x.impl();
    return make_node("row_normalize", v, {x}, [xi, v, norms, eps](const Matrix& g) {
        Matrix dx = Matrix::Zero(v.rows(), v.cols());
        for (Index r = 0; r < v.rows(); ++r) {
            if (norms(r) < eps) continue;
            const Scalar proj = v.row(r).dot(g.row(r));
            dx.row(r) = (g.row(r) - v.row(r) * proj) / norms(r);
        }
        accumulate_grad(*xi, dx);
    });
}

Tensor dropout(const Tensor& x, Scalar rate, bool training, std::mt19937_64& rng) {
    if (rate < 0.0 || rate >= 1.0) throw DimensionError("dropout: rate must be in [0, 1)");
    if (!training || rate == 0.0) return x;
    std::uniform_real_distribution<Scalar> unif(0.0, 1.0);
    Matrix keep(x.rows(), x.cols());
    const Scalar inv = 1.0 / (1.0 - rate);
    for (Index i = 0; i < keep.size(); ++i) keep.data()[i] = unif(rng) >= rate ? inv : 0.0;
    auto xi = x.impl();
    return make_node("dropout", x.value().cwiseProduct(keep), {x}, [xi, keep](const Matrix& g) {
        accumulate_grad(*xi, g.cwiseProduct(keep));
    });
}

}  // namespace necho
