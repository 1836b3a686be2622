#include <doctest.h>

#include <cmath>
#include <random>

#include "necho/fusion.hpp"
#include "necho/gradcheck.hpp"
#include "necho/model.hpp"
#include "necho/toy.hpp"

using namespace necho;

namespace {

void set(Tensor t, const Matrix& v) { t.mutable_value() = v; }

AttentionParams identity_attention(ParameterSet& ps, Index d, Index heads) {
    Initializer init(1);
    AttentionParams p(ps, "attn", d, heads, init);
    for (Linear* l : {&p.wq, &p.wk, &p.wv, &p.wo}) {
        set(l->weight, Matrix::Identity(d, d));
        set(l->bias, Matrix::Zero(1, d));
    }
    return p;
}

ModelConfig mag_config(Index d) {
    ModelConfig cfg;
    cfg.d_model = d;
    return cfg;
}

// Gate constant 1 and displacement equal to its bias.
MagParams fixed_mag(ParameterSet& ps, const RowVector& displacement, Scalar beta) {
    Initializer init(2);
    const Index d = displacement.cols();
    MagParams p(ps, "mag", mag_config(d), init);
    set(p.gate.weight, Matrix::Zero(3 * d, 1));
    set(p.gate.bias, Matrix::Ones(1, 1));
    set(p.displacement.weight, Matrix::Zero(2 * d, d));
    set(p.displacement.bias, displacement);
    set(p.beta, Matrix::Constant(1, 1, beta));
    return p;
}

Matrix row(std::initializer_list<Scalar> v) {
    Matrix m(1, static_cast<Index>(v.size()));
    Index i = 0;
    for (const Scalar x : v) m(0, i++) = x;
    return m;
}

Scalar max_abs_diff(const Matrix& a, const Matrix& b) { return (a - b).cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("attention mask is block diagonal, causal and limited to target visits") {
    Matrix valid(2, 3);
    valid << 1, 1, 0,
             1, 0, 0;
    const Matrix causal = attention_mask(2, 3, valid, true);
    CHECK(causal.rows() == 6);
    CHECK(causal.row(0) == row({1, 0, 0, 0, 0, 0}));
    CHECK(causal.row(1) == row({1, 1, 0, 0, 0, 0}));
    CHECK(causal.row(2) == row({1, 1, 0, 0, 0, 0}));
    CHECK(causal.row(3) == row({0, 0, 0, 1, 0, 0}));
    CHECK(causal.row(4) == row({0, 0, 0, 1, 0, 0}));
    const Matrix full = attention_mask(2, 3, valid, false);
    CHECK(full.row(0) == row({1, 1, 0, 0, 0, 0}));
    // A patient with no target visit attends to itself only.
    const Matrix lone = attention_mask(1, 2, Matrix::Zero(1, 2), true);
    CHECK(lone == Matrix::Identity(2, 2));
    CHECK_THROWS_AS(attention_mask(2, 2, valid, true), DimensionError);
}

TEST_CASE("attention over a single key returns the projected value") {
    ParameterSet ps;
    Initializer init(4);
    AttentionParams p(ps, "attn", 4, 2, init);
    randomize_parameters(ps, 5);
    const Tensor q(row({0.3, -1.0, 2.0, 0.5}));
    const Tensor kv(row({1.0, 0.0, -0.5, 4.0}));
    const Matrix out = cross_modal_attention(q, kv, p, Matrix::Ones(1, 1)).value();
    const Matrix v = kv.value() * p.wv.weight.value() + p.wv.bias.value();
    const Matrix oracle = v * p.wo.weight.value() + p.wo.bias.value();
    CHECK(max_abs_diff(out, oracle) <= 1e-12);
}

TEST_CASE("identical keys receive uniform attention") {
    ParameterSet ps;
    const AttentionParams p = identity_attention(ps, 2, 1);
    Matrix kv(3, 2);
    kv << 1, 2, 1, 2, 1, 2;
    AttentionTrace trace;
    cross_modal_attention(Tensor(row({5.0, -3.0})), Tensor(kv), p, Matrix::Ones(1, 3), &trace);
    REQUIRE(trace.weights.size() == 1);
    for (Index j = 0; j < 3; ++j) CHECK(std::abs(trace.weights[0](0, j) - 1.0 / 3.0) <= 1e-15);
}

TEST_CASE("two-key attention matches the hand-computed softmax") {
    ParameterSet ps;
    const AttentionParams p = identity_attention(ps, 1, 1);
    Matrix kv(2, 1);
    kv << 0.0, 1.0;
    AttentionTrace trace;
    const Matrix out = cross_modal_attention(Tensor(row({1.0})), Tensor(kv), p, Matrix::Ones(1, 2), &trace).value();
    const Scalar e = std::exp(1.0);
    CHECK(std::abs(trace.weights[0](0, 0) - 1.0 / (1.0 + e)) <= 1e-15);
    CHECK(std::abs(out(0, 0) - e / (1.0 + e)) <= 1e-15);
    CHECK(std::abs(out(0, 0) - 0.7310585786300049) <= 1e-12);
}

TEST_CASE("attention weights are row stochastic and respect the mask") {
    ParameterSet ps;
    Initializer init(6);
    AttentionParams p(ps, "attn", 6, 3, init);
    randomize_parameters(ps, 7);
    std::mt19937_64 rng(8);
    std::normal_distribution<Scalar> n(0.0, 1.0);
    Matrix x(6, 6);
    for (Index i = 0; i < x.size(); ++i) x.data()[i] = n(rng);
    Matrix valid(2, 3);
    valid << 1, 1, 0, 1, 1, 1;
    const Matrix allowed = attention_mask(2, 3, valid, true);
    AttentionTrace trace;
    cross_modal_attention(Tensor(x), Tensor(x), p, allowed, &trace);
    REQUIRE(trace.weights.size() == 3);
    for (const Matrix& w : trace.weights) {
        for (Index r = 0; r < w.rows(); ++r) CHECK(std::abs(w.row(r).sum() - 1.0) <= 1e-12);
        CHECK((w.array() * (1.0 - allowed.array())).abs().maxCoeff() == 0.0);
        CHECK(w.minCoeff() >= 0.0);
    }
}

TEST_CASE("cross-modal attention rejects mismatched widths") {
    ParameterSet ps;
    const AttentionParams p = identity_attention(ps, 2, 1);
    CHECK_THROWS_AS(cross_modal_attention(Tensor(Matrix::Zero(1, 2)), Tensor(Matrix::Zero(1, 3)), p, Matrix::Ones(1, 1)),
                    DimensionError);
}

TEST_CASE("adaptation gate scale: regular case") {
    ParameterSet ps;
    const MagParams p = fixed_mag(ps, row({1.0, 0.0}), 0.25);
    MagTrace trace;
    const Tensor code(row({2.0, 0.0}));
    mag_fuse(code, Tensor(row({0.3, 0.1})), Tensor(row({-0.2, 0.4})), p, {}, &trace);
    // |yc| / |H| * beta = 2 / 1 * 0.25
    CHECK(std::abs(trace.alpha(0, 0) - 0.5) <= 1e-15);
    CHECK(max_abs_diff(trace.pre_norm, row({2.5, 0.0})) <= 1e-15);
}

TEST_CASE("adaptation gate scale: clamped at one") {
    ParameterSet ps;
    const MagParams boundary = fixed_mag(ps, row({1.0, 0.0}), 0.5);
    MagTrace trace;
    mag_fuse(Tensor(row({2.0, 0.0})), Tensor(row({1.0, 1.0})), Tensor(row({1.0, 1.0})), boundary, {}, &trace);
    CHECK(trace.alpha(0, 0) == 1.0);
    ParameterSet ps2;
    const MagParams large = fixed_mag(ps2, row({1.0, 0.0}), 3.0);
    mag_fuse(Tensor(row({2.0, 0.0})), Tensor(row({1.0, 1.0})), Tensor(row({1.0, 1.0})), large, {}, &trace);
    CHECK(trace.alpha(0, 0) == 1.0);
    CHECK(max_abs_diff(trace.pre_norm, row({3.0, 0.0})) == 0.0);
}

TEST_CASE("adaptation gate scale: vanishing displacement is guarded") {
    ParameterSet ps;
    const MagParams p = fixed_mag(ps, row({0.0, 0.0}), 0.7);
    MagTrace trace;
    const Tensor code(row({1.5, -0.5}), true);
    Tape tape;
    {
        TapeScope scope(tape);
        const Tensor out = mag_fuse(code, Tensor(row({1.0, 2.0})), Tensor(row({3.0, 4.0})), p, {}, &trace);
        tape.backward(sum(mul(out, Tensor(row({1.0, 0.3})))));
    }
    CHECK(trace.alpha(0, 0) == 0.0);
    CHECK(trace.pre_norm == code.value());
    CHECK(all_finite(code.grad()));
    CHECK(all_finite(p.beta.grad()));
    CHECK(p.beta.grad()(0, 0) == 0.0);
}

TEST_CASE("adaptation gate gradients agree with finite differences") {
    ParameterSet ps;
    Initializer init(9);
    MagParams p(ps, "mag", mag_config(4), init);
    randomize_parameters(ps, 10);
    std::mt19937_64 rng(11);
    std::normal_distribution<Scalar> n(0.0, 1.0);
    auto randm = [&](Index r, Index c) {
        Matrix m(r, c);
        for (Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
        return m;
    };
    const Tensor yc(randm(3, 4), true), ych(randm(3, 4), true), ycw(randm(3, 4), true);
    const Tensor probe(randm(3, 4));
    std::vector<std::pair<std::string, Tensor>> inputs = {{"yc", yc}, {"ych", ych}, {"ycw", ycw}};
    for (const auto& e : ps.entries()) inputs.push_back(e);
    // A large beta keeps every row clamped, a small one keeps every row free.
    for (const Scalar beta : {0.05, 50.0}) {
        p.beta.mutable_value()(0, 0) = beta;
        const auto f = [&] { return sum(mul(mag_fuse(yc, ych, ycw, p, {}), probe)); };
        const auto r = grad_check(f, inputs);
        CHECK_MESSAGE(r.passed, r.worst_input << "[" << r.worst_index << "] rel " << r.max_rel_error);
    }
}

TEST_CASE("code residual adds the projected code stream") {
    const Tensor a(row({1.0, 2.0})), b(row({-0.5, 4.0}));
    CHECK(code_residual(a, b).value() == row({0.5, 6.0}));
}

TEST_CASE("prediction head is a sigmoid over the leaf space") {
    ParameterSet ps;
    Initializer init(1);
    Linear head(ps, "head", 2, 3, init);
    set(head.weight, Matrix::Zero(2, 3));
    set(head.bias, row({0.0, 20.0, -20.0}));
    const Matrix p = predict(Tensor(row({1.0, 1.0})), head).value();
    CHECK(p(0, 0) == 0.5);
    CHECK(std::abs(p(0, 1) - 1.0) <= 1e-6);
    CHECK(p(0, 2) <= 1e-6);
}

TEST_CASE("width-one projector with identity kernel is the identity") {
    ParameterSet ps;
    Initializer init(1);
    Conv1d proj(ps, "proj", 1, 3, 3, init);
    set(proj.kernels, Matrix::Identity(3, 3));
    const Matrix x = (Matrix(2, 3) << 1, 2, 3, -4, 5, -6).finished();
    CHECK(proj(Tensor(x)).value() == x);
}

TEST_CASE("model parameter layout follows the ablation switches") {
    const ToyProblem toy = make_toy_problem(0);
    NechoModel full(toy.model, {}, 1);
    CHECK(full.parameters().contains("fusion.cmt_h.layer0.attn.wq.weight"));
    CHECK(full.parameters().contains("fusion.sa_note.ln_final.gain"));
    CHECK(full.parameters().contains("fusion.mag.beta"));
    CHECK(full.parameters().contains("projector.demo.kernels"));

    Ablations a;
    a.enable("no_transformers");
    NechoModel bare(toy.model, a, 1);
    CHECK(!bare.parameters().contains("fusion.cmt_h.layer0.attn.wq.weight"));
    CHECK(!bare.cmt(Modality::Demo).has_value());

    Ablations c;
    c.enable("no_mag");
    NechoModel concat_model(toy.model, c, 1);
    CHECK(concat_model.parameters().contains("fusion.concat.weight"));
    CHECK(!concat_model.parameters().contains("fusion.mag.beta"));

    Ablations all;
    all.drop_code = all.drop_demo = all.drop_note = true;
    CHECK_THROWS_AS(NechoModel(toy.model, all, 1), ConfigError);
    CHECK_THROWS_AS(a.enable("no_such_switch"), ConfigError);
}

TEST_CASE("forward pass shapes, masks and probability range") {
    const ToyProblem toy = make_toy_problem(1);
    NechoModel model(toy.model, {}, 2);
    randomize_parameters(model.parameters(), 3);
    const auto out = model.forward(toy.batch, {});
    CHECK(out.probabilities.shape() == Shape{9, 6});
    for (std::size_t m = 0; m < 3; ++m) {
        CHECK(out.parent_probabilities[m].shape() == Shape{9, 2});
        for (Index r = 0; r < 9; ++r)
            if (out.row_mask(r, 0) == 0.0) CHECK(out.projected[m].value().row(r).cwiseAbs().maxCoeff() == 0.0);
    }
    CHECK(out.probabilities.value().minCoeff() > 0.0);
    CHECK(out.probabilities.value().maxCoeff() < 1.0);
    CHECK(out.mag.alpha.minCoeff() >= 0.0);
    CHECK(out.mag.alpha.maxCoeff() <= 1.0);
}

TEST_CASE("a dropped modality contributes a zero stream") {
    const ToyProblem toy = make_toy_problem(2);
    Ablations a;
    a.enable("drop_note");
    NechoModel model(toy.model, a, 2);
    randomize_parameters(model.parameters(), 4);
    const auto out = model.forward(toy.batch, {});
    CHECK(out.projected[2].value().cwiseAbs().maxCoeff() == 0.0);
    Batch other = toy.batch;
    other.notes.setConstant(3);
    const auto out2 = model.forward(other, {});
    CHECK(out.probabilities.value() == out2.probabilities.value());
}

TEST_CASE("with the fusion stack zeroed the prediction depends on codes only") {
    const ToyProblem toy = make_toy_problem(3);
    NechoModel model(toy.model, {}, 5);
    randomize_parameters(model.parameters(), 6);
    for (const auto& [name, t] : model.parameters().entries()) {
        const bool zero = name.starts_with("fusion.cmt_") || name.starts_with("fusion.sa_") ||
                          name.starts_with("fusion.mag.gate") || name.starts_with("fusion.mag.displacement");
        if (zero) Tensor(t).mutable_value().setZero();
    }
    const auto base = model.forward(toy.batch, {});
    Batch perturbed = toy.batch;
    for (Index r = 0; r < perturbed.rows(); ++r) {
        perturbed.demographics(r, 0) = (perturbed.demographics(r, 0) + 17) % kDemographicCardinality[0];
        perturbed.demographics(r, 4) = (perturbed.demographics(r, 4) + 5) % kDemographicCardinality[4];
        for (Index j = 0; j < perturbed.notes.cols(); ++j)
            if (perturbed.notes(r, j) != kPadToken) perturbed.notes(r, j) = 1 + (perturbed.notes(r, j) % 9);
    }
    const auto out = model.forward(perturbed, {});
    CHECK(out.encoded[1].value() != base.encoded[1].value());
    CHECK(out.probabilities.value() == base.probabilities.value());
    CHECK(base.mag.alpha.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("predictions never depend on later visits") {
    const ToyProblem toy = make_toy_problem(4);
    NechoModel model(toy.model, {}, 7);
    randomize_parameters(model.parameters(), 8);
    const auto base = model.forward(toy.batch, {});
    // Rewrite patient 0's visits 1 and 2 entirely.
    Batch b = toy.batch;
    for (Index t = 1; t < 3; ++t) {
        const Index r = b.row(0, t);
        b.codes.row(r) = (Matrix::Ones(1, 6) - b.codes.row(r)).eval();
        b.demographics.row(r).setConstant(1);
        for (Index j = 0; j < b.notes.cols(); ++j) b.notes(r, j) = j < b.note_lengths[static_cast<std::size_t>(r)] ? 9 : 0;
    }
    const auto out = model.forward(b, {});
    const Index r0 = b.row(0, 0);
    CHECK(out.probabilities.value().row(r0) == base.probabilities.value().row(r0));
    CHECK(out.probabilities.value().row(b.row(0, 1)) != base.probabilities.value().row(b.row(0, 1)));
    // Other patients are untouched.
    for (Index t = 0; t < 3; ++t)
        CHECK(out.probabilities.value().row(b.row(2, t)) == base.probabilities.value().row(b.row(2, t)));
}

TEST_CASE("full model gradient check at a random parameter point") {
    for (const std::string& ablation : {std::string(), std::string("no_mag"), std::string("no_transformers"),
                                        std::string("no_code_centring"), std::string("drop_demo")}) {
        CAPTURE(ablation);
        const ToyProblem toy = make_toy_problem(5);
        Ablations a;
        if (!ablation.empty()) a.enable(ablation);
        NechoModel model(toy.model, a, 5);
        randomize_parameters(model.parameters(), 6);
        const auto r = gradcheck_model(model, toy.batch, LossWeights{});
        CHECK_MESSAGE(r.passed, r.worst_input << "[" << r.worst_index << "] rel " << r.max_rel_error);
    }
}
