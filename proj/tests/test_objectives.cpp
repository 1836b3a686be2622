#include <doctest.h>

#include <cmath>
#include <cstring>
#include <limits>
#include <random>

#include <json.hpp>

#include "necho/diagnostics.hpp"
#include "necho/gradcheck.hpp"
#include "necho/objectives.hpp"

using namespace necho;

namespace {

Matrix random_matrix(std::mt19937_64& rng, Index r, Index c) {
    std::normal_distribution<Scalar> n(0.0, 1.0);
    Matrix m(r, c);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
    return m;
}

Matrix random_targets(std::mt19937_64& rng, Index r, Index c) {
    std::bernoulli_distribution b(0.3);
    Matrix m(r, c);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = b(rng) ? 1.0 : 0.0;
    return m;
}

struct WarningCapture {
    std::vector<std::string> seen;
    WarningHandler previous;
    WarningCapture() {
        previous = set_warning_handler([this](const std::string& m) { seen.push_back(m); });
    }
    ~WarningCapture() { set_warning_handler(previous); }
};

bool bit_equal(const Matrix& a, const Matrix& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() &&
           std::memcmp(a.data(), b.data(), sizeof(Scalar) * static_cast<std::size_t>(a.size())) == 0;
}

}  // namespace

TEST_CASE("cross-entropy at one half is |C| ln 2 per visit") {
    const Matrix mask = (Matrix(2, 3) << 1, 1, 0, 1, 0, 0).finished();
    std::mt19937_64 rng(1);
    const Matrix y = random_targets(rng, 6, 7);
    const Scalar loss = multilabel_ce(Tensor(Matrix::Constant(6, 7, 0.5)), y, mask).item();
    CHECK(std::abs(loss - 7.0 * std::log(2.0)) <= 1e-12);
}

TEST_CASE("perfect prediction has near-zero cross-entropy") {
    std::mt19937_64 rng(2);
    const Matrix y = random_targets(rng, 4, 5);
    const Scalar loss = multilabel_ce(Tensor(y), y, Matrix::Ones(2, 2)).item();
    CHECK(loss >= 0.0);
    CHECK(loss <= 1e-10);
}

TEST_CASE("cross-entropy averages visits within a patient, then patients") {
    // Patient 0 has one visit with loss a, patient 1 two visits with losses b and c.
    Matrix p = Matrix::Constant(4, 1, 0.5);
    p(0, 0) = 0.9;
    p(2, 0) = 0.2;
    p(3, 0) = 0.6;
    const Matrix y = Matrix::Ones(4, 1);
    const Matrix mask = (Matrix(2, 2) << 1, 0, 1, 1).finished();
    const Scalar a = -std::log(0.9), b = -std::log(0.2), c = -std::log(0.6);
    const Scalar expected = 0.5 * (a + 0.5 * (b + c));
    CHECK(std::abs(multilabel_ce(Tensor(p), y, mask).item() - expected) <= 1e-14);
}

TEST_CASE("masked visits contribute nothing") {
    std::mt19937_64 rng(3);
    const Matrix y = random_targets(rng, 4, 3);
    Matrix p = Matrix::Constant(4, 3, 0.3);
    const Matrix mask = (Matrix(2, 2) << 1, 0, 1, 0).finished();
    const Scalar base = multilabel_ce(Tensor(p), y, mask).item();
    p.row(1).setConstant(1e-9);
    p.row(3).setConstant(0.999);
    CHECK(multilabel_ce(Tensor(p), y, mask).item() == base);
}

TEST_CASE("a fully masked batch yields zero and a warning") {
    WarningCapture cap;
    const Scalar loss = multilabel_ce(Tensor(Matrix::Constant(4, 3, 0.3)), Matrix::Ones(4, 3), Matrix::Zero(2, 2)).item();
    CHECK(loss == 0.0);
    REQUIRE(cap.seen.size() == 1);
    CHECK(cap.seen[0].find("masked") != std::string::npos);
}

TEST_CASE("cross-entropy rejects mismatched shapes and non-finite input") {
    CHECK_THROWS_AS(multilabel_ce(Tensor(Matrix::Zero(2, 3)), Matrix::Zero(2, 4), Matrix::Ones(1, 2)), DimensionError);
    CHECK_THROWS_AS(multilabel_ce(Tensor(Matrix::Zero(2, 3)), Matrix::Zero(2, 3), Matrix::Ones(1, 3)), DimensionError);
    Matrix p = Matrix::Constant(2, 3, 0.5);
    p(1, 1) = std::nan("");
    CHECK_THROWS_AS(multilabel_ce(Tensor(p), Matrix::Zero(2, 3), Matrix::Ones(1, 2)), NumericError);
}

TEST_CASE("cross-entropy survives exact zeros and ones") {
    const Matrix p = (Matrix(1, 2) << 0.0, 1.0).finished();
    const Matrix y = (Matrix(1, 2) << 1.0, 0.0).finished();
    const Scalar loss = multilabel_ce(Tensor(p), y, Matrix::Ones(1, 1)).item();
    CHECK(std::isfinite(loss));
    const Scalar upper = 1.0 - kProbabilityClamp;
    CHECK(std::abs(loss + std::log(kProbabilityClamp) + std::log(1.0 - upper)) <= 1e-9);
}

TEST_CASE("contrastive loss of two orthogonal matched pairs") {
    const Matrix x = Matrix::Identity(2, 2);
    const Scalar loss = bimodal_contrastive(Tensor(x), Tensor(x), 0.1, 0.25).item();
    const Scalar oracle = -std::log(std::exp(10.0) / (std::exp(10.0) + 1.0));
    CHECK(std::abs(loss - oracle) <= 1e-15);
    CHECK(std::abs(loss - 4.5398899e-5) <= 1e-12);
}

TEST_CASE("contrastive loss with one patient is exactly zero") {
    std::mt19937_64 rng(4);
    for (int i = 0; i < 5; ++i) {
        const Matrix a = random_matrix(rng, 1, 6), b = random_matrix(rng, 1, 6);
        CHECK(bimodal_contrastive(Tensor(a), Tensor(b), 0.1, 0.25).item() == 0.0);
    }
    CHECK(bimodal_contrastive(Tensor(Matrix::Ones(1, 3)), Tensor(Matrix::Ones(1, 3)), 0.1, 0.25).item() == 0.0);
}

TEST_CASE("contrastive loss is invariant to rescaling") {
    std::mt19937_64 rng(5);
    const Matrix a = random_matrix(rng, 5, 8), b = random_matrix(rng, 5, 8);
    const Scalar base = bimodal_contrastive(Tensor(a), Tensor(b), 0.1, 0.25).item();
    const Scalar scaled = bimodal_contrastive(Tensor(Matrix(3.7 * a)), Tensor(Matrix(3.7 * b)), 0.1, 0.25).item();
    CHECK(std::abs(base - scaled) <= 1e-10);
}

TEST_CASE("contrastive loss is invariant to a common patient permutation") {
    std::mt19937_64 rng(6);
    const Matrix a = random_matrix(rng, 4, 3), b = random_matrix(rng, 4, 3);
    Eigen::PermutationMatrix<Eigen::Dynamic> perm(4);
    perm.indices() << 2, 0, 3, 1;
    const Scalar base = bimodal_contrastive(Tensor(a), Tensor(b), 0.1, 0.25).item();
    const Scalar permuted = bimodal_contrastive(Tensor(Matrix(perm * a)), Tensor(Matrix(perm * b)), 0.1, 0.25).item();
    CHECK(std::abs(base - permuted) <= 1e-12);
}

TEST_CASE("contrastive directions are weighted by alpha") {
    std::mt19937_64 rng(7);
    const Matrix a = random_matrix(rng, 3, 4), b = random_matrix(rng, 3, 4);
    const Scalar fwd = bimodal_contrastive(Tensor(a), Tensor(b), 0.1, 1.0).item();
    const Scalar bwd = bimodal_contrastive(Tensor(a), Tensor(b), 0.1, 0.0).item();
    CHECK(std::abs(bimodal_contrastive(Tensor(a), Tensor(b), 0.1, 0.25).item() - (0.25 * fwd + 0.75 * bwd)) <= 1e-12);
    CHECK(std::abs(bimodal_contrastive(Tensor(b), Tensor(a), 0.1, 1.0).item() - bwd) <= 1e-12);
}

TEST_CASE("zero-norm rows have zero similarity") {
    Matrix a = Matrix::Identity(2, 2);
    a.row(1).setZero();
    const Scalar loss = bimodal_contrastive(Tensor(a), Tensor(Matrix(Matrix::Identity(2, 2))), 0.1, 0.5).item();
    CHECK(std::isfinite(loss));
    // Row 1 of the first modality scores 0 against both candidates: log 2 in that direction.
    const Scalar pair0 = std::log1p(std::exp(-10.0));
    const Scalar fwd = 0.5 * (pair0 + std::log(2.0));
    // Column view: patient 0 sees (10, 0), patient 1 sees (0, 0).
    const Scalar bwd = 0.5 * (pair0 + std::log(2.0));
    CHECK(std::abs(loss - (0.5 * fwd + 0.5 * bwd)) <= 1e-12);
}

TEST_CASE("contrastive total is the sum of its pairs") {
    std::mt19937_64 rng(8);
    const Tensor c(random_matrix(rng, 3, 4)), d(random_matrix(rng, 3, 4)), n(random_matrix(rng, 3, 4));
    const Scalar total = contrastive_total(c, d, n, 0.1, 0.25).item();
    const Scalar pairs = bimodal_contrastive(c, d, 0.1, 0.25).item() + bimodal_contrastive(c, n, 0.1, 0.25).item();
    CHECK(total == pairs);
    CHECK(contrastive_total(c, n, d, 0.1, 0.25).item() == bimodal_contrastive(c, n, 0.1, 0.25).item() +
                                                               bimodal_contrastive(c, d, 0.1, 0.25).item());
    const Tensor x(Matrix(Matrix::Identity(1, 4)));
    CHECK(contrastive_total(x, x, x, 0.1, 0.25).item() == 0.0);
}

TEST_CASE("patient pooling") {
    const Matrix mask = (Matrix(3, 2) << 1, 1, 0, 0, 1, 0).finished();
    const Matrix mean = pooling_matrix(mask, PatientPooling::Mean);
    CHECK(mean.rows() == 2);
    CHECK(mean.row(0) == (Matrix(1, 6) << 0.5, 0.5, 0, 0, 0, 0).finished());
    CHECK(mean.row(1) == (Matrix(1, 6) << 0, 0, 0, 0, 1, 0).finished());
    const Matrix last = pooling_matrix(mask, PatientPooling::LastVisit);
    CHECK(last.row(0) == (Matrix(1, 6) << 0, 1, 0, 0, 0, 0).finished());
    CHECK(parse_pooling("last_visit") == PatientPooling::LastVisit);
    CHECK(to_string(parse_pooling("mean")) == "mean");
    CHECK_THROWS_AS(parse_pooling("max"), ConfigError);
}

TEST_CASE("hierarchical loss closed forms and additivity") {
    std::mt19937_64 rng(9);
    const Matrix o = random_targets(rng, 4, 5);
    const Matrix mask = Matrix::Ones(2, 2);
    const Tensor half(Matrix::Constant(4, 5, 0.5));
    const Scalar l = hierarchical_loss({half, half, half}, o, mask).item();
    CHECK(std::abs(l - 3.0 * 5.0 * std::log(2.0)) <= 1e-12);
    CHECK(hierarchical_loss({Tensor(o), Tensor(o), Tensor(o)}, o, mask).item() <= 1e-10);

    const Tensor a(Matrix((0.1 + 0.8 * o.array()).matrix()));
    const Tensor b(Matrix::Constant(4, 5, 0.3));
    const Tensor c(Matrix((0.6 - 0.2 * o.array()).matrix()));
    const Scalar total = hierarchical_loss({a, b, c}, o, mask).item();
    const Scalar sum = multilabel_ce(a, o, mask).item() + multilabel_ce(b, o, mask).item() +
                       multilabel_ce(c, o, mask).item();
    CHECK(total == sum);
}

TEST_CASE("hierarchical loss falls as heads move toward the true parents") {
    const Matrix o = (Matrix(2, 3) << 1, 0, 0, 0, 1, 1).finished();
    const Matrix mask = Matrix::Ones(1, 2);
    Scalar previous = std::numeric_limits<Scalar>::infinity();
    for (const Scalar step : {0.0, 0.1, 0.2, 0.3, 0.4}) {
        const Tensor p(Matrix((0.5 + step * (2.0 * o.array() - 1.0)).matrix()));
        const Scalar l = hierarchical_loss({p, p, p}, o, mask).item();
        CHECK(l < previous);
        previous = l;
    }
}

TEST_CASE("total loss weights") {
    LossParts parts{Tensor::scalar(2.0), Tensor::scalar(0.5), Tensor::scalar(1.0)};
    CHECK(std::abs(total_loss(parts, LossWeights{}).item() - 2.6) <= 1e-15);
    LossWeights ce_only;
    ce_only.bi_con = 0.0;
    ce_only.hrchy = 0.0;
    const Tensor t = total_loss(parts, ce_only);
    CHECK(t.same_storage(parts.ce));
    // Terms with zero weight may be absent.
    CHECK(total_loss(LossParts{parts.ce, {}, {}}, ce_only).item() == 2.0);
    LossWeights none = ce_only;
    none.ce = 0.0;
    CHECK(total_loss(parts, none).item() == 0.0);
    LossWeights negative;
    negative.hrchy = -0.1;
    CHECK_THROWS_AS(total_loss(parts, negative), ConfigError);
    CHECK_THROWS_AS(total_loss(LossParts{parts.ce, {}, parts.hrchy}, LossWeights{}), ConfigError);
}

TEST_CASE("gradient of the total is the weighted sum of part gradients") {
    std::mt19937_64 rng(10);
    const Tensor logits(random_matrix(rng, 4, 3), true);
    const Tensor code(random_matrix(rng, 2, 3), true), demo(random_matrix(rng, 2, 3), true),
        note(random_matrix(rng, 2, 3), true);
    const Matrix y = random_targets(rng, 4, 3);
    const Matrix mask = Matrix::Ones(2, 2);
    const Matrix o = random_targets(rng, 4, 3);
    const auto parts = [&] {
        const Tensor p = sigmoid(logits);
        return LossParts{multilabel_ce(p, y, mask), contrastive_total(code, demo, note, 0.1, 0.25),
                         hierarchical_loss({p, sigmoid(scale(logits, 0.5)), p}, o, mask)};
    };
    const std::vector<Tensor> inputs = {logits, code, demo, note};
    const auto grads_of = [&](int which, const LossWeights& w) {
        for (Tensor t : inputs) t.zero_grad();
        Tape tape;
        {
            TapeScope scope(tape);
            const LossParts lp = parts();
            const Tensor target = which == 0 ? lp.ce : which == 1 ? lp.bi_con : which == 2 ? lp.hrchy : total_loss(lp, w);
            tape.backward(target);
        }
        std::vector<Matrix> g;
        for (const Tensor& t : inputs) g.push_back(t.grad());
        return g;
    };
    LossWeights w;
    w.ce = 0.7;
    w.bi_con = 1.3;
    w.hrchy = 0.1;
    const auto gc = grads_of(0, w), gb = grads_of(1, w), gh = grads_of(2, w), gt = grads_of(3, w);
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        const Matrix expected = w.ce * gc[i] + w.bi_con * gb[i] + w.hrchy * gh[i];
        CHECK((gt[i] - expected).cwiseAbs().maxCoeff() <= 1e-12);
    }

    for (const Scalar lambda : {0.01, 0.1, 1.0}) {
        w.hrchy = lambda;
        const auto r = grad_check([&] { return total_loss(parts(), w); }, inputs);
        CHECK_MESSAGE(r.passed, "lambda " << lambda << " rel " << r.max_rel_error);
    }
}

TEST_CASE("zero-weight terms leave the gradient bitwise equal to the cross-entropy gradient") {
    std::mt19937_64 rng(11);
    const Tensor logits(random_matrix(rng, 4, 3), true);
    const Tensor code(random_matrix(rng, 2, 3), true);
    const Matrix y = random_targets(rng, 4, 3);
    const Matrix mask = Matrix::Ones(2, 2);
    const auto run = [&](bool through_total) {
        Tensor(logits).zero_grad();
        Tape tape;
        {
            TapeScope scope(tape);
            const Tensor ce = multilabel_ce(sigmoid(logits), y, mask);
            if (!through_total) {
                tape.backward(ce);
            } else {
                LossWeights w;
                w.bi_con = 0.0;
                w.hrchy = 0.0;
                tape.backward(total_loss({ce, {}, {}}, w));
            }
        }
        return logits.grad();
    };
    CHECK(bit_equal(run(false), run(true)));
}

TEST_CASE("loss log line has a fixed key order and nulls for absent terms") {
    const LossParts parts{Tensor::scalar(1.5), {}, Tensor::scalar(0.25)};
    const std::string line = loss_json_line(7, parts, Tensor::scalar(1.525));
    CHECK(line == R"({"step":7,"L_ce":1.5,"L_bi_con":null,"L_hrchy":0.25,"L_total":1.525})");
}
