#include "necho/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace necho {

namespace {

Scalar evaluate(const std::function<Tensor()>& f, const std::string& name, Index coord) {
    Scalar v = 0.0;
    try {
        v = f().item();
    } catch (const NumericError& e) {
        throw NumericError("grad_check: " + std::string(e.what()) + " while perturbing " + name + "[" +
                           std::to_string(coord) + "]");
    }
    if (!std::isfinite(v))
        throw NumericError("grad_check: non-finite loss while perturbing " + name + "[" +
                           std::to_string(coord) + "]");
    return v;
}

}  // namespace

GradCheckReport grad_check(const std::function<Tensor()>& f,
                           const std::vector<std::pair<std::string, Tensor>>& inputs,
                           const GradCheckOptions& options) {
    if (!(options.step > 0.0) || !(options.tolerance > 0.0))
        throw ConfigError("grad_check: step and tolerance must be positive");

    std::vector<bool> previous;
    for (const auto& [_, t] : inputs) {
        Tensor copy = t;
        previous.push_back(copy.requires_grad());
        copy.set_requires_grad(true);
        copy.zero_grad();
    }

    std::vector<Matrix> analytic;
    {
        Tape tape;
        TapeScope scope(tape);
        const Tensor loss = f();
        if (!std::isfinite(loss.item())) throw NumericError("grad_check: non-finite loss at base point");
        tape.backward(loss);
    }
    for (const auto& [name, t] : inputs) {
        analytic.push_back(t.grad());
        if (!all_finite(analytic.back()))
            throw NumericError("grad_check: non-finite analytic gradient for " + name);
    }

    GradCheckReport report;
    std::mt19937_64 rng(options.seed);
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        Tensor t = inputs[i].second;
        const Index n = t.value().size();
        std::vector<Index> coords(static_cast<std::size_t>(n));
        std::iota(coords.begin(), coords.end(), Index{0});
        if (options.max_coords_per_input != 0 && coords.size() > options.max_coords_per_input) {
            std::shuffle(coords.begin(), coords.end(), rng);
            coords.resize(options.max_coords_per_input);
        }
        for (const Index c : coords) {
            Scalar& x = t.mutable_value().data()[c];
            const Scalar saved = x;
            x = saved + options.step;
            const Scalar fp = evaluate(f, inputs[i].first, c);
            x = saved - options.step;
            const Scalar fm = evaluate(f, inputs[i].first, c);
            x = saved;
            const Scalar numeric = (fp - fm) / (2.0 * options.step);
            const Scalar a = analytic[i].data()[c];
            const Scalar denom = std::max({std::abs(a), std::abs(numeric), options.floor});
            const Scalar rel = std::abs(a - numeric) / denom;
            ++report.coords_checked;
            if (rel > report.max_rel_error || report.worst_index < 0) {
                report.max_rel_error = std::max(rel, report.max_rel_error);
                report.worst_input = inputs[i].first;
                report.worst_index = c;
                report.worst_analytic = a;
                report.worst_numeric = numeric;
            }
        }
    }
    report.passed = report.max_rel_error <= options.tolerance;

    for (std::size_t i = 0; i < inputs.size(); ++i) {
        Tensor copy = inputs[i].second;
        copy.zero_grad();
        copy.set_requires_grad(previous[i]);
    }
    return report;
}

GradCheckReport grad_check(const std::function<Tensor()>& f, const std::vector<Tensor>& inputs,
                           const GradCheckOptions& options) {
    std::vector<std::pair<std::string, Tensor>> named;
    for (std::size_t i = 0; i < inputs.size(); ++i)
        named.emplace_back("input" + std::to_string(i), inputs[i]);
    return grad_check(f, named, options);
}

GradCheckReport grad_check(const std::function<Tensor()>& f, const ParameterSet& params,
                           const GradCheckOptions& options) {
    return grad_check(f, params.entries(), options);
}

}  // namespace necho
