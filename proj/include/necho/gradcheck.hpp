#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "necho/nn.hpp"

namespace necho {

struct GradCheckReport {
    Scalar max_rel_error = 0.0;
    bool passed = true;
    std::size_t coords_checked = 0;
    std::string worst_input;
    Index worst_index = -1;
    Scalar worst_analytic = 0.0;
    Scalar worst_numeric = 0.0;
};

struct GradCheckOptions {
    Scalar step = 1e-5;
    Scalar tolerance = 1e-4;
    /// Relative error is |a - n| / max(|a|, |n|, floor).
    Scalar floor = 1e-5;
    /// 0 checks every coordinate; otherwise a seeded sample per input.
    std::size_t max_coords_per_input = 0;
    std::uint64_t seed = 0;
};

/// Compares backward() against central differences of `f`, which must rebuild
/// its graph from the current values of `inputs` on every call. Throws
/// NumericError naming the coordinate if a NaN/Inf shows up.
GradCheckReport grad_check(const std::function<Tensor()>& f,
                           const std::vector<std::pair<std::string, Tensor>>& inputs,
                           const GradCheckOptions& options = {});

GradCheckReport grad_check(const std::function<Tensor()>& f, const std::vector<Tensor>& inputs,
                           const GradCheckOptions& options = {});

GradCheckReport grad_check(const std::function<Tensor()>& f, const ParameterSet& params,
                           const GradCheckOptions& options = {});

}  // namespace necho
