#pragma once

#include <vector>

#include "necho/nn.hpp"

namespace necho {

struct AdamOptions {
    Scalar lr = 1e-4;
    Scalar beta1 = 0.9;
    Scalar beta2 = 0.999;
    Scalar eps = 1e-8;
};

/// Parameters without a gradient this step (frozen, or untouched by the
/// loss) are left alone, moments included.
class Adam {
  public:
    Adam(ParameterSet& params, AdamOptions options = {});
    void step();
    long steps() const { return t_; }

  private:
    ParameterSet& params_;
    AdamOptions opt_;
    std::vector<Matrix> m_, v_;
    std::vector<long> counts_;
    long t_ = 0;
};

class Sgd {
  public:
    Sgd(ParameterSet& params, Scalar lr, Scalar momentum = 0.0);
    void step();

  private:
    ParameterSet& params_;
    Scalar lr_;
    Scalar momentum_;
    std::vector<Matrix> velocity_;
};

}  // namespace necho
