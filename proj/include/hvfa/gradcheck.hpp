#pragma once

#include <functional>
#include <span>
#include <vector>

#include "hvfa/tensor.hpp"

namespace hvfa {

struct GradcheckReport {
  double max_rel_error = 0.0;
  std::size_t checked = 0;  // number of scalar entries probed
};

// Compares backward() gradients of a scalar-valued `loss` against central
// differences for every entry of every tensor in `params`. Each entry's error
// is |analytic - numeric| / max(1, |analytic|, |numeric|); the maximum is
// reported. `loss` is re-evaluated after each in-place probe of a leaf, so it
// must rebuild its graph from the current parameter values on every call.
//
// Throws NumericError if any evaluation is non-finite.
GradcheckReport gradcheck(const std::function<Tensor()>& loss, std::span<Tensor> params,
                          double eps = 1e-5);

// Single-input form: `f` receives a fresh leaf holding x's values.
double gradcheck(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                 double eps = 1e-5);

}  // namespace hvfa
