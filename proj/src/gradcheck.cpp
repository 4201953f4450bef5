#include "hvfa/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "hvfa/errors.hpp"

namespace hvfa {

namespace {

double eval_finite(const std::function<Tensor()>& loss, const char* where) {
  const double v = loss().item();
  if (!std::isfinite(v)) throw NumericError(std::string("gradcheck: non-finite loss at ") + where);
  return v;
}

}  // namespace

GradcheckReport gradcheck(const std::function<Tensor()>& loss, std::span<Tensor> params,
                          double eps) {
  for (auto& p : params) {
    if (!p.is_leaf() || !p.requires_grad()) {
      throw std::logic_error("gradcheck: parameters must be leaves that require grad");
    }
    p.zero_grad();
  }
  const Tensor out = loss();
  if (!std::isfinite(out.item())) throw NumericError("gradcheck: non-finite loss at base point");
  out.backward();

  GradcheckReport report;
  for (auto& p : params) {
    const std::vector<double> analytic = p.grad();
    auto values = p.mutable_data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double orig = values[i];
      values[i] = orig + eps;
      const double up = eval_finite(loss, "+eps probe");
      values[i] = orig - eps;
      const double down = eval_finite(loss, "-eps probe");
      values[i] = orig;
      const double numeric = (up - down) / (2.0 * eps);
      const double denom = std::max({1.0, std::abs(analytic[i]), std::abs(numeric)});
      report.max_rel_error = std::max(report.max_rel_error, std::abs(analytic[i] - numeric) / denom);
      ++report.checked;
    }
  }
  return report;
}

double gradcheck(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double eps) {
  Tensor leaf = x.clone_leaf(true);
  Tensor params[] = {leaf};
  return gradcheck([&] { return f(leaf); }, params, eps).max_rel_error;
}

}  // namespace hvfa
