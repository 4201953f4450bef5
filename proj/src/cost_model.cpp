#include "hvfa/cost_model.hpp"

#include <string>

#include "hvfa/errors.hpp"

namespace hvfa::cost {

void ScaleConfig::validate() const {
  if (grid.rows < 1 || grid.cols < 1) throw ConfigError("grid extents must be positive");
  if (scales < 1 || scales > 3) throw ConfigError("scales must be 1, 2 or 3, got " + std::to_string(scales));
  if (queries < 1) throw ConfigError("queries per sub-image must be >= 1");
}

namespace {

// Local sub-images when every scale after the first quadruples the count.
std::int64_t local_count(const ScaleConfig& cfg) {
  const std::int64_t n = cfg.grid.count();
  std::int64_t total = 0;
  std::int64_t level = n;
  for (int s = 0; s < cfg.scales; ++s) {
    total += level;
    level *= 4;
  }
  return total;
}

// Local tokens ignoring the global view, used for the asymptotic ratios.
std::int64_t local_tokens(const ScaleConfig& cfg) {
  return (cfg.hvfa ? cfg.grid.count() : local_count(cfg)) * cfg.queries;
}

}  // namespace

CostEstimate estimate(const ScaleConfig& cfg) {
  cfg.validate();
  CostEstimate e;
  e.local_sub_images = local_count(cfg);
  e.sub_images = 1 + e.local_sub_images;
  e.visual_tokens = cfg.hvfa ? (1 + cfg.grid.count()) * cfg.queries : e.sub_images * cfg.queries;
  e.llm_cost_units = e.visual_tokens * e.visual_tokens;
  e.encoder_cost_units = e.sub_images;
  return e;
}

CostComparison compare(const ScaleConfig& a, const ScaleConfig& b) {
  if (a.queries != b.queries) throw ConfigError("compare requires equal queries per sub-image");
  CostComparison c;
  c.a = estimate(a);
  c.b = estimate(b);
  c.encoder_ratio = static_cast<double>(c.b.encoder_cost_units) / static_cast<double>(c.a.encoder_cost_units);
  c.llm_ratio = static_cast<double>(c.b.llm_cost_units) / static_cast<double>(c.a.llm_cost_units);
  c.asymptotic_encoder_ratio =
      static_cast<double>(c.b.local_sub_images) / static_cast<double>(c.a.local_sub_images);
  const double ta = static_cast<double>(local_tokens(a));
  const double tb = static_cast<double>(local_tokens(b));
  c.asymptotic_llm_ratio = (tb * tb) / (ta * ta);
  return c;
}

}  // namespace hvfa::cost
