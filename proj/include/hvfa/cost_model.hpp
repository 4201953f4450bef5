#pragma once

#include <cstdint>

#include "hvfa/sac.hpp"

// Unitless cost model for multi-scale inputs. Encoder and resampler work is
// linear in sub-images; LLM self-attention is quadratic in visual tokens.
namespace hvfa::cost {

struct ScaleConfig {
  sac::GridSpec grid;    // local scale 1
  int scales = 2;        // local scales: 1, 2 or 3
  std::int64_t queries = 32;
  bool hvfa = false;

  void validate() const;
};

struct CostEstimate {
  std::int64_t sub_images = 0;          // all scales, global view included
  std::int64_t local_sub_images = 0;    // global view excluded
  std::int64_t visual_tokens = 0;       // fed to the LLM
  std::int64_t llm_cost_units = 0;      // visual_tokens^2
  std::int64_t encoder_cost_units = 0;  // sub_images
};

CostEstimate estimate(const ScaleConfig& cfg);

struct CostComparison {
  CostEstimate a, b;
  double encoder_ratio = 0.0;  // b / a
  double llm_ratio = 0.0;
  // Same ratios with the single global view left out, i.e. tokens taken as
  // proportional to local sub-images.
  double asymptotic_encoder_ratio = 0.0;
  double asymptotic_llm_ratio = 0.0;
};

// Requires equal query counts.
CostComparison compare(const ScaleConfig& a, const ScaleConfig& b);

}  // namespace hvfa::cost
