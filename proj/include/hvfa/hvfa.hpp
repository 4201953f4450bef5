#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hvfa/rng.hpp"
#include "hvfa/tensor.hpp"

// Hierarchical visual feature aggregation: fold finer-scale resampler
// features into the coarsest local scale so the downstream token count stays
// at (1 + rows·cols)·q no matter how many scales are used.
namespace hvfa {

// Features of one scale, shape [rows x cols x q x channels].
class FeatureGrid {
 public:
  FeatureGrid() = default;
  explicit FeatureGrid(Tensor data);

  const Tensor& tensor() const { return data_; }
  std::size_t rows() const { return data_.dim(0); }
  std::size_t cols() const { return data_.dim(1); }
  std::size_t queries() const { return data_.dim(2); }
  std::size_t channels() const { return data_.dim(3); }
  std::size_t token_count() const { return rows() * cols() * queries(); }

  // [rows·cols·q x channels], row index ((i·cols + j)·q + k).
  Tensor tokens() const;
  static FeatureGrid from_tokens(const Tensor& tokens, std::size_t rows, std::size_t cols,
                                 std::size_t queries);

 private:
  Tensor data_;
};

enum class PoolVariant {
  kCrossAttentive,   // max-pooled queries attend to every fine token
  kCrossLocal,       // queries attend only to their own 2x2 fine block
  kMaxPoolOnly,      // 2x2 max-pooling, no learned refinement
  kLinearProjector,  // max-pooling then a parameter-matched per-token linear stack
  kRandomQuery,      // cross-attention from a learned query tensor
};

enum class ReconMode {
  kBlockMean,  // r(F̂) predicts the mean of each 2x2 fine block
  kStrict,     // r(F̂) predicts all four fine tokens of the block
};

std::string_view to_string(PoolVariant v);
PoolVariant parse_variant(std::string_view name);
std::string_view to_string(ReconMode m);
ReconMode parse_recon_mode(std::string_view name);

struct HvfaConfig {
  std::size_t channels = 16;
  std::size_t heads = 4;
  std::size_t head_dim = 16;
  std::size_t layers = 2;
  PoolVariant variant = PoolVariant::kCrossAttentive;
  bool layer_norm = true;
  bool reconstruction = true;
  ReconMode recon_mode = ReconMode::kBlockMean;
  std::size_t recon_hidden = 0;  // 0 means 2·channels
  bool stopgrad = true;
  double lambda = 0.1;
  // Start the last attention layer at the residual identity.
  bool zero_init_last_proj = true;

  std::size_t d_total() const { return heads * head_dim; }
  std::size_t hidden_width() const { return recon_hidden ? recon_hidden : 2 * channels; }
  bool uses_attention() const;

  // 256-wide, 12-head, two-layer setting; per-head width is floor(256/12).
  static HvfaConfig paper_preset(std::size_t channels);
  void validate() const;
};

struct AttentionLayer {
  std::vector<Tensor> w_query;  // per head [c x d_head]
  std::vector<Tensor> w_key;
  std::vector<Tensor> w_value;
  Tensor w_proj;  // [heads·d_head x c]
  // Pre-normalization affine terms, [c]; undefined when layer_norm is off.
  Tensor ln_query_gamma, ln_query_beta;
  Tensor ln_kv_gamma, ln_kv_beta;
};

struct LinearLayer {
  Tensor weight;  // [c x c]
  Tensor bias;    // [c]
};

// Two-layer MLP decoder r(·): c -> hidden -> out, tanh between.
struct ReconDecoder {
  Tensor w1, b1, w2, b2;
  Tensor apply(const Tensor& tokens) const;
};

// Learnable state for folding scale i+1 into scale i.
struct FoldParams {
  std::vector<AttentionLayer> attention;  // attention-based variants
  std::vector<LinearLayer> projector;     // kLinearProjector
  Tensor query;                           // kRandomQuery, shape of the coarse grid
  std::optional<ReconDecoder> decoder;
};

struct HvfaParams {
  HvfaConfig config;
  // folds[k] merges local scale k+1 into local scale k (0 = coarsest pair).
  std::vector<FoldParams> folds;

  std::vector<Tensor> trainable() const;
  std::size_t parameter_count() const;
};

// Seeded initialization for a pyramid whose coarsest local grid is
// coarse_rows x coarse_cols with `queries` tokens per sub-image.
HvfaParams init_params(const HvfaConfig& config, std::size_t coarse_rows, std::size_t coarse_cols,
                       std::size_t queries, std::size_t local_scales, Rng& rng);

// Number of per-token linear layers matching one fold's attention parameter count.
std::size_t matched_projector_depth(const HvfaConfig& config);

// 2x2 max-pooling of the finer grid (F').
FeatureGrid pool_queries(const FeatureGrid& fine);

// F̂ = F' + Softmax((F'Wq)(FWk)^T / sqrt(d_head)) (FWv) Wproj, multi-head,
// stacked over fold.attention layers with keys/values fixed to `fine`.
FeatureGrid cross_attentive_pool(const FeatureGrid& pooled, const FeatureGrid& fine,
                                 const FoldParams& fold, const HvfaConfig& config);
// As above, but each coarse cell's queries see only its own 2x2 fine block.
FeatureGrid cross_local_attentive_pool(const FeatureGrid& pooled, const FeatureGrid& fine,
                                       const FoldParams& fold, const HvfaConfig& config);

// F̂ for the configured variant.
FeatureGrid pool_variant(const FeatureGrid& fine, const FoldParams& fold, const HvfaConfig& config);

// F̄ = F_coarse + F̂.
FeatureGrid aggregate(const FeatureGrid& coarse, const FeatureGrid& pooled);

// Reconstruction target for `fine` under the configured mode, as
// [tokens x width] matching the decoder output.
Tensor recon_target(const FeatureGrid& fine, ReconMode mode);
// mean((r(F̂) - stopgrad(target))^2); stopgrad is applied iff config.stopgrad.
Tensor recon_loss(const FeatureGrid& pooled, const FeatureGrid& fine, const FoldParams& fold,
                  const HvfaConfig& config);

struct HvfaOutput {
  FeatureGrid aggregated;  // F̄ at the coarsest local scale
  Tensor recon;            // sum of per-fold reconstruction terms, [1]
};

// `local` lists local scales coarse -> fine (2 or 3 grids, each doubling the
// previous). Folds finest into next-finest first.
HvfaOutput hvfa_forward(std::span<const FeatureGrid> local, const HvfaParams& params);

// Tokens delivered downstream: global view tokens then F̄ tokens.
Tensor downstream_tokens(const FeatureGrid& global, const FeatureGrid& aggregated);

struct LossBreakdown {
  double task_loss = 0.0;
  double mse_loss = 0.0;
  double final_loss = 0.0;
  double lambda = 0.0;
};

// final = task + lambda·mse. Throws ConfigError for negative lambda.
LossBreakdown final_loss(double task, double mse, double lambda);
Tensor final_loss(const Tensor& task, const Tensor& mse, double lambda);

}  // namespace hvfa
