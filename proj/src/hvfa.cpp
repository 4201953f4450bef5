#include "hvfa/hvfa.hpp"

#include <cmath>
#include <limits>

#include "hvfa/errors.hpp"
#include "hvfa/ops.hpp"

namespace hvfa {

FeatureGrid::FeatureGrid(Tensor data) : data_(std::move(data)) {
  if (data_.rank() != 4) {
    throw ShapeError("feature grid must be rank 4 [rows x cols x q x c], got " + shape_str(data_.shape()));
  }
}

Tensor FeatureGrid::tokens() const { return reshape(data_, {token_count(), channels()}); }

FeatureGrid FeatureGrid::from_tokens(const Tensor& tokens, std::size_t rows, std::size_t cols,
                                     std::size_t queries) {
  return FeatureGrid(reshape(tokens, {rows, cols, queries, tokens.dim(1)}));
}

std::string_view to_string(PoolVariant v) {
  switch (v) {
    case PoolVariant::kCrossAttentive: return "cross-attentive";
    case PoolVariant::kCrossLocal: return "cross-local";
    case PoolVariant::kMaxPoolOnly: return "maxpool-only";
    case PoolVariant::kLinearProjector: return "linear-projector";
    case PoolVariant::kRandomQuery: return "random-query";
  }
  return "?";
}

PoolVariant parse_variant(std::string_view name) {
  for (auto v : {PoolVariant::kCrossAttentive, PoolVariant::kCrossLocal, PoolVariant::kMaxPoolOnly,
                 PoolVariant::kLinearProjector, PoolVariant::kRandomQuery}) {
    if (to_string(v) == name) return v;
  }
  throw ConfigError("unknown pooling variant '" + std::string(name) + "'");
}

std::string_view to_string(ReconMode m) {
  return m == ReconMode::kBlockMean ? "block-mean" : "strict";
}

ReconMode parse_recon_mode(std::string_view name) {
  if (name == "block-mean") return ReconMode::kBlockMean;
  if (name == "strict") return ReconMode::kStrict;
  throw ConfigError("unknown reconstruction mode '" + std::string(name) + "'");
}

bool HvfaConfig::uses_attention() const {
  return variant == PoolVariant::kCrossAttentive || variant == PoolVariant::kCrossLocal ||
         variant == PoolVariant::kRandomQuery;
}

HvfaConfig HvfaConfig::paper_preset(std::size_t channels) {
  HvfaConfig c;
  c.channels = channels;
  c.heads = 12;
  c.head_dim = 256 / 12;
  c.layers = 2;
  c.lambda = 0.1;
  return c;
}

void HvfaConfig::validate() const {
  if (channels == 0 || heads == 0 || head_dim == 0 || layers == 0) {
    throw ConfigError("channels, heads, head_dim and layers must all be positive");
  }
  if (!std::isfinite(lambda) || lambda < 0.0) {
    throw ConfigError("lambda must be finite and >= 0, got " + std::to_string(lambda));
  }
}

std::size_t matched_projector_depth(const HvfaConfig& config) {
  const std::size_t c = config.channels;
  const std::size_t per_layer = 4 * c * config.d_total() + (config.layer_norm ? 4 * c : 0);
  const double ratio = static_cast<double>(config.layers * per_layer) / static_cast<double>(c * c + c);
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(ratio)));
}

Tensor ReconDecoder::apply(const Tensor& tokens) const {
  return add_bias(matmul(tanh(add_bias(matmul(tokens, w1), b1)), w2), b2);
}

std::vector<Tensor> HvfaParams::trainable() const {
  std::vector<Tensor> out;
  for (const auto& f : folds) {
    for (const auto& l : f.attention) {
      out.insert(out.end(), l.w_query.begin(), l.w_query.end());
      out.insert(out.end(), l.w_key.begin(), l.w_key.end());
      out.insert(out.end(), l.w_value.begin(), l.w_value.end());
      out.push_back(l.w_proj);
      for (const auto* t : {&l.ln_query_gamma, &l.ln_query_beta, &l.ln_kv_gamma, &l.ln_kv_beta})
        if (t->defined()) out.push_back(*t);
    }
    for (const auto& p : f.projector) {
      out.push_back(p.weight);
      out.push_back(p.bias);
    }
    if (f.query.defined()) out.push_back(f.query);
    if (f.decoder) {
      out.push_back(f.decoder->w1);
      out.push_back(f.decoder->b1);
      out.push_back(f.decoder->w2);
      out.push_back(f.decoder->b2);
    }
  }
  return out;
}

std::size_t HvfaParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : trainable()) n += t.numel();
  return n;
}

namespace {

Tensor scaled_uniform(Shape shape, std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  return Tensor::uniform(std::move(shape), -bound, bound, rng, true);
}

}  // namespace

HvfaParams init_params(const HvfaConfig& config, std::size_t coarse_rows, std::size_t coarse_cols,
                       std::size_t queries, std::size_t local_scales, Rng& rng) {
  config.validate();
  if (local_scales != 2 && local_scales != 3) {
    throw ConfigError("HVFA supports 2 or 3 local scales, got " + std::to_string(local_scales));
  }
  const std::size_t c = config.channels;
  const std::size_t dh = config.head_dim;
  HvfaParams params;
  params.config = config;
  std::size_t rows = coarse_rows, cols = coarse_cols;
  for (std::size_t k = 0; k + 1 < local_scales; ++k) {
    FoldParams fold;
    if (config.uses_attention()) {
      for (std::size_t l = 0; l < config.layers; ++l) {
        AttentionLayer layer;
        for (std::size_t h = 0; h < config.heads; ++h) {
          layer.w_query.push_back(scaled_uniform({c, dh}, c, rng));
          layer.w_key.push_back(scaled_uniform({c, dh}, c, rng));
          layer.w_value.push_back(scaled_uniform({c, dh}, c, rng));
        }
        layer.w_proj = (config.zero_init_last_proj && l + 1 == config.layers)
                           ? Tensor::zeros({config.d_total(), c}, true)
                           : scaled_uniform({config.d_total(), c}, config.d_total(), rng);
        if (config.layer_norm) {
          layer.ln_query_gamma = Tensor::full({c}, 1.0, true);
          layer.ln_query_beta = Tensor::zeros({c}, true);
          layer.ln_kv_gamma = Tensor::full({c}, 1.0, true);
          layer.ln_kv_beta = Tensor::zeros({c}, true);
        }
        fold.attention.push_back(std::move(layer));
      }
    }
    if (config.variant == PoolVariant::kLinearProjector) {
      for (std::size_t l = 0; l < matched_projector_depth(config); ++l) {
        fold.projector.push_back({scaled_uniform({c, c}, c, rng), Tensor::zeros({c}, true)});
      }
    }
    if (config.variant == PoolVariant::kRandomQuery) {
      fold.query = Tensor::uniform({rows, cols, queries, c}, -1.0, 1.0, rng, true);
    }
    if (config.reconstruction) {
      const std::size_t hidden = config.hidden_width();
      const std::size_t out = config.recon_mode == ReconMode::kStrict ? 4 * c : c;
      fold.decoder = ReconDecoder{scaled_uniform({c, hidden}, c, rng), Tensor::zeros({hidden}, true),
                                  scaled_uniform({hidden, out}, hidden, rng), Tensor::zeros({out}, true)};
    }
    params.folds.push_back(std::move(fold));
    rows *= 2;
    cols *= 2;
  }
  return params;
}

FeatureGrid pool_queries(const FeatureGrid& fine) { return FeatureGrid(maxpool_grid2x2(fine.tensor())); }

namespace {

void check_pair(const FeatureGrid& pooled, const FeatureGrid& fine, const HvfaConfig& config) {
  if (pooled.channels() != config.channels || fine.channels() != config.channels) {
    throw DimensionError("feature channels (" + std::to_string(pooled.channels()) + ", " +
                         std::to_string(fine.channels()) + ") do not match configured " +
                         std::to_string(config.channels));
  }
  if (fine.rows() != 2 * pooled.rows() || fine.cols() != 2 * pooled.cols() ||
      fine.queries() != pooled.queries()) {
    throw ShapeError("fine grid " + shape_str(fine.tensor().shape()) + " is not the 2x refinement of " +
                     shape_str(pooled.tensor().shape()));
  }
}

// Additive mask restricting each coarse cell's query tokens to its own fine block.
Tensor block_mask(const FeatureGrid& pooled, const FeatureGrid& fine) {
  const std::size_t q = pooled.queries();
  const std::size_t nq = pooled.token_count(), nk = fine.token_count();
  std::vector<double> mask(nq * nk, -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < pooled.rows(); ++i)
    for (std::size_t j = 0; j < pooled.cols(); ++j)
      for (std::size_t k = 0; k < q; ++k) {
        const std::size_t row = (i * pooled.cols() + j) * q + k;
        for (std::size_t di = 0; di < 2; ++di)
          for (std::size_t dj = 0; dj < 2; ++dj)
            for (std::size_t kk = 0; kk < q; ++kk) {
              const std::size_t col = ((2 * i + di) * fine.cols() + (2 * j + dj)) * q + kk;
              mask[row * nk + col] = 0.0;
            }
      }
  return Tensor::from({nq, nk}, std::move(mask));
}

FeatureGrid attend(const FeatureGrid& pooled, const FeatureGrid& fine, const FoldParams& fold,
                   const HvfaConfig& config, bool local) {
  check_pair(pooled, fine, config);
  if (fold.attention.empty()) throw ConfigError("attention pooling requires attention parameters");
  const std::optional<Tensor> mask = local ? std::optional<Tensor>(block_mask(pooled, fine)) : std::nullopt;
  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(config.head_dim));
  const Tensor kv_tokens = fine.tokens();
  Tensor x = pooled.tokens();
  for (const auto& layer : fold.attention) {
    const Tensor q_in = config.layer_norm ? layer_norm_lastaxis(x, layer.ln_query_gamma, layer.ln_query_beta) : x;
    const Tensor kv_in =
        config.layer_norm ? layer_norm_lastaxis(kv_tokens, layer.ln_kv_gamma, layer.ln_kv_beta) : kv_tokens;
    std::vector<Tensor> heads;
    heads.reserve(layer.w_query.size());
    for (std::size_t h = 0; h < layer.w_query.size(); ++h) {
      const Tensor q = matmul(q_in, layer.w_query[h]);
      const Tensor k = matmul(kv_in, layer.w_key[h]);
      const Tensor v = matmul(kv_in, layer.w_value[h]);
      Tensor scores = scale(matmul(q, transpose(k)), inv_scale);
      if (mask) scores = add(scores, *mask);
      heads.push_back(matmul(softmax_lastaxis(scores), v));
    }
    x = add(x, matmul(concat_cols(heads), layer.w_proj));
  }
  return FeatureGrid::from_tokens(x, pooled.rows(), pooled.cols(), pooled.queries());
}

}  // namespace

FeatureGrid cross_attentive_pool(const FeatureGrid& pooled, const FeatureGrid& fine, const FoldParams& fold,
                                 const HvfaConfig& config) {
  return attend(pooled, fine, fold, config, false);
}

FeatureGrid cross_local_attentive_pool(const FeatureGrid& pooled, const FeatureGrid& fine,
                                       const FoldParams& fold, const HvfaConfig& config) {
  return attend(pooled, fine, fold, config, true);
}

FeatureGrid pool_variant(const FeatureGrid& fine, const FoldParams& fold, const HvfaConfig& config) {
  switch (config.variant) {
    case PoolVariant::kCrossAttentive:
      return cross_attentive_pool(pool_queries(fine), fine, fold, config);
    case PoolVariant::kCrossLocal:
      return cross_local_attentive_pool(pool_queries(fine), fine, fold, config);
    case PoolVariant::kMaxPoolOnly:
      return pool_queries(fine);
    case PoolVariant::kLinearProjector: {
      const FeatureGrid pooled = pool_queries(fine);
      if (fold.projector.empty()) throw ConfigError("linear-projector variant has no projector layers");
      Tensor x = pooled.tokens();
      for (const auto& p : fold.projector) x = add_bias(matmul(x, p.weight), p.bias);
      return FeatureGrid::from_tokens(x, pooled.rows(), pooled.cols(), pooled.queries());
    }
    case PoolVariant::kRandomQuery: {
      if (!fold.query.defined()) throw ConfigError("random-query variant has no query tensor");
      return cross_attentive_pool(FeatureGrid(fold.query), fine, fold, config);
    }
  }
  throw ConfigError("unknown pooling variant");
}

FeatureGrid aggregate(const FeatureGrid& coarse, const FeatureGrid& pooled) {
  return FeatureGrid(add(coarse.tensor(), pooled.tensor()));
}

Tensor recon_target(const FeatureGrid& fine, ReconMode mode) {
  if (mode == ReconMode::kBlockMean) return FeatureGrid(avgpool_grid2x2(fine.tensor())).tokens();
  // Space-to-depth: coarse token (i, j, k) gathers fine tokens
  // (2i+di, 2j+dj, k) for (di, dj) in row-major order.
  if (fine.rows() % 2 != 0 || fine.cols() % 2 != 0) {
    throw ShapeError("reconstruction target needs even grid extents, got " + shape_str(fine.tensor().shape()));
  }
  const std::size_t rows = fine.rows() / 2, cols = fine.cols() / 2, q = fine.queries();
  std::vector<std::size_t> order;
  order.reserve(fine.token_count());
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j)
      for (std::size_t k = 0; k < q; ++k)
        for (std::size_t di = 0; di < 2; ++di)
          for (std::size_t dj = 0; dj < 2; ++dj)
            order.push_back(((2 * i + di) * fine.cols() + (2 * j + dj)) * q + k);
  return reshape(gather_rows(fine.tokens(), order), {rows * cols * q, 4 * fine.channels()});
}

Tensor recon_loss(const FeatureGrid& pooled, const FeatureGrid& fine, const FoldParams& fold,
                  const HvfaConfig& config) {
  if (!fold.decoder) throw ConfigError("reconstruction loss requires a decoder");
  Tensor target = recon_target(fine, config.recon_mode);
  if (config.stopgrad) target = target.detach();
  const Tensor recon = fold.decoder->apply(pooled.tokens());
  if (recon.shape() != target.shape()) {
    throw DimensionError("decoder output " + shape_str(recon.shape()) + " does not match target " +
                         shape_str(target.shape()));
  }
  return mse_mean(recon, target);
}

HvfaOutput hvfa_forward(std::span<const FeatureGrid> local, const HvfaParams& params) {
  const HvfaConfig& config = params.config;
  if (local.size() != 2 && local.size() != 3) {
    throw ShapeError("HVFA needs 2 or 3 local scales, got " + std::to_string(local.size()));
  }
  for (std::size_t s = 0; s + 1 < local.size(); ++s) {
    const auto& a = local[s];
    const auto& b = local[s + 1];
    if (b.rows() != 2 * a.rows() || b.cols() != 2 * a.cols() || b.queries() != a.queries() ||
        b.channels() != a.channels()) {
      throw ShapeError("pyramid level " + std::to_string(s + 1) + " " + shape_str(b.tensor().shape()) +
                       " does not double level " + std::to_string(s) + " " + shape_str(a.tensor().shape()));
    }
  }
  if (params.folds.size() != local.size() - 1) {
    throw ConfigError("parameters cover " + std::to_string(params.folds.size()) + " folds, pyramid needs " +
                      std::to_string(local.size() - 1));
  }

  FeatureGrid current = local.back();
  Tensor recon = Tensor::scalar(0.0);
  for (std::size_t s = local.size() - 1; s-- > 0;) {
    const FoldParams& fold = params.folds[s];
    const FeatureGrid pooled = pool_variant(current, fold, config);
    if (config.reconstruction) recon = add(recon, recon_loss(pooled, current, fold, config));
    current = aggregate(local[s], pooled);
  }
  return {current, recon};
}

Tensor downstream_tokens(const FeatureGrid& global, const FeatureGrid& aggregated) {
  if (global.rows() != 1 || global.cols() != 1) throw ShapeError("global view must be a 1x1 grid");
  const Tensor parts[] = {global.tokens(), aggregated.tokens()};
  return concat_rows(parts);
}

LossBreakdown final_loss(double task, double mse, double lambda) {
  if (!(lambda >= 0.0)) throw ConfigError("lambda must be >= 0, got " + std::to_string(lambda));
  return {task, mse, task + lambda * mse, lambda};
}

Tensor final_loss(const Tensor& task, const Tensor& mse, double lambda) {
  if (!(lambda >= 0.0)) throw ConfigError("lambda must be >= 0, got " + std::to_string(lambda));
  return add(task, scale(mse, lambda));
}

}  // namespace hvfa
