#include "hvfa/toy.hpp"

#include <cmath>
#include <string>

#include "hvfa/errors.hpp"
#include "hvfa/ops.hpp"

namespace hvfa::toy {

void ToyConfig::validate() const {
  hvfa.validate();
  if (rows == 0 || cols == 0 || queries == 0 || input_channels == 0) {
    throw ConfigError("toy grid, queries and input channels must be positive");
  }
  if (local_scales != 2 && local_scales != 3) throw ConfigError("toy model supports 2 or 3 local scales");
  if (vocab < 2) throw ConfigError("toy vocabulary needs at least 2 entries");
  if (answer_length == 0) throw ConfigError("toy answer length must be >= 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning rate must be positive");
}

ToyConfig ToyConfig::collapse_reference(std::uint64_t seed, bool stopgrad) {
  // Strict reconstruction cannot be solved from one pooled token, so only the
  // degenerate route (fine features and decoder output both to zero) drives
  // L_MSE to zero. The single answer token reads the global view, keeping the
  // task gradient off the fine extractor. Layer norm is off because its
  // Jacobian grows like 1/sqrt(eps) as features shrink.
  ToyConfig c;
  c.seed = seed;
  c.rows = 2;
  c.cols = 2;
  c.queries = 2;
  c.input_channels = 8;
  c.local_scales = 2;
  c.vocab = 10;
  c.answer_length = 1;
  c.steps = 500;
  c.learning_rate = 0.5;
  c.hvfa.channels = 4;
  c.hvfa.heads = 2;
  c.hvfa.head_dim = 2;
  c.hvfa.layers = 2;
  c.hvfa.layer_norm = false;
  c.hvfa.recon_mode = ReconMode::kStrict;
  c.hvfa.lambda = 1.0;
  c.hvfa.stopgrad = stopgrad;
  return c;
}

ToyConfig ToyConfig::gradcheck_reference(std::uint64_t seed) {
  ToyConfig c;
  c.seed = seed;
  c.rows = 1;
  c.cols = 1;
  c.queries = 2;
  c.input_channels = 3;
  c.local_scales = 2;
  c.vocab = 5;
  c.answer_length = 3;
  c.steps = 1;
  c.hvfa.channels = 4;
  c.hvfa.heads = 2;
  c.hvfa.head_dim = 2;
  c.hvfa.layers = 2;
  c.hvfa.lambda = 0.5;
  c.hvfa.stopgrad = false;
  return c;
}

Tensor ToyTaskHead::loss(const Tensor& downstream) const {
  const Tensor picked = gather_rows(downstream, positions);
  return cross_entropy_sum(add_bias(matmul(picked, readout), bias), targets);
}

ToyModel ToyModel::build(const ToyConfig& config) {
  config.validate();
  Rng rng(config.seed);
  const std::size_t c = config.hvfa.channels;
  const std::size_t cin = config.input_channels;
  const std::size_t q = config.queries;

  ToyModel m;
  m.config = config;
  m.global_input = Tensor::uniform({q, cin}, -1.0, 1.0, rng);
  std::size_t rows = config.rows, cols = config.cols;
  for (std::size_t s = 0; s < config.local_scales; ++s) {
    m.local_inputs.push_back(Tensor::uniform({rows * cols * q, cin}, -1.0, 1.0, rng));
    rows *= 2;
    cols *= 2;
  }
  const double bound = 1.0 / std::sqrt(static_cast<double>(cin));
  m.coarse_extractor = Tensor::uniform({cin, c}, -bound, bound, rng, true);
  m.fine_extractor = Tensor::uniform({cin, c}, -bound, bound, rng, true);
  m.hvfa = init_params(config.hvfa, config.rows, config.cols, q, config.local_scales, rng);

  const std::size_t downstream = (1 + config.rows * config.cols) * q;
  m.head.vocab = config.vocab;
  const double rbound = 1.0 / std::sqrt(static_cast<double>(c));
  m.head.readout = Tensor::uniform({c, config.vocab}, -rbound, rbound, rng, true);
  m.head.bias = Tensor::zeros({config.vocab}, true);
  for (std::size_t i = 0; i < config.answer_length; ++i) {
    m.head.positions.push_back(i * downstream / config.answer_length);
    m.head.targets.push_back(static_cast<std::size_t>(rng.below(config.vocab)));
  }
  return m;
}

ToyModel::Features ToyModel::features() const {
  const std::size_t q = config.queries;
  Features f;
  f.global = FeatureGrid::from_tokens(matmul(global_input, coarse_extractor), 1, 1, q);
  std::size_t rows = config.rows, cols = config.cols;
  for (std::size_t s = 0; s < local_inputs.size(); ++s) {
    const Tensor& extractor = s == 0 ? coarse_extractor : fine_extractor;
    f.local.push_back(FeatureGrid::from_tokens(matmul(local_inputs[s], extractor), rows, cols, q));
    rows *= 2;
    cols *= 2;
  }
  return f;
}

ToyModel::Forward ToyModel::evaluate(const FeatureGrid& global, std::span<const FeatureGrid> local) const {
  HvfaOutput out = hvfa_forward(local, hvfa);
  Forward f;
  f.aggregated = out.aggregated;
  f.downstream = downstream_tokens(global, out.aggregated);
  f.task = head.loss(f.downstream);
  f.mse = out.recon;
  f.total = final_loss(f.task, f.mse, config.hvfa.lambda);
  return f;
}

ToyModel::Forward ToyModel::forward() const {
  const Features f = features();
  return evaluate(f.global, f.local);
}

std::vector<Tensor> ToyModel::trainable() const {
  std::vector<Tensor> out{coarse_extractor, fine_extractor};
  const auto h = hvfa.trainable();
  out.insert(out.end(), h.begin(), h.end());
  out.push_back(head.readout);
  out.push_back(head.bias);
  return out;
}

std::vector<Tensor> ToyModel::gradcheck_params() const {
  if (!config.hvfa.stopgrad) return trainable();
  // Detached targets are the fine input of each fold. For two scales that is
  // the fine extractor's output; for three, F̄ of the middle scale also
  // depends on the coarse extractor and the finest fold.
  std::vector<Tensor> out;
  if (config.local_scales == 2) out.push_back(coarse_extractor);
  HvfaParams coarsest;
  coarsest.folds.push_back(hvfa.folds.front());
  const auto h = coarsest.trainable();
  out.insert(out.end(), h.begin(), h.end());
  for (std::size_t k = 1; k < hvfa.folds.size(); ++k) {
    if (const auto& d = hvfa.folds[k].decoder) out.insert(out.end(), {d->w1, d->b1, d->w2, d->b2});
  }
  out.push_back(head.readout);
  out.push_back(head.bias);
  return out;
}

std::vector<TraceRow> train(ToyModel& model) {
  std::vector<Tensor> params = model.trainable();
  const double lr = model.config.learning_rate;
  std::vector<TraceRow> trace;
  trace.reserve(model.config.steps);
  for (std::size_t step = 0; step < model.config.steps; ++step) {
    const auto f = model.forward();
    const LossBreakdown loss = final_loss(f.task.item(), f.mse.item(), model.config.hvfa.lambda);
    if (!std::isfinite(loss.final_loss)) {
      throw NumericError("toy training diverged at step " + std::to_string(step));
    }
    trace.push_back({step, loss});
    for (auto& p : params) p.zero_grad();
    f.total.backward();
    for (auto& p : params) {
      if (!p.has_grad()) continue;
      const auto g = p.grad();
      auto v = p.mutable_data();
      for (std::size_t i = 0; i < v.size(); ++i) v[i] -= lr * g[i];
    }
  }
  return trace;
}

std::vector<TraceRow> toy_train(const ToyConfig& config) {
  ToyModel model = ToyModel::build(config);
  return train(model);
}

GradcheckReport check_gradients(const ToyConfig& config, double eps) {
  ToyModel model = ToyModel::build(config);
  Rng jitter(config.seed ^ 0x9e3779b97f4a7c15ULL);
  for (auto& p : model.trainable()) {
    auto copy = p;
    for (auto& v : copy.mutable_data()) v += jitter.uniform(-0.3, 0.3);
  }
  std::vector<Tensor> params = model.gradcheck_params();
  return gradcheck([&] { return model.forward().total; }, params, eps);
}

}  // namespace hvfa::toy
