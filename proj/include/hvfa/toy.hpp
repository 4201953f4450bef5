#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "hvfa/gradcheck.hpp"
#include "hvfa/hvfa.hpp"
#include "hvfa/tensor.hpp"

// Desk-scale stand-in for the full multimodal model: fixed random "pixel"
// inputs, trainable linear feature extractors for each scale, the HVFA fold,
// and a linear token readout scored with summed cross-entropy.
namespace hvfa::toy {

struct ToyConfig {
  std::uint64_t seed = 0;
  std::size_t rows = 2;  // coarsest local grid
  std::size_t cols = 2;
  std::size_t queries = 4;
  std::size_t input_channels = 8;
  std::size_t local_scales = 2;
  std::size_t vocab = 10;
  std::size_t answer_length = 8;  // n_y
  std::size_t steps = 500;
  double learning_rate = 0.5;
  HvfaConfig hvfa;

  void validate() const;
  // Reference setup for the stop-gradient collapse experiment.
  static ToyConfig collapse_reference(std::uint64_t seed, bool stopgrad);
  // Tiny setup for finite-difference checks.
  static ToyConfig gradcheck_reference(std::uint64_t seed);
};

// Linear readout from selected downstream tokens to vocabulary logits.
struct ToyTaskHead {
  std::size_t vocab = 0;
  Tensor readout;  // [c x vocab]
  Tensor bias;     // [vocab]
  std::vector<std::size_t> positions;  // downstream token read for answer step i
  std::vector<std::size_t> targets;    // Y as class indices

  // Sum over answer steps of -log p(target | features).
  Tensor loss(const Tensor& downstream) const;
};

struct ToyModel {
  ToyConfig config;
  // Fixed inputs: global [q x c_in], then one block per local scale.
  Tensor global_input;
  std::vector<Tensor> local_inputs;
  Tensor coarse_extractor;  // [c_in x c], shared by global view and coarsest scale
  Tensor fine_extractor;    // [c_in x c], every finer scale
  HvfaParams hvfa;
  ToyTaskHead head;

  static ToyModel build(const ToyConfig& config);

  struct Forward {
    Tensor task;
    Tensor mse;
    Tensor total;
    FeatureGrid aggregated;
    Tensor downstream;
  };
  Forward forward() const;

  struct Features {
    FeatureGrid global;
    std::vector<FeatureGrid> local;  // coarse -> fine
  };
  Features features() const;
  // Runs HVFA, the task head and the final loss on externally supplied features.
  Forward evaluate(const FeatureGrid& global, std::span<const FeatureGrid> local) const;

  std::vector<Tensor> trainable() const;
  // Parameters whose finite-difference derivative must match backward():
  // with stopgrad on, anything upstream of a detached target is excluded.
  std::vector<Tensor> gradcheck_params() const;
};

struct TraceRow {
  std::size_t step = 0;
  LossBreakdown loss;
};

// Full-batch gradient descent; row i holds the losses evaluated before
// update i. Throws NumericError naming the step on a non-finite loss.
std::vector<TraceRow> train(ToyModel& model);
std::vector<TraceRow> toy_train(const ToyConfig& config);

// Max relative error of the full forward + final loss against central
// differences over gradcheck_params(). Parameters are first randomized so
// zero-initialized projections and unit layer-norm gains are exercised.
GradcheckReport check_gradients(const ToyConfig& config, double eps = 1e-5);

}  // namespace hvfa::toy
