#include <doctest.h>

#include <vector>

#include "hvfa/errors.hpp"
#include "hvfa/toy.hpp"

using namespace hvfa;

TEST_CASE("toy config validation") {
  auto c = toy::ToyConfig::gradcheck_reference(1);
  c.local_scales = 4;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = toy::ToyConfig::gradcheck_reference(1);
  c.learning_rate = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = toy::ToyConfig::gradcheck_reference(1);
  c.answer_length = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("toy build is seeded") {
  const auto a = toy::ToyModel::build(toy::ToyConfig::gradcheck_reference(4));
  const auto b = toy::ToyModel::build(toy::ToyConfig::gradcheck_reference(4));
  const auto c = toy::ToyModel::build(toy::ToyConfig::gradcheck_reference(5));
  CHECK(a.forward().total.item() == b.forward().total.item());
  CHECK(a.forward().total.item() != c.forward().total.item());
  CHECK(a.head.positions == std::vector<std::size_t>{0, 1, 2});
}

TEST_CASE("trace rows compose the final loss") {
  auto cfg = toy::ToyConfig::gradcheck_reference(2);
  cfg.steps = 5;
  cfg.learning_rate = 0.05;
  const auto trace = toy::toy_train(cfg);
  REQUIRE(trace.size() == 5);
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const auto& r = trace[i].loss;
    CHECK(trace[i].step == i);
    CHECK(r.final_loss == r.task_loss + cfg.hvfa.lambda * r.mse_loss);
  }
  CHECK(trace.back().loss.final_loss < trace.front().loss.final_loss);
}

TEST_CASE("lambda zero leaves the decoder untouched") {
  auto cfg = toy::ToyConfig::gradcheck_reference(3);
  cfg.hvfa.lambda = 0.0;
  cfg.steps = 4;
  auto model = toy::ToyModel::build(cfg);
  const auto& d = *model.hvfa.folds[0].decoder;
  const std::vector<double> before(d.w1.data().begin(), d.w1.data().end());
  const std::vector<double> readout(model.head.readout.data().begin(), model.head.readout.data().end());
  toy::train(model);
  CHECK(std::vector<double>(d.w1.data().begin(), d.w1.data().end()) == before);
  CHECK(std::vector<double>(model.head.readout.data().begin(), model.head.readout.data().end()) != readout);
}

TEST_CASE("full forward gradients match finite differences") {
  const PoolVariant variants[] = {PoolVariant::kCrossAttentive, PoolVariant::kCrossLocal, PoolVariant::kMaxPoolOnly,
                                  PoolVariant::kLinearProjector, PoolVariant::kRandomQuery};
  std::uint64_t seed = 100;
  for (auto v : variants) {
    for (std::size_t scales : {2, 3}) {
      for (bool ln : {false, true}) {
        for (bool stop : {false, true}) {
          auto cfg = toy::ToyConfig::gradcheck_reference(seed++);
          cfg.local_scales = scales;
          cfg.hvfa.variant = v;
          cfg.hvfa.layer_norm = ln;
          cfg.hvfa.stopgrad = stop;
          cfg.hvfa.recon_mode = seed % 2 ? ReconMode::kStrict : ReconMode::kBlockMean;
          CAPTURE(to_string(v));
          CAPTURE(scales);
          CAPTURE(ln);
          CAPTURE(stop);
          const auto r = toy::check_gradients(cfg, 1e-5);
          CHECK(r.checked > 0);
          CHECK(r.max_rel_error < 1e-5);
        }
      }
    }
  }
}

TEST_CASE("reconstruction collapses only without stop-gradient") {
  const auto unstopped = toy::toy_train(toy::ToyConfig::collapse_reference(1, false));
  double min_mse = unstopped.front().loss.mse_loss;
  for (const auto& r : unstopped) min_mse = std::min(min_mse, r.loss.mse_loss);
  CHECK(min_mse < 1e-6);

  const auto stopped = toy::toy_train(toy::ToyConfig::collapse_reference(1, true));
  for (const auto& r : stopped) CHECK(r.loss.mse_loss > 1e-3);
  CHECK(stopped.back().loss.task_loss <= 0.5 * stopped.front().loss.task_loss);
}
