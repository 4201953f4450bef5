// One PASS/FAIL line per acceptance criterion; exits nonzero on any failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "cli_helpers.hpp"
#include "hvfa/cost_model.hpp"
#include "hvfa/errors.hpp"
#include "hvfa/hvfa.hpp"
#include "hvfa/ops.hpp"
#include "hvfa/rtpp.hpp"
#include "hvfa/sac.hpp"
#include "hvfa/toy.hpp"
#include "oracles.hpp"

using namespace hvfa;

namespace {

// Accumulates failed checks for one criterion.
struct Check {
  std::vector<std::string> failures;
  void expect(bool ok, const std::string& what) {
    if (!ok && failures.size() < 5) failures.push_back(what);
  }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

const PoolVariant kVariants[] = {PoolVariant::kCrossAttentive, PoolVariant::kCrossLocal, PoolVariant::kMaxPoolOnly,
                                 PoolVariant::kLinearProjector, PoolVariant::kRandomQuery};

HvfaConfig attention_config(PoolVariant v, bool ln) {
  HvfaConfig c;
  c.channels = 4;
  c.heads = 2;
  c.head_dim = 3;
  c.layers = 2;
  c.variant = v;
  c.layer_norm = ln;
  c.zero_init_last_proj = false;
  return c;
}

std::string gradient_correctness(Check& ck) {
  const auto t0 = Clock::now();
  double worst = 0.0;
  int configs = 0;
  std::uint64_t seed = 1000;
  for (auto v : kVariants) {
    for (std::size_t scales : {2, 3}) {
      for (bool ln : {false, true}) {
        auto cfg = toy::ToyConfig::gradcheck_reference(seed);
        Rng pick(seed++);
        cfg.local_scales = scales;
        cfg.hvfa.variant = v;
        cfg.hvfa.layer_norm = ln;
        cfg.hvfa.stopgrad = pick.below(2) == 1;
        cfg.hvfa.recon_mode = pick.below(2) == 1 ? ReconMode::kStrict : ReconMode::kBlockMean;
        cfg.queries = 1 + pick.below(2);
        cfg.cols = 1 + pick.below(2);
        const auto r = toy::check_gradients(cfg, 1e-5);
        worst = std::max(worst, r.max_rel_error);
        ck.expect(r.max_rel_error < 1e-5, std::string(to_string(v)) + " scales " + std::to_string(scales) +
                                              " ln " + std::to_string(ln) + ": " + num(r.max_rel_error));
        ++configs;
      }
    }
  }
  const double secs = seconds_since(t0);
  ck.expect(configs >= 20, "only " + std::to_string(configs) + " configs");
  ck.expect(secs < 120.0, "took " + num(secs) + " s");
  return std::to_string(configs) + " configs, max rel err " + num(worst) + ", " + num(secs) + " s";
}

std::string sac_oracle(Check& ck) {
  Rng rng(2024);
  int agree = 0;
  for (int i = 0; i < 1000; ++i) {
    const long long h = 64 + static_cast<long long>(rng.below(4096 - 64 + 1));
    const long long w = 64 + static_cast<long long>(rng.below(4096 - 64 + 1));
    const int m = rng.below(2) ? 20 : 9;
    const auto got = sac::select_grid({h, w}, sac::GridCatalog(m, 224, 224));
    const auto want = oracle::exhaustive_grid(static_cast<double>(h), static_cast<double>(w), m, 224.0);
    if (got.rows == want.rows && got.cols == want.cols) ++agree;
    else ck.expect(false, std::to_string(h) + "x" + std::to_string(w) + " M=" + std::to_string(m));
  }
  const sac::GridCatalog nine(9, 224, 224);
  const auto g = sac::select_grid({448, 672}, nine);
  double score = 0.0;
  for (const auto& s : sac::score_grids({448, 672}, nine))
    if (s.grid == g) score = s.total();
  ck.expect(g.rows == 2 && g.cols == 3, "worked case grid");
  ck.expect(score == 2.0, "worked case score " + num(score));
  return std::to_string(agree) + "/1000 agree, (448,672) -> (" + std::to_string(g.rows) + "," +
         std::to_string(g.cols) + ") score " + num(score);
}

std::string identities(Check& ck) {
  Rng rng(3);
  int cases = 0;
  for (auto v : {PoolVariant::kCrossAttentive, PoolVariant::kCrossLocal}) {
    for (bool ln : {false, true}) {
      const auto cfg = attention_config(v, ln);
      const auto fine = oracle::random_grid(4, 2, 3, 4, rng);
      const auto pooled = pool_queries(fine);
      auto fold = init_params(cfg, 2, 1, 3, 2, rng).folds[0];
      for (auto& l : fold.attention) l.w_proj = Tensor::zeros(l.w_proj.shape(), true);
      const auto out = pool_variant(fine, fold, cfg);
      ck.expect(oracle::max_abs_diff(out.tensor().data(), pooled.tensor().data()) == 0.0, "zero W_proj");
      ++cases;
    }
  }
  auto cfg = attention_config(PoolVariant::kMaxPoolOnly, false);
  for (double c : {-2.5, 0.0, 0.75}) {
    const FeatureGrid constant(Tensor::full({4, 6, 2, 4}, c));
    const auto pooled = pool_variant(constant, FoldParams{}, cfg);
    for (double v : pooled.tensor().data()) ck.expect(v == c, "constant max-pool");
    ++cases;
  }
  const auto coarse = oracle::random_grid(2, 3, 2, 4, rng);
  const auto agg = aggregate(coarse, FeatureGrid(Tensor::zeros({2, 3, 2, 4})));
  ck.expect(oracle::max_abs_diff(agg.tensor().data(), coarse.tensor().data()) == 0.0, "zero f_hat aggregation");
  ++cases;
  return std::to_string(cases) + " identity cases exact";
}

std::string locality(Check& ck) {
  Rng rng(4);
  int isolated = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto cfg = attention_config(PoolVariant::kCrossLocal, trial % 2 == 0);
    const std::size_t rows = 1 + rng.below(3), cols = 1 + rng.below(3), q = 1 + rng.below(2);
    const auto fine = oracle::random_grid(2 * rows, 2 * cols, q, 4, rng);
    const auto pooled = pool_queries(fine);
    const auto fold = init_params(cfg, rows, cols, q, 2, rng).folds[0];
    const auto base = cross_local_attentive_pool(pooled, fine, fold, cfg);
    const std::size_t fi = rng.below(2 * rows), fj = rng.below(2 * cols);
    std::vector<double> vals(fine.tensor().data().begin(), fine.tensor().data().end());
    for (std::size_t k = 0; k < q * 4; ++k) vals[(fi * 2 * cols + fj) * q * 4 + k] += rng.uniform(0.5, 2.0);
    const auto out = cross_local_attentive_pool(pooled, FeatureGrid(Tensor::from(fine.tensor().shape(), vals)), fold, cfg);
    bool ok = true;
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) {
        if (i == fi / 2 && j == fj / 2) continue;
        for (std::size_t k = 0; k < q; ++k)
          for (std::size_t c = 0; c < 4; ++c) ok &= base.tensor().at({i, j, k, c}) == out.tensor().at({i, j, k, c});
      }
    ck.expect(ok, "perturbation leaked in trial " + std::to_string(trial));
    isolated += ok;
  }
  double worst = 0.0;
  for (bool ln : {false, true}) {
    const auto cfg = attention_config(PoolVariant::kCrossLocal, ln);
    const auto fine = oracle::random_grid(2, 2, 3, 4, rng);
    const auto pooled = pool_queries(fine);
    const auto fold = init_params(cfg, 1, 1, 3, 2, rng).folds[0];
    worst = std::max(worst, oracle::max_abs_diff(cross_local_attentive_pool(pooled, fine, fold, cfg).tensor().data(),
                                                 cross_attentive_pool(pooled, fine, fold, cfg).tensor().data()));
  }
  ck.expect(worst < 1e-12, "1x1 equivalence " + num(worst));
  return std::to_string(isolated) + "/100 isolated, 1x1 max diff " + num(worst);
}

std::string stop_gradient(Check& ck) {
  const auto t0 = Clock::now();
  double leaked = 0.0;
  for (auto mode : {ReconMode::kBlockMean, ReconMode::kStrict}) {
    auto cfg = attention_config(PoolVariant::kCrossAttentive, true);
    cfg.recon_mode = mode;
    Rng rng(5);
    Tensor extractor = Tensor::uniform({3, 4}, -1, 1, rng, true);
    const Tensor inputs = Tensor::uniform({16, 3}, -1, 1, rng);
    const auto fold = init_params(cfg, 1, 2, 2, 2, rng).folds[0];
    const auto fine = FeatureGrid::from_tokens(matmul(inputs, extractor), 2, 4, 2);
    const auto pooled = oracle::random_grid(1, 2, 2, 4, rng);
    recon_loss(pooled, fine, fold, cfg).backward();
    for (double g : extractor.grad()) leaked = std::max(leaked, std::abs(g));
  }
  ck.expect(leaked == 0.0, "target-path gradient " + num(leaked));

  const auto unstopped = toy::toy_train(toy::ToyConfig::collapse_reference(1, false));
  double min_mse = unstopped.front().loss.mse_loss;
  for (const auto& r : unstopped) min_mse = std::min(min_mse, r.loss.mse_loss);
  ck.expect(min_mse < 1e-6, "no-stopgrad min MSE " + num(min_mse));

  const auto stopped = toy::toy_train(toy::ToyConfig::collapse_reference(1, true));
  double floor = stopped.front().loss.mse_loss;
  for (const auto& r : stopped) floor = std::min(floor, r.loss.mse_loss);
  const double task0 = stopped.front().loss.task_loss, task1 = stopped.back().loss.task_loss;
  ck.expect(floor > 1e-3, "stopgrad MSE fell to " + num(floor));
  ck.expect(task1 <= 0.5 * task0, "task loss " + num(task0) + " -> " + num(task1));
  const double secs = seconds_since(t0);
  ck.expect(secs < 60.0, "took " + num(secs) + " s");
  return "target grad " + num(leaked) + "; no stopgrad min MSE " + num(min_mse) + "; stopgrad min MSE " +
         num(floor) + ", task " + num(task0) + " -> " + num(task1) + ", " + num(secs) + " s";
}

std::string loss_composition(Check& ck) {
  double worst = 0.0;
  int cases = 0;
  for (double lambda : {0.0, 0.01, 0.1, 1.0}) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      auto cfg = toy::ToyConfig::gradcheck_reference(seed);
      cfg.hvfa.lambda = lambda;
      const auto f = toy::ToyModel::build(cfg).forward();
      const double err = std::abs(f.total.item() - (f.task.item() + lambda * f.mse.item()));
      const auto b = final_loss(f.task.item(), f.mse.item(), lambda);
      worst = std::max({worst, err, std::abs(b.final_loss - f.total.item())});
      ++cases;
    }
  }
  ck.expect(worst <= 1e-12, "max error " + num(worst));
  return std::to_string(cases) + " cases over lambda {0, 0.01, 0.1, 1}, max error " + num(worst);
}

std::vector<rtpp::TokenizedDoc> corpus_with_lengths(const std::vector<std::size_t>& lengths) {
  std::vector<rtpp::TokenizedDoc> out;
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    rtpp::TokenizedDoc d{"d" + std::to_string(i), {}};
    for (std::size_t t = 0; t < lengths[i]; ++t) d.tokens.push_back("t" + std::to_string(t));
    out.push_back(std::move(d));
  }
  return out;
}

std::string truncation_free(Check& ck) {
  const std::size_t l_max = 32;
  Rng rng(7);
  std::vector<std::size_t> lengths(10000);
  for (auto& l : lengths) l = 1 + rng.below(10 * l_max);
  lengths[0] = 1;
  lengths[1] = 10 * l_max;
  const auto corpus = corpus_with_lengths(lengths);
  rtpp::GenConfig cfg;
  cfg.l_max = l_max;
  cfg.seed = 11;
  cfg.task_mix = rtpp::parse_task_mix("rpt_first=0.2,rpt_middle=0.2,rpt_last=0.2,ptp=0.4");
  std::size_t over = 0;
  for (const auto& s : rtpp::generate_batch(corpus, cfg)) {
    const auto payload = s.kind == rtpp::TaskKind::kPtp ? s.payload_tokens : rtpp::whitespace_tokenize(s.answer).size();
    over += payload > l_max;
  }
  ck.expect(over == 0, std::to_string(over) + " over-capacity answers");

  cfg.task_mix = rtpp::parse_task_mix("rft=1");
  std::size_t truncated = 0, long_docs = 0;
  for (const auto& s : rtpp::generate_batch(corpus, cfg)) truncated += s.truncated;
  for (auto l : lengths) long_docs += l > l_max;
  ck.expect(truncated == long_docs, "RFT truncated " + std::to_string(truncated) + " vs " + std::to_string(long_docs));

  std::vector<std::size_t> mixed(200, 16);
  for (std::size_t i = 0; i < 67; ++i) mixed[i] = 48;
  std::size_t t2 = 0;
  for (const auto& s : rtpp::generate_batch(corpus_with_lengths(mixed), cfg)) t2 += s.truncated;
  const double rate = static_cast<double>(t2) / 200.0;
  ck.expect(rate == 0.335, "constructed corpus rate " + num(rate));
  return "0 of 10000 over l_max; RFT truncated " + std::to_string(truncated) + " = long docs " +
         std::to_string(long_docs) + "; constructed corpus rate " + num(rate);
}

std::string rtpp_algebra(Check& ck) {
  Rng rng(8);
  int trials = 0;
  for (; trials < 10000; ++trials) {
    const std::size_t l = 1 + rng.below(5000), l_max = 1 + rng.below(2048);
    const double c = rtpp::coverage(l, l_max);
    ck.expect(c == std::min(1.0, static_cast<double>(l_max) / static_cast<double>(l)), "coverage");
    const double c_min = 0.3;
    const double t = rtpp::sample_range(c, c_min, rng);
    ck.expect(c <= c_min ? t == c : (t > c_min && t < c), "sample_range branch");

    const auto f = rtpp::sample_positions(rtpp::RangeKind::kFirst, t, rng);
    const auto m = rtpp::sample_positions(rtpp::RangeKind::kMiddle, t, rng);
    const auto e = rtpp::sample_positions(rtpp::RangeKind::kLast, t, rng);
    ck.expect(f.p_start == 0.0 && f.p_end == t, "first range");
    ck.expect(e.p_end == 1.0 && e.p_start == 1.0 - t, "last range");
    ck.expect(std::abs((m.p_end - m.p_start) - t) < 1e-15 && m.p_start >= 0.0, "middle width");

    rtpp::TokenizedDoc doc{"x", {}};
    const std::size_t n = 2 + rng.below(300);
    for (std::size_t i = 0; i < n; ++i) doc.tokens.push_back(std::to_string(i));
    double a = rng.uniform01(), b = rng.uniform01();
    if (a > b) std::swap(a, b);
    const std::size_t ia = rtpp::boundary_index(a, n), ib = rtpp::boundary_index(b, n);
    if (ia > 0 && ia < ib && ib < n) {
      auto joined = rtpp::slice_tokens(doc, {rtpp::RangeKind::kFirst, 0.0, a, a});
      const auto mid = rtpp::slice_tokens(doc, {rtpp::RangeKind::kMiddle, a, b, b - a});
      const auto last = rtpp::slice_tokens(doc, {rtpp::RangeKind::kLast, b, 1.0, 1.0 - b});
      joined.insert(joined.end(), mid.begin(), mid.end());
      joined.insert(joined.end(), last.begin(), last.end());
      ck.expect(joined == doc.tokens, "partition");
    }
    const auto ptp = rtpp::render_ptp(doc, m, 1u << 20, rng);
    const auto [pa, pb] = rtpp::parse_ptp_answer(ptp.answer);
    ck.expect(std::abs(pa - m.p_start) <= 0.005 + 1e-12 && std::abs(pb - m.p_end) <= 0.005 + 1e-12, "PTP round trip");
  }
  return std::to_string(trials) + " seeded trials";
}

std::string cost_model(Check& ck) {
  const auto growth = cost::compare({{3, 3}, 1, 32, false}, {{3, 3}, 2, 32, false});
  ck.expect(growth.asymptotic_llm_ratio == 25.0, "LLM ratio " + num(growth.asymptotic_llm_ratio));
  ck.expect(growth.asymptotic_encoder_ratio == 5.0, "encoder ratio " + num(growth.asymptotic_encoder_ratio));
  const auto folded = cost::estimate({{3, 3}, 2, 32, true});
  const auto plain = cost::estimate({{3, 3}, 2, 32, false});
  ck.expect(folded.visual_tokens == 320 && plain.visual_tokens == 1472, "token counts");
  const double ratio = cost::compare({{3, 3}, 2, 32, true}, {{3, 3}, 2, 32, false}).llm_ratio;
  ck.expect(std::abs(ratio - 21.16) <= 1e-9, "quadratic ratio " + num(ratio));
  const auto three = cost::estimate({{3, 3}, 3, 32, true});
  ck.expect(three.visual_tokens == folded.visual_tokens, "third scale changed HVFA tokens");
  char buf[160];
  std::snprintf(buf, sizeof buf, "25x/5x asymptotic, tokens %lld vs %lld, ratio %.12g, 3-scale HVFA %lld",
                static_cast<long long>(folded.visual_tokens), static_cast<long long>(plain.visual_tokens), ratio,
                static_cast<long long>(three.visual_tokens));
  return buf;
}

std::string determinism(Check& ck) {
  clitest::ScratchDir dir("hvfa_acceptance_det");
  clitest::spit(dir / "corpus.jsonl", clitest::sample_corpus());
  struct Case {
    std::string name;
    std::vector<std::string> args;
    std::string file;  // output file compared as well, relative to the run directory
  };
  const std::vector<Case> cases = {
      {"hvfa-demo", {"hvfa-demo", "--seed", "7", "--scales", "3", "--output", "{dir}/agg.hvft", "--write-inputs", "{dir}/in"}, "agg.hvft"},
      {"gradcheck", {"gradcheck", "--seed", "7", "--json"}, ""},
      {"collapse-demo", {"collapse-demo", "--seed", "7", "--steps", "20"}, ""},
      {"rtpp-gen", {"rtpp-gen", "--corpus", (dir / "corpus.jsonl").string(), "--seed", "7", "--lmax", "24",
                    "--threads", "{threads}", "--out", "{dir}/samples.jsonl", "--json"}, "samples.jsonl"},
  };
  int identical = 0;
  for (const auto& c : cases) {
    std::string outputs[2], files[2];
    for (int run = 0; run < 2; ++run) {
      const auto sub = dir.path / ("run" + std::to_string(run) + c.name);
      std::filesystem::create_directories(sub);
      std::vector<std::string> args;
      for (auto a : c.args) {
        if (const auto p = a.find("{dir}"); p != std::string::npos) a.replace(p, 5, sub.string());
        if (a == "{threads}") a = run == 0 ? "1" : "3";
        args.push_back(a);
      }
      const auto r = clitest::run(args);
      ck.expect(r.code == 0, c.name + " exit " + std::to_string(r.code) + ": " + r.err);
      outputs[run] = r.out;
      // Paths differ between runs; compare stdout with them masked.
      for (auto p = outputs[run].find(sub.string()); p != std::string::npos; p = outputs[run].find(sub.string()))
        outputs[run].replace(p, sub.string().size(), "<dir>");
      if (!c.file.empty()) files[run] = clitest::slurp(sub / c.file);
    }
    const bool same = outputs[0] == outputs[1] && files[0] == files[1] && !outputs[0].empty() &&
                      (c.file.empty() || !files[0].empty());
    ck.expect(same, c.name + " differs between runs");
    identical += same;
  }
  return std::to_string(identical) + "/" + std::to_string(cases.size()) + " randomized subcommands byte-identical";
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<std::string(Check&)>>> criteria = {
      {"gradient correctness", gradient_correctness},
      {"SAC oracle equivalence", sac_oracle},
      {"residual/identity suite", identities},
      {"locality and equivalence", locality},
      {"stop-gradient contract and collapse", stop_gradient},
      {"loss composition", loss_composition},
      {"RTPP truncation-freeness", truncation_free},
      {"RTPP algebra", rtpp_algebra},
      {"cost model", cost_model},
      {"determinism", determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Check ck;
    std::string detail;
    try {
      detail = criteria[i].second(ck);
    } catch (const std::exception& e) {
      ck.failures.push_back(std::string("exception: ") + e.what());
    }
    const bool ok = ck.failures.empty();
    failed += !ok;
    std::printf("%s %zu %s: %s\n", ok ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), detail.c_str());
    for (const auto& f : ck.failures) std::printf("    %s\n", f.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
