#include "hvfa/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <nlohmann/json.hpp>

#include "hvfa/cost_model.hpp"
#include "hvfa/errors.hpp"
#include "hvfa/hvfa.hpp"
#include "hvfa/rtpp.hpp"
#include "hvfa/sac.hpp"
#include "hvfa/tensor_io.hpp"
#include "hvfa/toy.hpp"

namespace hvfa::cli {

namespace {

using json = nlohmann::ordered_json;

enum class LogLevel { kError = 0, kInfo = 1, kDebug = 2 };

LogLevel log_level() {
  const char* v = std::getenv("HVFA_LOG");
  if (!v) return LogLevel::kError;
  const std::string s(v);
  if (s == "debug") return LogLevel::kDebug;
  if (s == "info") return LogLevel::kInfo;
  return LogLevel::kError;
}

class Logger {
 public:
  explicit Logger(std::ostream& err) : err_(err), level_(log_level()) {}
  void info(const std::string& msg) const { emit(LogLevel::kInfo, "info", msg); }
  void debug(const std::string& msg) const { emit(LogLevel::kDebug, "debug", msg); }
  void error(const std::string& msg) const { err_ << "error: " << msg << '\n'; }

 private:
  void emit(LogLevel at, const char* tag, const std::string& msg) const {
    if (level_ >= at) err_ << tag << ": " << msg << '\n';
  }
  std::ostream& err_;
  LogLevel level_;
};

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Settings for hvfa-demo and gradcheck; field names double as option names.
struct ToyOptions {
  std::optional<std::uint64_t> seed;
  std::size_t rows = 1, cols = 1, queries = 2, input_channels = 3, scales = 2;
  std::size_t vocab = 5, answer_length = 3;
  std::size_t channels = 4, heads = 2, head_dim = 2, layers = 2, recon_hidden = 0;
  std::string variant = "cross-attentive";
  std::string recon_mode = "block-mean";
  bool layer_norm = true;
  bool reconstruction = true;
  bool stopgrad = true;
  bool no_stopgrad = false;
  bool zero_init_last_proj = false;
  double lambda = 0.1;

  void bind(CLI::App* app) {
    app->add_option("--seed", seed, "Random seed (required)");
    app->add_option("--rows", rows, "Coarsest local grid rows");
    app->add_option("--cols", cols, "Coarsest local grid columns");
    app->add_option("--queries", queries, "Query tokens per sub-image");
    app->add_option("--input-channels", input_channels, "Toy extractor input width");
    app->add_option("--scales", scales, "Local scales (2 or 3)");
    app->add_option("--vocab", vocab, "Toy vocabulary size");
    app->add_option("--answer-length", answer_length, "Toy answer tokens");
    app->add_option("--channels", channels, "Feature channels");
    app->add_option("--heads", heads, "Attention heads");
    app->add_option("--head-dim", head_dim, "Per-head width");
    app->add_option("--layers", layers, "Stacked cross-attention layers");
    app->add_option("--recon-hidden", recon_hidden, "Decoder hidden width (0 = 2*channels)");
    app->add_option("--variant", variant, "cross-attentive|cross-local|maxpool-only|linear-projector|random-query");
    app->add_option("--recon-mode", recon_mode, "block-mean|strict");
    app->add_option("--layer-norm", layer_norm, "Pre-normalize query and key/value streams");
    app->add_option("--reconstruction", reconstruction, "Include the reconstruction loss");
    app->add_option("--stopgrad", stopgrad, "Stop gradients through the reconstruction target");
    app->add_flag("--no-stopgrad", no_stopgrad, "Let gradients flow through the reconstruction target");
    app->add_option("--zero-init-last-proj", zero_init_last_proj, "Start the last projection at zero");
    app->add_option("--lambda", lambda, "Reconstruction loss weight");
  }

  toy::ToyConfig to_config() const {
    toy::ToyConfig c;
    c.seed = *seed;
    c.rows = rows;
    c.cols = cols;
    c.queries = queries;
    c.input_channels = input_channels;
    c.local_scales = scales;
    c.vocab = vocab;
    c.answer_length = answer_length;
    c.hvfa.channels = channels;
    c.hvfa.heads = heads;
    c.hvfa.head_dim = head_dim;
    c.hvfa.layers = layers;
    c.hvfa.recon_hidden = recon_hidden;
    c.hvfa.variant = parse_variant(variant);
    c.hvfa.recon_mode = parse_recon_mode(recon_mode);
    c.hvfa.layer_norm = layer_norm;
    c.hvfa.reconstruction = reconstruction;
    c.hvfa.stopgrad = stopgrad && !no_stopgrad;
    c.hvfa.zero_init_last_proj = zero_init_last_proj;
    c.hvfa.lambda = lambda;
    c.validate();
    return c;
  }
};

void require_seed(const std::optional<std::uint64_t>& seed) {
  if (!seed) throw ConfigError("--seed is required (randomized subcommands never seed from the clock)");
}

json grid_json(sac::GridSpec g) { return json::array({g.rows, g.cols}); }

json loss_json(const LossBreakdown& l) {
  return {{"task_loss", l.task_loss}, {"mse_loss", l.mse_loss}, {"final_loss", l.final_loss}, {"lambda", l.lambda}};
}

json estimate_json(const cost::CostEstimate& e) {
  return {{"sub_images", e.sub_images},
          {"visual_tokens", e.visual_tokens},
          {"llm_cost_units", e.llm_cost_units},
          {"encoder_cost_units", e.encoder_cost_units}};
}

// Converts config-file entries into argument tokens for `app`. Keys map to
// long options (underscores become dashes). Keys the user already passed on
// the command line are skipped so flags win.
std::vector<std::string> config_args(const std::filesystem::path& path, CLI::App* app,
                                     const std::vector<std::string>& user_args) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  if (!j.is_object()) throw ConfigError(path.string() + ": config must be a JSON object");

  const auto user_has = [&](const std::string& flag) {
    for (const auto& a : user_args)
      if (a == flag || a.rfind(flag + "=", 0) == 0) return true;
    return false;
  };
  const auto scalar = [&](const nlohmann::json& v, const std::string& key) -> std::string {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_number_integer() || v.is_number_unsigned()) return v.dump();
    if (v.is_number_float()) return fmt_double(v.get<double>());
    throw ConfigError(path.string() + ": unsupported value for '" + key + "'");
  };

  std::vector<std::string> out;
  for (const auto& [key, value] : j.items()) {
    std::string name = key;
    for (auto& ch : name)
      if (ch == '_') ch = '-';
    const std::string flag = "--" + name;
    const CLI::Option* opt = app->get_option_no_throw(flag);
    if (!opt || name == "config") throw ConfigError(path.string() + ": unknown key '" + key + "'");
    if (user_has(flag)) continue;
    if (value.is_array()) {
      for (const auto& v : value) {
        out.push_back(flag);
        out.push_back(scalar(v, key));
      }
    } else {
      out.push_back(flag + "=" + scalar(value, key));
    }
  }
  return out;
}

int run_sac_plan(long long height, long long width, int max_subimages, int patch, int scales, bool as_json,
                 std::ostream& out) {
  const sac::GridCatalog catalog(max_subimages, patch, patch);
  const sac::ImageDims image{height, width};
  const auto scores = sac::score_grids(image, catalog);
  const sac::GridSpec best = sac::select_grid(image, catalog);
  double best_total = 0.0;
  for (const auto& s : scores)
    if (s.grid == best) best_total = s.total();
  const auto plans = sac::pyramid_plan(image, catalog, scales);

  if (as_json) {
    json j;
    j["image"] = {{"height", height}, {"width", width}};
    j["max_subimages"] = max_subimages;
    j["patch"] = patch;
    j["grid"] = grid_json(best);
    j["score"] = best_total;
    json sj = json::array();
    for (const auto& s : scores) {
      sj.push_back({{"grid", grid_json(s.grid)}, {"s_rr", s.resolution}, {"s_ra", s.shape}, {"total", s.total()}});
    }
    j["scores"] = std::move(sj);
    json pj = json::array();
    for (const auto& p : plans) {
      json rects = json::array();
      for (const auto& r : p.rects) rects.push_back({r.top, r.left, r.height, r.width});
      pj.push_back({{"scale", p.scale_index},
                    {"grid", grid_json(p.grid)},
                    {"resize", {p.resize_height, p.resize_width}},
                    {"rects", std::move(rects)}});
    }
    j["pyramid"] = std::move(pj);
    out << j.dump() << '\n';
    return kExitOk;
  }
  out << "image " << height << "x" << width << ", max sub-images " << max_subimages << ", patch " << patch << '\n';
  out << "selected grid " << best.rows << "x" << best.cols << " (score " << best_total << ")\n";
  for (const auto& p : plans) {
    out << "  scale " << p.scale_index << ": grid " << p.grid.rows << "x" << p.grid.cols << ", "
        << p.rects.size() << " crops resized to " << p.resize_height << "x" << p.resize_width << '\n';
  }
  return kExitOk;
}

int run_hvfa_demo(const ToyOptions& opts, const std::vector<std::string>& inputs, const std::string& global_path,
                  const std::string& output, const std::string& write_inputs, const Logger& log,
                  std::ostream& out) {
  require_seed(opts.seed);
  const toy::ToyConfig cfg = opts.to_config();
  const toy::ToyModel model = toy::ToyModel::build(cfg);
  toy::ToyModel::Features feats = model.features();
  if (!inputs.empty()) {
    if (inputs.size() != cfg.local_scales) {
      throw ConfigError("expected " + std::to_string(cfg.local_scales) + " --input files, got " +
                        std::to_string(inputs.size()));
    }
    feats.local.clear();
    for (const auto& p : inputs) {
      feats.local.emplace_back(load_hvft(p));
      log.info("loaded " + p + " " + shape_str(feats.local.back().tensor().shape()));
    }
  }
  if (!global_path.empty()) feats.global = FeatureGrid(load_hvft(global_path));
  if (!write_inputs.empty()) {
    std::filesystem::create_directories(write_inputs);
    save_hvft(std::filesystem::path(write_inputs) / "global.hvft", feats.global.tensor());
    for (std::size_t s = 0; s < feats.local.size(); ++s) {
      save_hvft(std::filesystem::path(write_inputs) / ("scale" + std::to_string(s + 1) + ".hvft"),
                feats.local[s].tensor());
    }
  }
  const auto f = model.evaluate(feats.global, feats.local);
  const LossBreakdown loss = final_loss(f.task.item(), f.mse.item(), cfg.hvfa.lambda);
  if (!output.empty()) save_hvft(output, f.aggregated.tensor());

  json j;
  j["variant"] = std::string(to_string(cfg.hvfa.variant));
  j["scales"] = cfg.local_scales;
  j["stopgrad"] = cfg.hvfa.stopgrad;
  j["layer_norm"] = cfg.hvfa.layer_norm;
  j["recon_mode"] = std::string(to_string(cfg.hvfa.recon_mode));
  j["output_shape"] = f.aggregated.tensor().shape();
  j["downstream_tokens"] = f.downstream.dim(0);
  j["parameters"] = model.hvfa.parameter_count();
  j["loss"] = loss_json(loss);
  out << j.dump() << '\n';
  return kExitOk;
}

int run_gradcheck(const ToyOptions& opts, double eps, double tol, bool as_json, std::ostream& out) {
  require_seed(opts.seed);
  const toy::ToyConfig cfg = opts.to_config();
  const GradcheckReport r = toy::check_gradients(cfg, eps);
  const bool ok = r.max_rel_error < tol;
  if (as_json) {
    json j;
    j["max_rel_error"] = r.max_rel_error;
    j["checked"] = r.checked;
    j["eps"] = eps;
    j["tolerance"] = tol;
    j["pass"] = ok;
    out << j.dump() << '\n';
  } else {
    out << "max_rel_error " << fmt_double(r.max_rel_error) << " over " << r.checked << " entries ("
        << (ok ? "pass" : "FAIL") << ", tol " << tol << ")\n";
  }
  return ok ? kExitOk : kExitNumeric;
}

int run_collapse_demo(std::optional<std::uint64_t> seed, std::size_t steps, bool no_stopgrad,
                      std::optional<double> lambda, std::optional<double> lr, std::ostream& out) {
  require_seed(seed);
  toy::ToyConfig cfg = toy::ToyConfig::collapse_reference(*seed, !no_stopgrad);
  cfg.steps = steps;
  if (lambda) cfg.hvfa.lambda = *lambda;
  if (lr) cfg.learning_rate = *lr;
  const auto trace = toy::toy_train(cfg);
  out << "step,task_loss,mse_loss,final_loss\n";
  for (const auto& row : trace) {
    out << row.step << ',' << fmt_double(row.loss.task_loss) << ',' << fmt_double(row.loss.mse_loss) << ','
        << fmt_double(row.loss.final_loss) << '\n';
  }
  return kExitOk;
}

int run_rtpp_gen(const std::string& corpus_path, std::size_t l_max, double c_min, std::optional<std::uint64_t> seed,
                 const std::string& mix, const std::string& out_path, std::size_t threads, bool as_json,
                 const Logger& log, std::ostream& out) {
  require_seed(seed);
  rtpp::GenConfig cfg;
  cfg.l_max = l_max;
  cfg.c_min = c_min;
  cfg.seed = *seed;
  cfg.threads = threads;
  if (!mix.empty()) cfg.task_mix = rtpp::parse_task_mix(mix);
  cfg.validate();

  std::ifstream in(corpus_path);
  if (!in) throw FormatError("cannot open corpus " + corpus_path);
  const auto corpus = rtpp::read_corpus(in, corpus_path);
  log.info("read " + std::to_string(corpus.size()) + " documents from " + corpus_path);
  const auto samples = rtpp::generate_batch(corpus, cfg);

  std::size_t truncated = 0;
  std::array<std::size_t, 5> per_kind{};
  for (const auto& s : samples) {
    truncated += s.truncated ? 1 : 0;
    ++per_kind[static_cast<std::size_t>(s.kind)];
  }
  if (out_path.empty()) {
    rtpp::write_samples(out, samples);
    return kExitOk;
  }
  std::ofstream os(out_path, std::ios::binary);
  if (!os) throw FormatError("cannot open " + out_path + " for writing");
  rtpp::write_samples(os, samples);
  if (as_json) {
    json j;
    j["samples"] = samples.size();
    json kinds;
    for (auto k : rtpp::kAllTasks) kinds[std::string(rtpp::to_string(k))] = per_kind[static_cast<std::size_t>(k)];
    j["kinds"] = std::move(kinds);
    j["rft_truncated"] = truncated;
    j["out"] = out_path;
    out << j.dump() << '\n';
  } else {
    out << "wrote " << samples.size() << " samples to " << out_path << " (" << truncated
        << " truncated RFT samples)\n";
  }
  return kExitOk;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  const Logger log(err);
  CLI::App app{"Multi-scale document feature aggregation toolkit", args.empty() ? "hvfa" : args[0]};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  std::string config_path;
  const auto add_config = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON file of option values; flags override it");
  };

  // sac-plan
  long long height = 0, width = 0;
  int max_subimages = 9, patch = 224, sac_scales = 2;
  bool json_out = false;
  auto* sac_cmd = app.add_subcommand("sac-plan", "Select a crop grid and print the multi-scale crop plan");
  add_config(sac_cmd);
  sac_cmd->add_option("--height", height, "Image height in pixels")->required();
  sac_cmd->add_option("--width", width, "Image width in pixels")->required();
  sac_cmd->add_option("--max-subimages", max_subimages, "Largest sub-image count in the grid catalog");
  sac_cmd->add_option("--patch", patch, "Vision encoder input size (square)");
  sac_cmd->add_option("--scales", sac_scales, "Local scales (2 or 3)");
  sac_cmd->add_flag("--json", json_out, "Print JSON");

  // hvfa-demo
  ToyOptions demo_opts;
  std::vector<std::string> demo_inputs;
  std::string demo_global, demo_output, demo_write_inputs;
  auto* demo_cmd = app.add_subcommand("hvfa-demo", "Run one HVFA forward pass and print the loss breakdown");
  add_config(demo_cmd);
  demo_opts.bind(demo_cmd);
  demo_cmd->add_option("--input", demo_inputs, "HVFT feature grid per local scale, coarse to fine")
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  demo_cmd->add_option("--global", demo_global, "HVFT global-view feature grid");
  demo_cmd->add_option("--output", demo_output, "Write the aggregated grid as HVFT");
  demo_cmd->add_option("--write-inputs", demo_write_inputs, "Directory to save the generated features as HVFT");

  // gradcheck
  ToyOptions gc_opts;
  gc_opts.lambda = 0.5;
  double eps = 1e-5, tol = 1e-5;
  auto* gc_cmd = app.add_subcommand("gradcheck", "Compare HVFA gradients against central differences");
  add_config(gc_cmd);
  gc_opts.bind(gc_cmd);
  gc_cmd->add_option("--eps", eps, "Finite-difference step");
  gc_cmd->add_option("--tol", tol, "Maximum accepted relative error");
  gc_cmd->add_flag("--json", json_out, "Print JSON");

  // collapse-demo
  std::optional<std::uint64_t> cd_seed;
  std::size_t cd_steps = 500;
  bool cd_no_stopgrad = false;
  std::optional<double> cd_lambda, cd_lr;
  auto* cd_cmd = app.add_subcommand("collapse-demo", "Train the toy model and print the loss trace as CSV");
  add_config(cd_cmd);
  cd_cmd->add_option("--seed", cd_seed, "Random seed (required)");
  cd_cmd->add_option("--steps", cd_steps, "Gradient steps");
  cd_cmd->add_flag("--no-stopgrad", cd_no_stopgrad, "Let gradients flow through the reconstruction target");
  cd_cmd->add_option("--lambda", cd_lambda, "Reconstruction loss weight (default 1.0)");
  cd_cmd->add_option("--lr", cd_lr, "Learning rate");

  // rtpp-gen
  std::string corpus, mix, rtpp_out;
  std::size_t l_max = 2048, threads = 1;
  double c_min = 0.3;
  std::optional<std::uint64_t> rtpp_seed;
  auto* rtpp_cmd = app.add_subcommand("rtpp-gen", "Generate relative text-position instruction samples");
  add_config(rtpp_cmd);
  rtpp_cmd->add_option("--corpus", corpus, "Input JSONL of {id, tokens}")->required();
  rtpp_cmd->add_option("--lmax", l_max, "Answer-token capacity");
  rtpp_cmd->add_option("--cmin", c_min, "Minimum coverage fraction");
  rtpp_cmd->add_option("--seed", rtpp_seed, "Random seed (required)");
  rtpp_cmd->add_option("--mix", mix, "Task mix, e.g. rpt_first=0.2,rpt_middle=0.2,rpt_last=0.2,ptp=0.3,rft=0.1");
  rtpp_cmd->add_option("--out", rtpp_out, "Output JSONL (stdout when omitted)");
  rtpp_cmd->add_option("--threads", threads, "Worker threads");
  rtpp_cmd->add_flag("--json", json_out, "Print a JSON summary");

  // cost / cost compare
  int nh = 1, nw = 1, cost_scales = 2, a_scales = 1, b_scales = 2;
  std::int64_t q = 32;
  bool use_hvfa = false, a_hvfa = false, b_hvfa = false;
  auto* cost_cmd = app.add_subcommand("cost", "Visual-token and cost-unit estimate");
  add_config(cost_cmd);
  cost_cmd->add_option("--nh", nh, "Grid rows of local scale 1");
  cost_cmd->add_option("--nw", nw, "Grid columns of local scale 1");
  cost_cmd->add_option("--q", q, "Queries per sub-image");
  cost_cmd->add_option("--scales", cost_scales, "Local scales (1, 2 or 3)");
  cost_cmd->add_flag("--hvfa", use_hvfa, "Fold finer scales with HVFA");
  cost_cmd->add_flag("--json", json_out, "Print JSON");
  auto* cmp_cmd = cost_cmd->add_subcommand("compare", "Cost ratios of configuration b over a");
  add_config(cmp_cmd);
  cmp_cmd->add_option("--nh", nh, "Grid rows of local scale 1");
  cmp_cmd->add_option("--nw", nw, "Grid columns of local scale 1");
  cmp_cmd->add_option("--q", q, "Queries per sub-image");
  cmp_cmd->add_option("--a-scales", a_scales, "Local scales of configuration a");
  cmp_cmd->add_flag("--a-hvfa", a_hvfa, "Configuration a uses HVFA");
  cmp_cmd->add_option("--b-scales", b_scales, "Local scales of configuration b");
  cmp_cmd->add_flag("--b-hvfa", b_hvfa, "Configuration b uses HVFA");
  cmp_cmd->add_flag("--json", json_out, "Print JSON");

  try {
    // Locate the innermost subcommand named on the command line so config
    // keys can be checked against its options before parsing.
    std::vector<std::string> user(args.begin() + (args.empty() ? 0 : 1), args.end());
    CLI::App* target = nullptr;
    std::size_t insert_at = 0;
    for (std::size_t i = 0; i < user.size(); ++i) {
      CLI::App* scope = target ? target : &app;
      if (auto* sub = scope->get_subcommand_no_throw(user[i])) {
        target = sub;
        insert_at = i + 1;
      } else if (!user[i].empty() && user[i][0] == '-') {
        break;
      }
    }
    std::string cfg_file;
    for (std::size_t i = 0; i < user.size(); ++i) {
      if (user[i] == "--config" && i + 1 < user.size()) cfg_file = user[i + 1];
      if (user[i].rfind("--config=", 0) == 0) cfg_file = user[i].substr(9);
    }
    if (!cfg_file.empty() && target) {
      const auto extra = config_args(cfg_file, target, user);
      user.insert(user.begin() + static_cast<std::ptrdiff_t>(insert_at), extra.begin(), extra.end());
      log.debug("config " + cfg_file + " contributed " + std::to_string(extra.size()) + " tokens");
    }
    std::vector<std::string> reversed(user.rbegin(), user.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    log.error(e.what());
    err << app.help();
    return kExitValidation;
  } catch (const ConfigError& e) {
    log.error(e.what());
    return kExitValidation;
  }

  try {
    if (*sac_cmd) {
      if (sac_scales != 2 && sac_scales != 3) throw ConfigError("--scales must be 2 or 3");
      return run_sac_plan(height, width, max_subimages, patch, sac_scales, json_out, out);
    }
    if (*demo_cmd) {
      return run_hvfa_demo(demo_opts, demo_inputs, demo_global, demo_output, demo_write_inputs, log, out);
    }
    if (*gc_cmd) return run_gradcheck(gc_opts, eps, tol, json_out, out);
    if (*cd_cmd) return run_collapse_demo(cd_seed, cd_steps, cd_no_stopgrad, cd_lambda, cd_lr, out);
    if (*rtpp_cmd) {
      return run_rtpp_gen(corpus, l_max, c_min, rtpp_seed, mix, rtpp_out, threads, json_out, log, out);
    }
    if (*cmp_cmd) {
      const cost::ScaleConfig a{{nh, nw}, a_scales, q, a_hvfa};
      const cost::ScaleConfig b{{nh, nw}, b_scales, q, b_hvfa};
      const auto c = cost::compare(a, b);
      if (json_out) {
        json j;
        j["a"] = estimate_json(c.a);
        j["b"] = estimate_json(c.b);
        j["encoder_ratio"] = c.encoder_ratio;
        j["llm_ratio"] = c.llm_ratio;
        j["asymptotic_encoder_ratio"] = c.asymptotic_encoder_ratio;
        j["asymptotic_llm_ratio"] = c.asymptotic_llm_ratio;
        out << j.dump() << '\n';
      } else {
        out << "a: " << c.a.visual_tokens << " tokens, " << c.a.sub_images << " sub-images\n"
            << "b: " << c.b.visual_tokens << " tokens, " << c.b.sub_images << " sub-images\n"
            << "encoder ratio " << c.encoder_ratio << " (asymptotic " << c.asymptotic_encoder_ratio << ")\n"
            << "llm ratio " << c.llm_ratio << " (asymptotic " << c.asymptotic_llm_ratio << ")\n";
      }
      return kExitOk;
    }
    if (*cost_cmd) {
      const auto e = cost::estimate({{nh, nw}, cost_scales, q, use_hvfa});
      if (json_out) {
        json j = estimate_json(e);
        j["grid"] = json::array({nh, nw});
        j["scales"] = cost_scales;
        j["q"] = q;
        j["hvfa"] = use_hvfa;
        out << j.dump() << '\n';
      } else {
        out << e.sub_images << " sub-images, " << e.visual_tokens << " visual tokens, LLM cost "
            << e.llm_cost_units << ", encoder cost " << e.encoder_cost_units << '\n';
      }
      return kExitOk;
    }
  } catch (const NumericError& e) {
    log.error(e.what());
    return kExitNumeric;
  } catch (const std::exception& e) {
    log.error(e.what());
    return kExitValidation;
  }
  err << app.help();
  return kExitValidation;
}

}  // namespace hvfa::cli
