#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <string>
#include <vector>

#include "hvfa/cost_model.hpp"
#include "hvfa/errors.hpp"
#include "hvfa/hvfa.hpp"
#include "hvfa/rtpp.hpp"
#include "hvfa/sac.hpp"
#include "hvfa/tensor_io.hpp"
#include "hvfa/toy.hpp"

namespace py = pybind11;
using namespace pybind11::literals;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

hvfa::Tensor to_tensor(const Array& a) {
  hvfa::Shape shape(a.shape(), a.shape() + a.ndim());
  return hvfa::Tensor::from(std::move(shape), std::vector<double>(a.data(), a.data() + a.size()));
}

Array to_array(const hvfa::Tensor& t) {
  Array out(std::vector<py::ssize_t>(t.shape().begin(), t.shape().end()));
  std::copy(t.data().begin(), t.data().end(), out.mutable_data());
  return out;
}

py::dict grid_dict(hvfa::sac::GridSpec g) { return py::dict("rows"_a = g.rows, "cols"_a = g.cols); }

py::dict estimate_dict(const hvfa::cost::CostEstimate& e) {
  return py::dict("sub_images"_a = e.sub_images, "local_sub_images"_a = e.local_sub_images,
                  "visual_tokens"_a = e.visual_tokens, "llm_cost_units"_a = e.llm_cost_units,
                  "encoder_cost_units"_a = e.encoder_cost_units);
}

py::dict loss_dict(const hvfa::LossBreakdown& l) {
  return py::dict("task_loss"_a = l.task_loss, "mse_loss"_a = l.mse_loss, "final_loss"_a = l.final_loss,
                  "lambda"_a = l.lambda);
}

hvfa::HvfaConfig make_config(std::size_t channels, std::size_t heads, std::size_t head_dim, std::size_t layers,
                             const std::string& variant, bool layer_norm, const std::string& recon_mode,
                             bool stopgrad, double lambda) {
  hvfa::HvfaConfig c;
  c.channels = channels;
  c.heads = heads;
  c.head_dim = head_dim;
  c.layers = layers;
  c.variant = hvfa::parse_variant(variant);
  c.layer_norm = layer_norm;
  c.recon_mode = hvfa::parse_recon_mode(recon_mode);
  c.stopgrad = stopgrad;
  c.lambda = lambda;
  c.validate();
  return c;
}

}  // namespace

PYBIND11_MODULE(_hvfa, m) {
  m.doc() = "Multi-scale cropping, hierarchical feature aggregation and position-aware instruction data";

  py::register_exception<hvfa::FormatError>(m, "FormatError", PyExc_ValueError);
  py::register_exception<hvfa::NumericError>(m, "NumericError", PyExc_ArithmeticError);

  // sac
  m.def("iou_aligned", &hvfa::sac::iou_aligned, "h_a"_a, "w_a"_a, "h_b"_a, "w_b"_a);
  m.def(
      "select_grid",
      [](long long h, long long w, int max_subimages, int patch) {
        const auto g = hvfa::sac::select_grid({h, w}, hvfa::sac::GridCatalog(max_subimages, patch, patch));
        return py::make_tuple(g.rows, g.cols);
      },
      "height"_a, "width"_a, "max_subimages"_a = 9, "patch"_a = 224);
  m.def(
      "score_grids",
      [](long long h, long long w, int max_subimages, int patch) {
        py::list out;
        for (const auto& s : hvfa::sac::score_grids({h, w}, hvfa::sac::GridCatalog(max_subimages, patch, patch))) {
          out.append(py::dict("grid"_a = py::make_tuple(s.grid.rows, s.grid.cols), "s_rr"_a = s.resolution,
                              "s_ra"_a = s.shape, "total"_a = s.total()));
        }
        return out;
      },
      "height"_a, "width"_a, "max_subimages"_a = 9, "patch"_a = 224);
  m.def(
      "pyramid_plan",
      [](long long h, long long w, int max_subimages, int patch, int scales) {
        py::list out;
        const hvfa::sac::GridCatalog catalog(max_subimages, patch, patch);
        for (const auto& p : hvfa::sac::pyramid_plan({h, w}, catalog, scales)) {
          py::list rects;
          for (const auto& r : p.rects) rects.append(py::make_tuple(r.top, r.left, r.height, r.width));
          out.append(py::dict("scale"_a = p.scale_index, "grid"_a = py::make_tuple(p.grid.rows, p.grid.cols),
                              "resize"_a = py::make_tuple(p.resize_height, p.resize_width), "rects"_a = rects));
        }
        return out;
      },
      "height"_a, "width"_a, "max_subimages"_a = 9, "patch"_a = 224, "scales"_a = 2);

  // cost model
  m.def(
      "cost_estimate",
      [](int nh, int nw, std::int64_t q, int scales, bool use_hvfa) {
        return estimate_dict(hvfa::cost::estimate({{nh, nw}, scales, q, use_hvfa}));
      },
      "nh"_a, "nw"_a, "q"_a = 32, "scales"_a = 2, "hvfa"_a = false);
  m.def(
      "cost_compare",
      [](int nh, int nw, std::int64_t q, int a_scales, bool a_hvfa, int b_scales, bool b_hvfa) {
        const auto c = hvfa::cost::compare({{nh, nw}, a_scales, q, a_hvfa}, {{nh, nw}, b_scales, q, b_hvfa});
        return py::dict("a"_a = estimate_dict(c.a), "b"_a = estimate_dict(c.b), "encoder_ratio"_a = c.encoder_ratio,
                        "llm_ratio"_a = c.llm_ratio, "asymptotic_encoder_ratio"_a = c.asymptotic_encoder_ratio,
                        "asymptotic_llm_ratio"_a = c.asymptotic_llm_ratio);
      },
      "nh"_a, "nw"_a, "q"_a = 32, "a_scales"_a = 1, "a_hvfa"_a = false, "b_scales"_a = 2, "b_hvfa"_a = false);

  // rtpp
  m.def("coverage", &hvfa::rtpp::coverage, "length"_a, "l_max"_a);
  m.def("boundary_index", &hvfa::rtpp::boundary_index, "p"_a, "length"_a);
  m.def("percent", &hvfa::rtpp::percent, "fraction"_a);
  m.def("parse_ptp_answer", &hvfa::rtpp::parse_ptp_answer, "answer"_a);
  m.def("whitespace_tokenize", &hvfa::rtpp::whitespace_tokenize, "text"_a);
  m.def(
      "rtpp_generate",
      [](const std::vector<std::pair<std::string, std::vector<std::string>>>& corpus, std::size_t l_max,
         double c_min, std::uint64_t seed, const std::string& mix, std::size_t threads) {
        hvfa::rtpp::GenConfig cfg;
        cfg.l_max = l_max;
        cfg.c_min = c_min;
        cfg.seed = seed;
        cfg.threads = threads;
        if (!mix.empty()) cfg.task_mix = hvfa::rtpp::parse_task_mix(mix);
        cfg.validate();
        std::vector<hvfa::rtpp::TokenizedDoc> docs;
        docs.reserve(corpus.size());
        for (const auto& [id, tokens] : corpus) docs.push_back({id, tokens});
        std::vector<hvfa::rtpp::InstructionSample> samples;
        {
          py::gil_scoped_release release;
          samples = hvfa::rtpp::generate_batch(docs, cfg);
        }
        py::list out;
        for (const auto& s : samples) {
          py::dict d("id"_a = s.id, "kind"_a = std::string(hvfa::rtpp::to_string(s.kind)), "prompt"_a = s.prompt,
                     "answer"_a = s.answer, "payload_tokens"_a = s.payload_tokens, "truncated"_a = s.truncated);
          if (s.range) {
            d["p_start"] = s.range->p_start;
            d["p_end"] = s.range->p_end;
          } else {
            d["p_start"] = py::none();
            d["p_end"] = py::none();
          }
          out.append(d);
        }
        return out;
      },
      "corpus"_a, "l_max"_a = 2048, "c_min"_a = 0.3, "seed"_a, "mix"_a = "", "threads"_a = 1);

  // tensors
  m.def(
      "save_hvft", [](const std::string& path, const Array& a) { hvfa::save_hvft(path, to_tensor(a)); }, "path"_a,
      "array"_a);
  m.def(
      "load_hvft", [](const std::string& path) { return to_array(hvfa::load_hvft(path)); }, "path"_a);

  // hvfa
  m.def(
      "final_loss", [](double task, double mse, double lambda) { return loss_dict(hvfa::final_loss(task, mse, lambda)); },
      "task"_a, "mse"_a, "lambda_"_a = 0.1);
  m.def(
      "hvfa_forward",
      [](const std::vector<Array>& local, std::uint64_t seed, std::size_t heads, std::size_t head_dim,
         std::size_t layers, const std::string& variant, bool layer_norm, const std::string& recon_mode,
         bool stopgrad, double lambda) {
        if (local.empty()) throw hvfa::ShapeError("hvfa_forward needs at least one feature grid");
        std::vector<hvfa::FeatureGrid> grids;
        for (const auto& a : local) {
          if (a.ndim() != 4) throw hvfa::DimensionError("feature grids must be rank 4 [rows, cols, q, c]");
          grids.emplace_back(to_tensor(a));
        }
        const auto& coarse = grids.front();
        const auto cfg =
            make_config(coarse.channels(), heads, head_dim, layers, variant, layer_norm, recon_mode, stopgrad, lambda);
        hvfa::Rng rng(seed);
        const auto params =
            hvfa::init_params(cfg, coarse.rows(), coarse.cols(), coarse.queries(), grids.size(), rng);
        const auto out = hvfa::hvfa_forward(grids, params);
        return py::dict("aggregated"_a = to_array(out.aggregated.tensor()), "mse_loss"_a = out.recon.item(),
                        "parameters"_a = params.parameter_count());
      },
      "local"_a, "seed"_a, "heads"_a = 2, "head_dim"_a = 4, "layers"_a = 2, "variant"_a = "cross-attentive",
      "layer_norm"_a = true, "recon_mode"_a = "block-mean", "stopgrad"_a = true, "lambda_"_a = 0.1);
  m.def(
      "toy_train",
      [](std::uint64_t seed, bool stopgrad, std::size_t steps) {
        auto cfg = hvfa::toy::ToyConfig::collapse_reference(seed, stopgrad);
        cfg.steps = steps;
        std::vector<hvfa::toy::TraceRow> trace;
        {
          py::gil_scoped_release release;
          trace = hvfa::toy::toy_train(cfg);
        }
        py::list out;
        for (const auto& r : trace) out.append(py::make_tuple(r.step, r.loss.task_loss, r.loss.mse_loss, r.loss.final_loss));
        return out;
      },
      "seed"_a, "stopgrad"_a = true, "steps"_a = 500);
  m.def(
      "gradcheck",
      [](std::uint64_t seed, const std::string& variant, std::size_t scales, bool layer_norm, bool stopgrad,
         const std::string& recon_mode, double eps) {
        auto cfg = hvfa::toy::ToyConfig::gradcheck_reference(seed);
        cfg.local_scales = scales;
        cfg.hvfa.variant = hvfa::parse_variant(variant);
        cfg.hvfa.layer_norm = layer_norm;
        cfg.hvfa.stopgrad = stopgrad;
        cfg.hvfa.recon_mode = hvfa::parse_recon_mode(recon_mode);
        const auto r = hvfa::toy::check_gradients(cfg, eps);
        return py::dict("max_rel_error"_a = r.max_rel_error, "checked"_a = r.checked);
      },
      "seed"_a, "variant"_a = "cross-attentive", "scales"_a = 2, "layer_norm"_a = true, "stopgrad"_a = false,
      "recon_mode"_a = "block-mean", "eps"_a = 1e-5);
}
