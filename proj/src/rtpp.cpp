#include "hvfa/rtpp.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <exception>
#include <istream>
#include <ostream>
#include <thread>

#include <nlohmann/json.hpp>

#include "hvfa/errors.hpp"

namespace hvfa::rtpp {

namespace {

constexpr std::string_view kFirstTemplates[] = {
    "What's in the first {}% of the image text?",
    "Identify words from the first {}% of the image text.",
    "Which words make up the first {}% of the text in the image?",
    "List words in the image text's initial {}% segment.",
    "Extract words found in the image text's opening {}%.",
    "Words in the initial {}% of the image text?",
    "Which words comprise the image text's first {}%?",
    "Identify the words positioned in the image text's initial {}%.",
    "List the words found within the first {}% of the image text.",
    "What words are situated within the initial {}% segment of the image text?",
};

constexpr std::string_view kMiddleTemplates[] = {
    "What are the words located between {}% and {}% of the text in the image?",
    "List words found between {}% and {}% in the image text.",
    "Which words fall between {}% and {}% in the image text?",
    "What words are in the {}%-{}% range of the image text?",
    "Identify words from {}%-{}% in the image text?",
    "What are the words located at {}%-{}% in the image text?",
    "Can you extract words from {}%-{}% in the image text?",
    "What's within the {}%-{}% range in the image text?",
    "Which words occupy {}%-{}% of the image text?",
    "What words lie between {}% and {}% in the image text?",
};

constexpr std::string_view kLastTemplates[] = {
    "Identify words from the last {}% of the image text.",
    "Which words make up the last {}% of the text in the image?",
    "What's in the last {}% of the image text?",
    "List words in the image text's final {}% segment.",
    "Extract words found in the image text's closing {}%.",
    "Words in the final {}% of the image text?",
    "Which words comprise the image text's last {}%?",
    "Identify the words positioned in the image text's final {}%.",
    "List the words found within the last {}% of the image text.",
    "What words are situated within the final {}% segment of the image text?",
};

constexpr std::string_view kPtpTemplates[] = {
    "Specify the relative position within the image where {query} is found.",
    "Where is the text {query} located within the image?",
    "Locate the relative position within the image where the text {query} is situated.",
    "Determine the relative position within the image where the words {query} appear.",
    "Identify the relative position within the image where the phrase {query} is located.",
    "Find the relative position within the image where {query} is depicted.",
    "Where within the image can we find the phrase {query}?",
    "At what position in the image do the words {query} appear?",
    "Where within the image is {query} depicted?",
    "Where can we locate {query} within the image?",
};

constexpr std::string_view kRftTemplates[] = {
    "Read all the text in the image.",
};

constexpr std::string_view kKindNames[] = {"rpt_first", "rpt_middle", "rpt_last", "ptp", "rft"};

TaskKind task_for(RangeKind k) {
  switch (k) {
    case RangeKind::kFirst: return TaskKind::kRptFirst;
    case RangeKind::kMiddle: return TaskKind::kRptMiddle;
    case RangeKind::kLast: return TaskKind::kRptLast;
  }
  return TaskKind::kRptFirst;
}

std::string wrap_prompt(std::string_view instruction) {
  return "Human: " + std::string(instruction) + " AI:";
}

std::size_t pick_template(std::size_t bank_size, Rng& rng, std::optional<std::size_t> index) {
  if (index) {
    if (*index >= bank_size) throw ConfigError("template index out of range");
    return *index;
  }
  return static_cast<std::size_t>(rng.below(bank_size));
}

void check_payload(const InstructionSample& s, std::size_t l_max) {
  if (s.payload_tokens > l_max) {
    throw std::logic_error("rtpp: " + std::string(to_string(s.kind)) + " payload of " +
                           std::to_string(s.payload_tokens) + " tokens exceeds l_max " + std::to_string(l_max));
  }
}

}  // namespace

std::vector<std::string> whitespace_tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    const std::size_t start = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i > start) out.emplace_back(text.substr(start, i - start));
  }
  return out;
}

std::string detokenize(std::span<const std::string> tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

std::string_view to_string(TaskKind k) { return kKindNames[static_cast<std::size_t>(k)]; }

TaskKind parse_task(std::string_view name) {
  for (auto k : kAllTasks) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("unknown task '" + std::string(name) + "'");
}

void GenConfig::validate() const {
  if (l_max < 1) throw ConfigError("l_max must be >= 1");
  if (!(c_min > 0.0 && c_min <= 1.0)) throw ConfigError("c_min must lie in (0, 1]");
  double total = 0.0;
  for (double p : task_mix) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw ConfigError("task_mix entries must be finite and >= 0");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("task_mix must sum to 1, got " + std::to_string(total));
  if (threads < 1) throw ConfigError("threads must be >= 1");
}

std::array<double, 5> parse_task_mix(std::string_view spec) {
  std::array<double, 5> mix{};
  std::array<bool, 5> seen{};
  while (!spec.empty()) {
    const auto comma = spec.find(',');
    const std::string_view item = spec.substr(0, comma);
    spec = comma == std::string_view::npos ? std::string_view{} : spec.substr(comma + 1);
    const auto eq = item.find('=');
    if (eq == std::string_view::npos) throw ConfigError("task mix entry '" + std::string(item) + "' lacks '='");
    const auto k = static_cast<std::size_t>(parse_task(item.substr(0, eq)));
    if (seen[k]) throw ConfigError("task '" + std::string(item.substr(0, eq)) + "' listed twice");
    seen[k] = true;
    const std::string value(item.substr(eq + 1));
    std::size_t used = 0;
    double p = 0.0;
    try {
      p = std::stod(value, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != value.size() || value.empty()) throw ConfigError("bad probability '" + value + "'");
    mix[k] = p;
  }
  return mix;
}

std::span<const std::string_view> templates(TaskKind kind) {
  switch (kind) {
    case TaskKind::kRptFirst: return kFirstTemplates;
    case TaskKind::kRptMiddle: return kMiddleTemplates;
    case TaskKind::kRptLast: return kLastTemplates;
    case TaskKind::kPtp: return kPtpTemplates;
    case TaskKind::kRft: return kRftTemplates;
  }
  return {};
}

double coverage(std::size_t length, std::size_t l_max) {
  if (length < 1 || l_max < 1) throw DomainError("coverage needs l >= 1 and l_max >= 1");
  return std::min(1.0, static_cast<double>(l_max) / static_cast<double>(length));
}

double sample_range(double c_max, double c_min, Rng& rng) {
  if (c_max <= c_min) return c_max;
  return rng.uniform(c_min, c_max);
}

RangeSpec sample_positions(RangeKind kind, double t_range, Rng& rng) {
  if (!(t_range > 0.0 && t_range <= 1.0)) throw DomainError("t_range must lie in (0, 1]");
  switch (kind) {
    case RangeKind::kFirst: return {kind, 0.0, t_range, t_range};
    case RangeKind::kMiddle: {
      const double start = rng.uniform(0.0, 1.0 - t_range);
      return {kind, start, start + t_range, t_range};
    }
    case RangeKind::kLast: return {kind, 1.0 - t_range, 1.0, t_range};
  }
  throw DomainError("unknown range kind");
}

std::size_t boundary_index(double p, std::size_t length) {
  const double x = std::ceil(p * static_cast<double>(length) - 0.5);
  if (x <= 0.0) return 0;
  return std::min(length, static_cast<std::size_t>(x));
}

std::vector<std::string> slice_tokens(const TokenizedDoc& doc, const RangeSpec& range) {
  const std::size_t l = doc.length();
  if (l == 0) throw DegenerateInputError("cannot slice empty document '" + doc.id + "'");
  std::size_t start = boundary_index(range.p_start, l);
  std::size_t end = boundary_index(range.p_end, l);
  if (start >= l) start = l - 1;
  if (end <= start) end = start + 1;
  return {doc.tokens.begin() + static_cast<std::ptrdiff_t>(start),
          doc.tokens.begin() + static_cast<std::ptrdiff_t>(end)};
}

int percent(double fraction) { return static_cast<int>(std::lround(fraction * 100.0)); }

std::string render_template(std::string_view tmpl, std::span<const int> percents, std::string_view query) {
  std::string out;
  std::size_t slot = 0;
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl.substr(i, 7) == "{query}") {
      out += query;
      i += 7;
    } else if (tmpl.substr(i, 2) == "{}") {
      if (slot >= percents.size()) throw std::logic_error("template has more slots than values");
      out += std::to_string(percents[slot++]);
      i += 2;
    } else {
      out += tmpl[i++];
    }
  }
  if (slot != percents.size()) throw std::logic_error("template slot count mismatch");
  return out;
}

InstructionSample render_rpt(const TokenizedDoc& doc, const RangeSpec& range, std::size_t l_max, Rng& rng,
                             std::optional<std::size_t> template_index) {
  const TaskKind kind = task_for(range.kind);
  const auto bank = templates(kind);
  const std::string_view tmpl = bank[pick_template(bank.size(), rng, template_index)];
  std::vector<int> slots;
  switch (range.kind) {
    case RangeKind::kFirst: slots = {percent(range.p_end)}; break;
    case RangeKind::kMiddle: slots = {percent(range.p_start), percent(range.p_end)}; break;
    case RangeKind::kLast: slots = {percent(1.0 - range.p_start)}; break;
  }
  const auto slice = slice_tokens(doc, range);
  InstructionSample s;
  s.id = doc.id;
  s.kind = kind;
  s.prompt = wrap_prompt(render_template(tmpl, slots));
  s.answer = detokenize(slice);
  s.range = range;
  s.payload_tokens = slice.size();
  check_payload(s, l_max);
  return s;
}

InstructionSample render_ptp(const TokenizedDoc& doc, const RangeSpec& range, std::size_t l_max, Rng& rng,
                             std::optional<std::size_t> template_index) {
  const auto bank = templates(TaskKind::kPtp);
  const std::string_view tmpl = bank[pick_template(bank.size(), rng, template_index)];
  const auto slice = slice_tokens(doc, range);
  InstructionSample s;
  s.id = doc.id;
  s.kind = TaskKind::kPtp;
  s.prompt = wrap_prompt(render_template(tmpl, {}, detokenize(slice)));
  s.answer = std::to_string(percent(range.p_start)) + "%-" + std::to_string(percent(range.p_end)) + "%";
  s.range = range;
  s.payload_tokens = slice.size();
  check_payload(s, l_max);
  return s;
}

InstructionSample render_rft(const TokenizedDoc& doc, std::size_t l_max) {
  const std::size_t n = std::min(doc.length(), l_max);
  InstructionSample s;
  s.id = doc.id;
  s.kind = TaskKind::kRft;
  s.prompt = wrap_prompt(kRftTemplates[0]);
  s.answer = detokenize(std::span(doc.tokens).first(n));
  s.payload_tokens = n;
  s.truncated = doc.length() > l_max;
  return s;
}

std::pair<double, double> parse_ptp_answer(std::string_view answer) {
  const auto bad = [&] { return FormatError("malformed position answer '" + std::string(answer) + "'"); };
  int a = 0, b = 0;
  const char* p = answer.data();
  const char* end = answer.data() + answer.size();
  auto r = std::from_chars(p, end, a);
  if (r.ec != std::errc() || end - r.ptr < 3 || r.ptr[0] != '%' || r.ptr[1] != '-') throw bad();
  r = std::from_chars(r.ptr + 2, end, b);
  if (r.ec != std::errc() || end - r.ptr != 1 || r.ptr[0] != '%') throw bad();
  return {a / 100.0, b / 100.0};
}

namespace {

InstructionSample generate_one(const TokenizedDoc& doc, std::size_t index, const GenConfig& cfg) {
  if (doc.length() == 0) throw DegenerateInputError("document '" + doc.id + "' has no tokens");
  Rng rng(cfg.seed ^ static_cast<std::uint64_t>(index));
  const double u = rng.uniform01();
  TaskKind task = TaskKind::kRft;
  double acc = 0.0;
  for (auto k : kAllTasks) {
    const double p = cfg.task_mix[static_cast<std::size_t>(k)];
    if (p <= 0.0) continue;
    task = k;  // falls through to the last positive entry on round-off
    acc += p;
    if (u < acc) break;
  }
  if (task == TaskKind::kRft) return render_rft(doc, cfg.l_max);

  const double t = sample_range(coverage(doc.length(), cfg.l_max), cfg.c_min, rng);
  RangeKind kind = RangeKind::kFirst;
  switch (task) {
    case TaskKind::kRptFirst: kind = RangeKind::kFirst; break;
    case TaskKind::kRptMiddle: kind = RangeKind::kMiddle; break;
    case TaskKind::kRptLast: kind = RangeKind::kLast; break;
    default: kind = static_cast<RangeKind>(rng.below(3)); break;
  }
  const RangeSpec range = sample_positions(kind, t, rng);
  return task == TaskKind::kPtp ? render_ptp(doc, range, cfg.l_max, rng) : render_rpt(doc, range, cfg.l_max, rng);
}

}  // namespace

std::vector<InstructionSample> generate_batch(std::span<const TokenizedDoc> corpus, const GenConfig& cfg) {
  cfg.validate();
  if (corpus.empty()) throw DegenerateInputError("corpus is empty");
  std::vector<InstructionSample> out(corpus.size());
  const std::size_t workers = std::min(cfg.threads, corpus.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < corpus.size(); ++i) out[i] = generate_one(corpus[i], i, cfg);
    return out;
  }
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < corpus.size(); i += workers) out[i] = generate_one(corpus[i], i, cfg);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

std::vector<TokenizedDoc> read_corpus(std::istream& in, std::string_view source) {
  std::vector<TokenizedDoc> docs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto where = [&] { return std::string(source) + ":" + std::to_string(lineno) + ": "; };
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw FormatError(where() + e.what());
    }
    if (!j.is_object() || !j.contains("id") || !j["id"].is_string() || !j.contains("tokens") ||
        !j["tokens"].is_array()) {
      throw FormatError(where() + "expected {\"id\": str, \"tokens\": [str]}");
    }
    TokenizedDoc doc;
    doc.id = j["id"].get<std::string>();
    for (const auto& t : j["tokens"]) {
      if (!t.is_string()) throw FormatError(where() + "tokens must be strings");
      doc.tokens.push_back(t.get<std::string>());
    }
    if (doc.tokens.empty()) throw FormatError(where() + "document '" + doc.id + "' has no tokens");
    docs.push_back(std::move(doc));
  }
  if (in.bad()) throw FormatError(std::string(source) + ": read failed");
  return docs;
}

void write_samples(std::ostream& out, std::span<const InstructionSample> samples) {
  for (const auto& s : samples) {
    nlohmann::ordered_json j;
    j["id"] = s.id;
    j["kind"] = to_string(s.kind);
    j["prompt"] = s.prompt;
    j["answer"] = s.answer;
    if (s.range) {
      j["p_start"] = s.range->p_start;
      j["p_end"] = s.range->p_end;
    } else {
      j["p_start"] = nullptr;
      j["p_end"] = nullptr;
    }
    j["truncated"] = s.truncated;
    out << j.dump() << '\n';
  }
  if (!out) throw FormatError("failed writing samples");
}

}  // namespace hvfa::rtpp
