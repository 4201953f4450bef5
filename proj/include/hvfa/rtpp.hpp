#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hvfa/rng.hpp"

// Relative text-position prediction: instruction samples that read a
// positional slice of a document (RPT), locate a given slice (PTP), or read
// the whole text (RFT baseline). Slice widths are capped by the answer-token
// capacity so RPT/PTP payloads are never truncated.
namespace hvfa::rtpp {

struct TokenizedDoc {
  std::string id;
  std::vector<std::string> tokens;  // reading order
  std::size_t length() const { return tokens.size(); }
};

std::vector<std::string> whitespace_tokenize(std::string_view text);
std::string detokenize(std::span<const std::string> tokens);

enum class TaskKind { kRptFirst, kRptMiddle, kRptLast, kPtp, kRft };
inline constexpr std::array<TaskKind, 5> kAllTasks = {TaskKind::kRptFirst, TaskKind::kRptMiddle,
                                                      TaskKind::kRptLast, TaskKind::kPtp, TaskKind::kRft};

std::string_view to_string(TaskKind k);
TaskKind parse_task(std::string_view name);

enum class RangeKind { kFirst, kMiddle, kLast };

struct RangeSpec {
  RangeKind kind = RangeKind::kFirst;
  double p_start = 0.0;  // fractions of the document, not percents
  double p_end = 0.0;
  double t_range = 0.0;
};

struct GenConfig {
  std::size_t l_max = 2048;
  double c_min = 0.30;
  std::uint64_t seed = 0;
  // Probabilities in kAllTasks order.
  std::array<double, 5> task_mix = {0.2, 0.2, 0.2, 0.3, 0.1};
  std::size_t threads = 1;

  void validate() const;
};

// Parses "rpt_first=0.2,ptp=0.8,..."; unspecified tasks get probability 0.
std::array<double, 5> parse_task_mix(std::string_view spec);

struct InstructionSample {
  std::string id;
  TaskKind kind = TaskKind::kRft;
  std::string prompt;
  std::string answer;
  std::optional<RangeSpec> range;  // absent for RFT
  // Reading payload in tokens: the answer slice for RPT, the query slice for
  // PTP, the emitted prefix for RFT.
  std::size_t payload_tokens = 0;
  bool truncated = false;
};

// Instruction templates; "{}" marks a percentage slot, "{query}" the PTP text.
std::span<const std::string_view> templates(TaskKind kind);

// c_max = min(1, l_max / l).
double coverage(std::size_t length, std::size_t l_max);
// c_max when c_max <= c_min, otherwise uniform on (c_min, c_max).
double sample_range(double c_max, double c_min, Rng& rng);
// first: (0, t); middle: (p, p + t) with p uniform on (0, 1 - t); last: (1 - t, 1).
RangeSpec sample_positions(RangeKind kind, double t_range, Rng& rng);

// Token index for fraction p of a length-l document: nearest integer to p·l,
// exact halves rounding down.
std::size_t boundary_index(double p, std::size_t length);
// tokens[round(p_start·l), round(p_end·l)), clamped to [0, l] with end > start.
// Throws DegenerateInputError on an empty document.
std::vector<std::string> slice_tokens(const TokenizedDoc& doc, const RangeSpec& range);

// Nearest-integer percent rendering of a fraction.
int percent(double fraction);
std::string render_template(std::string_view tmpl, std::span<const int> percents,
                            std::string_view query = {});

InstructionSample render_rpt(const TokenizedDoc& doc, const RangeSpec& range, std::size_t l_max,
                             Rng& rng, std::optional<std::size_t> template_index = std::nullopt);
InstructionSample render_ptp(const TokenizedDoc& doc, const RangeSpec& range, std::size_t l_max,
                             Rng& rng, std::optional<std::size_t> template_index = std::nullopt);
InstructionSample render_rft(const TokenizedDoc& doc, std::size_t l_max);

// Parses an "a%-b%" PTP answer back to fractions.
std::pair<double, double> parse_ptp_answer(std::string_view answer);

// One sample per document; document i draws from Rng(seed ^ i), so output is
// identical for any thread count.
std::vector<InstructionSample> generate_batch(std::span<const TokenizedDoc> corpus, const GenConfig& cfg);

// JSONL I/O. Input lines: {"id": str, "tokens": [str]}. Output lines:
// {"id","kind","prompt","answer","p_start","p_end","truncated"} with p_* in
// fractions, null for RFT.
std::vector<TokenizedDoc> read_corpus(std::istream& in, std::string_view source = "<stream>");
void write_samples(std::ostream& out, std::span<const InstructionSample> samples);

}  // namespace hvfa::rtpp
