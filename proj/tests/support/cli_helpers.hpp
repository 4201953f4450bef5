#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "hvfa/cli.hpp"

namespace clitest {

struct Result {
  int code = 0;
  std::string out;
  std::string err;
};

inline Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "hvfa");
  std::ostringstream out, err;
  const int code = hvfa::cli::dispatch(args, out, err);
  return {code, out.str(), err.str()};
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void spit(const std::filesystem::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

// Fresh scratch directory removed on destruction.
struct ScratchDir {
  std::filesystem::path path;
  explicit ScratchDir(const std::string& tag) {
    path = std::filesystem::temp_directory_path() /
           (tag + "_" + std::to_string(std::hash<std::string>{}(tag + std::to_string(reinterpret_cast<std::uintptr_t>(this)))));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~ScratchDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::filesystem::path operator/(const std::string& name) const { return path / name; }
};

// Small corpus spanning short and over-capacity documents.
inline std::string sample_corpus() {
  std::string text;
  for (int d = 0; d < 12; ++d) {
    text += "{\"id\":\"doc" + std::to_string(d) + "\",\"tokens\":[";
    for (int t = 0; t < 5 + 9 * d; ++t) text += (t ? ",\"" : "\"") + std::string("t") + std::to_string(t) + "\"";
    text += "]}\n";
  }
  return text;
}

}  // namespace clitest
