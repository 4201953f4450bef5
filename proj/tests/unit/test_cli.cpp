#include <doctest.h>

#include <algorithm>
#include <filesystem>

#include <nlohmann/json.hpp>

#include "cli_helpers.hpp"
#include "hvfa/tensor_io.hpp"

using clitest::run;
using nlohmann::json;

TEST_CASE("sac-plan JSON") {
  const auto r = run({"sac-plan", "--height", "448", "--width", "672", "--json"});
  REQUIRE(r.code == 0);
  const auto j = json::parse(r.out);
  CHECK(j["grid"] == json::array({2, 3}));
  CHECK(j["score"] == 2.0);
  // Global view, then local scales 1 and 2.
  REQUIRE(j["pyramid"].size() == 3);
  CHECK(j["pyramid"][0]["rects"].size() == 1);
  CHECK(j["pyramid"][1]["grid"] == json::array({2, 3}));
  CHECK(j["pyramid"][2]["grid"] == json::array({4, 6}));
  CHECK(j["pyramid"][2]["rects"].size() == 24);
}

TEST_CASE("sac-plan text and errors") {
  CHECK(run({"sac-plan", "--height", "448", "--width", "672"}).code == 0);
  CHECK(run({"sac-plan", "--height", "448"}).code == 1);
  CHECK(run({"sac-plan", "--height", "0", "--width", "10"}).code == 1);
  CHECK(run({"sac-plan", "--height", "448", "--width", "672", "--scales", "5"}).code == 1);
}

TEST_CASE("unknown subcommand and missing subcommand") {
  const auto r = run({"frobnicate"});
  CHECK(r.code == 1);
  CHECK(!r.err.empty());
  CHECK(run({}).code == 1);
}

TEST_CASE("randomized subcommands require a seed") {
  CHECK(run({"gradcheck"}).code == 1);
  CHECK(run({"hvfa-demo"}).code == 1);
  CHECK(run({"collapse-demo", "--steps", "2"}).code == 1);
  clitest::ScratchDir dir("hvfa_cli_seed");
  clitest::spit(dir / "c.jsonl", clitest::sample_corpus());
  CHECK(run({"rtpp-gen", "--corpus", (dir / "c.jsonl").string()}).code == 1);
}

TEST_CASE("gradcheck subcommand") {
  const auto r = run({"gradcheck", "--seed", "3", "--json"});
  REQUIRE(r.code == 0);
  const auto j = json::parse(r.out);
  CHECK(j["max_rel_error"].get<double>() < 1e-5);
  CHECK(run({"gradcheck", "--seed", "3", "--tol", "1e-30"}).code == 2);
  CHECK(run({"gradcheck", "--seed", "3", "--variant", "nonsense"}).code == 1);
}

TEST_CASE("hvfa-demo round trips features through HVFT") {
  clitest::ScratchDir dir("hvfa_cli_demo");
  const auto first = run({"hvfa-demo", "--seed", "5", "--write-inputs", dir.path.string(), "--output",
                          (dir / "agg.hvft").string()});
  REQUIRE(first.code == 0);
  const auto j = json::parse(first.out);
  CHECK(j["downstream_tokens"] == 4);
  const auto agg = hvfa::load_hvft((dir / "agg.hvft").string());
  CHECK(agg.shape() == hvfa::Shape{1, 1, 2, 4});

  std::vector<std::string> replay{"hvfa-demo", "--seed", "5"};
  for (const auto& e : std::filesystem::directory_iterator(dir.path)) {
    const auto name = e.path().filename().string();
    if (name.rfind("scale", 0) == 0) replay.push_back(e.path().string());
  }
  std::sort(replay.begin() + 3, replay.end());
  replay.insert(replay.begin() + 3, "--input");
  replay.push_back("--global");
  replay.push_back((dir / "global.hvft").string());
  const auto second = run(replay);
  REQUIRE(second.code == 0);
  CHECK(json::parse(second.out)["loss"] == j["loss"]);
}

TEST_CASE("rtpp-gen output") {
  clitest::ScratchDir dir("hvfa_cli_rtpp");
  clitest::spit(dir / "c.jsonl", clitest::sample_corpus());
  const auto a = run({"rtpp-gen", "--corpus", (dir / "c.jsonl").string(), "--seed", "9", "--lmax", "20"});
  const auto b = run({"rtpp-gen", "--corpus", (dir / "c.jsonl").string(), "--seed", "9", "--lmax", "20",
                      "--threads", "3"});
  REQUIRE(a.code == 0);
  CHECK(a.out == b.out);
  std::istringstream lines(a.out);
  std::string line;
  int n = 0;
  while (std::getline(lines, line)) {
    const auto j = json::parse(line);
    CHECK(j.contains("prompt"));
    ++n;
  }
  CHECK(n == 12);
  clitest::spit(dir / "bad.jsonl", "{\"id\": 3}\n");
  CHECK(run({"rtpp-gen", "--corpus", (dir / "bad.jsonl").string(), "--seed", "1"}).code == 1);
  CHECK(run({"rtpp-gen", "--corpus", (dir / "missing.jsonl").string(), "--seed", "1"}).code == 1);
}

TEST_CASE("config files") {
  clitest::ScratchDir dir("hvfa_cli_config");
  clitest::spit(dir / "cfg.json", R"({"height": 448, "width": 672, "max_subimages": 9})");
  const auto r = run({"sac-plan", "--config", (dir / "cfg.json").string(), "--json"});
  REQUIRE(r.code == 0);
  CHECK(json::parse(r.out)["grid"] == json::array({2, 3}));
  const auto over = run({"sac-plan", "--config", (dir / "cfg.json").string(), "--width", "448", "--json"});
  REQUIRE(over.code == 0);
  CHECK(json::parse(over.out)["grid"] == json::array({2, 2}));
  clitest::spit(dir / "bad.json", R"({"height": 448, "width": 672, "colour": "red"})");
  CHECK(run({"sac-plan", "--config", (dir / "bad.json").string()}).code == 1);
  clitest::spit(dir / "broken.json", "{");
  CHECK(run({"sac-plan", "--config", (dir / "broken.json").string()}).code == 1);
}

TEST_CASE("cost subcommands") {
  const auto r = run({"cost", "--nh", "3", "--nw", "3", "--hvfa", "--json"});
  REQUIRE(r.code == 0);
  CHECK(json::parse(r.out)["visual_tokens"] == 320);
  const auto c = run({"cost", "compare", "--nh", "3", "--nw", "3", "--a-scales", "1", "--b-scales", "2", "--json"});
  REQUIRE(c.code == 0);
  CHECK(json::parse(c.out)["asymptotic_llm_ratio"] == 25.0);
}

TEST_CASE("collapse-demo CSV") {
  const auto r = run({"collapse-demo", "--seed", "1", "--steps", "3"});
  REQUIRE(r.code == 0);
  std::istringstream lines(r.out);
  std::string line;
  std::getline(lines, line);
  CHECK(line == "step,task_loss,mse_loss,final_loss");
  int rows = 0;
  while (std::getline(lines, line)) ++rows;
  CHECK(rows == 3);
}
