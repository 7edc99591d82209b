#include "prefalign/config.hpp"

#include <doctest.h>
#include <filesystem>
#include <set>

using namespace prefalign;
using namespace prefalign::config;
namespace fs = std::filesystem;

namespace {

RunConfig from_text(std::string_view text, const Overrides& o = {}, const std::string& base = "/cfg") {
  return resolve(KeyValues::parse(text, "test.conf"), o, base);
}

}  // namespace

TEST_CASE("defaults resolve and validate") {
  const auto rc = from_text("");
  CHECK_NOTHROW(rc.validate());
  CHECK(rc.seed == 42);
  CHECK(rc.split_seed == 43);
  CHECK(rc.model.seed == 44);
  CHECK(rc.lora.seed == 45);
  CHECK(rc.dpo.seed == 46);
  CHECK(rc.dpo.beta == 0.1);
  CHECK(rc.lora.rank == 8);
  CHECK(rc.lora.targets == std::vector<std::string>{"q_proj", "v_proj"});
  CHECK(rc.test_split().train_fraction == doctest::Approx(0.8));
  CHECK(rc.val_split().train_fraction == doctest::Approx(0.875));
  CHECK(rc.val_split().seed == rc.test_split().seed + 1);
  CHECK_FALSE(rc.providers.judge.has_value());
}

TEST_CASE("parser reports line numbers") {
  const auto kv = KeyValues::parse("# comment\n\nrun.seed = 7\n  dpo.beta=0.2  \n", "x.conf");
  CHECK(kv.entries.at("run.seed") == "7");
  CHECK(kv.entries.at("dpo.beta") == "0.2");
  CHECK(kv.lines.at("dpo.beta") == 4);

  try {
    KeyValues::parse("run.seed = 1\nnonsense\n", "x.conf");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("x.conf:2") != std::string::npos);
  }
  CHECK_THROWS_AS(KeyValues::parse("seed = 1\n", "x.conf"), ConfigError);
  CHECK_THROWS_AS(KeyValues::load("/nonexistent/prefalign.conf"), IoError);
}

TEST_CASE("unknown keys name file and line") {
  try {
    from_text("run.seed = 1\ndpo.betta = 0.3\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const std::string w = e.what();
    CHECK(w.find("test.conf:2") != std::string::npos);
    CHECK(w.find("dpo.betta") != std::string::npos);
  }
}

TEST_CASE("malformed values are config errors") {
  CHECK_THROWS_AS(from_text("run.seed = -1"), ConfigError);
  CHECK_THROWS_AS(from_text("dpo.batch_size = eight"), ConfigError);
  CHECK_THROWS_AS(from_text("dpo.beta = 0.1x"), ConfigError);
  CHECK_THROWS_AS(from_text("report.include_fixtures = maybe"), ConfigError);
  CHECK_THROWS_AS(from_text("dpo.overflow = explode"), ConfigError);
  CHECK_THROWS_AS(from_text("split.test_fraction = 1.5").validate(), ConfigError);
  CHECK_THROWS_AS(from_text("eval.workers = 0").validate(), ConfigError);
  CHECK_THROWS_AS(from_text("dpo.beta = 0").validate(), ConfigError);
}

TEST_CASE("precedence: defaults < file < flags") {
  const std::string text = "run.seed = 7\nrun.out_dir = runs/a\ndpo.beta = 0.25\nsplit.seed = 100\n";
  auto rc = from_text(text);
  CHECK(rc.seed == 7);
  CHECK(rc.dpo.beta == 0.25);
  CHECK(rc.split_seed == 100);
  CHECK(rc.model.seed == 9);
  CHECK(rc.out_dir == "/cfg/runs/a");

  Overrides o;
  o.seed = 1000;
  o.out_dir = "elsewhere";
  rc = from_text(text, o);
  CHECK(rc.seed == 1000);
  // A seed flag re-derives every component seed, including ones set in the file.
  CHECK(rc.split_seed == 1001);
  CHECK(rc.model.seed == 1002);
  CHECK(rc.lora.seed == 1003);
  CHECK(rc.dpo.seed == 1004);
  CHECK(rc.dpo.beta == 0.25);
  CHECK(rc.out_dir == "elsewhere");
}

TEST_CASE("relative paths resolve against the config file") {
  const auto rc = from_text(
      "corpus.paths = ../corpus, /abs/extra.jsonl\nreport.fixtures = f/paper.json\neval.prompts_dir = prompts\n", {},
      "/data/configs");
  CHECK(rc.corpus_paths == std::vector<std::string>{"/data/corpus", "/abs/extra.jsonl"});
  CHECK(rc.fixtures_path == "/data/configs/f/paper.json");
  CHECK(rc.prompts_dir == "/data/configs/prompts");
}

TEST_CASE("provider slots appear only when configured") {
  const auto rc = from_text(
      "providers.judge.endpoint = http://localhost:9000/judge\nproviders.judge.model_id = my-judge\n"
      "providers.nli.endpoint = http://localhost:9000/nli\nproviders.nli.api_key_env = NLI_KEY\n"
      "providers.max_in_flight = 2\n");
  REQUIRE(rc.providers.judge);
  CHECK(rc.providers.judge->kind == providers::ProviderKind::kJudge);
  CHECK(rc.providers.judge->model_id == "my-judge");
  CHECK(rc.providers.judge->max_retries == 3);
  CHECK(rc.providers.judge->backoff_base_s == 0.5);
  REQUIRE(rc.providers.nli);
  CHECK(rc.providers.nli->model_id == providers::kDefaultNliModel);
  CHECK(rc.providers.nli->api_key_env == "NLI_KEY");
  CHECK_FALSE(rc.providers.formality);
  CHECK(rc.providers.max_in_flight == 2);
}

TEST_CASE("config hash tracks computation, not output location") {
  Overrides a, b;
  a.out_dir = "/tmp/one";
  b.out_dir = "/tmp/two";
  const auto x = from_text("dpo.beta = 0.2", a);
  const auto y = from_text("dpo.beta = 0.2", b);
  CHECK(x.hash() == y.hash());
  CHECK(x.hash().size() == 16);
  CHECK(from_text("dpo.beta = 0.3", a).hash() != x.hash());
  Overrides s = a;
  s.seed = 5;
  CHECK(from_text("dpo.beta = 0.2", s).hash() != x.hash());
  // Explicit values equal to the defaults hash the same as omitted ones.
  CHECK(from_text("dpo.beta = 0.1").hash() == from_text("").hash());
}

TEST_CASE("documented keys cover every accepted key") {
  const auto keys = documented_keys();
  std::set<std::string> names;
  for (const auto& [k, v] : keys) {
    CHECK(names.insert(k).second);
    CHECK_NOTHROW(from_text(k + " = " + (v.empty() ? std::string("x") : v)));
  }
  CHECK(names.count("dpo.beta"));
  CHECK(names.count("providers.judge.endpoint"));
  CHECK(names.count("report.chart_scale"));
}

TEST_CASE("load_run_config reads a file") {
  const auto dir = fs::temp_directory_path() / "prefalign_config_test";
  fs::create_directories(dir);
  write_file((dir / "a.conf").string(), "run.out_dir = out\nlora.rank = 4\n");
  const auto rc = load_run_config((dir / "a.conf").string(), {});
  CHECK(rc.lora.rank == 4);
  CHECK(fs::path(rc.out_dir) == (dir / "out").lexically_normal());
  CHECK(load_run_config(std::nullopt, {}).seed == 42);
  fs::remove_all(dir);
}
