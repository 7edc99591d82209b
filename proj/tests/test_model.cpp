#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "prefalign/checkpoint.hpp"
#include "prefalign/model.hpp"

using namespace prefalign;
using namespace prefalign::model;

namespace {

ModelConfig tiny_config() {
  ModelConfig c;
  c.layers = 2;
  c.heads = 2;
  c.embed_dim = 8;
  c.context_length = 24;
  c.seed = 99;
  return c;
}

Tokens random_tokens(std::mt19937_64& rng, std::size_t n, int vocab = 256) {
  Tokens t(n);
  for (auto& x : t) x = static_cast<TokenId>(rng() % static_cast<std::uint64_t>(vocab));
  return t;
}

template <typename S>
void perturb_adapters(Model<S>& m, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 0.05);
  for (auto& b : m.blocks) {
    for (auto name : kProjectionNames) {
      auto* p = b.projection(name);
      if (p->lora) p->lora->b.value = p->lora->b.value.unaryExpr([&](S) { return static_cast<S>(n(rng)); });
    }
  }
}

// Central differences of sequence_logprob against backprop_logprob for every
// trainable parameter entry (or a strided subset of them).
double max_gradient_error(Model<double>& m, const Tokens& prompt, const Tokens& response, int stride) {
  m.zero_grad();
  const auto scored = score_sequence(m, prompt, response);
  backprop_logprob(m, scored, 1.0);
  double worst = 0.0;
  const double h = 1e-5;
  m.for_each_parameter([&](const std::string& name, Parameter<double>& p) {
    if (!p.trainable) return;
    REQUIRE_MESSAGE(p.grad.size() == p.value.size(), name);
    for (Eigen::Index i = 0; i < p.value.size(); i += stride) {
      const double keep = p.value.data()[i];
      p.value.data()[i] = keep + h;
      const double up = sequence_logprob(m, prompt, response);
      p.value.data()[i] = keep - h;
      const double down = sequence_logprob(m, prompt, response);
      p.value.data()[i] = keep;
      const double numeric = (up - down) / (2 * h);
      const double analytic = p.grad.data()[i];
      // The floor absorbs finite-difference roundoff on near-zero entries.
      const double err = std::abs(numeric - analytic) / (std::abs(numeric) + std::abs(analytic) + 1e-3);
      worst = std::max(worst, err);
    }
  });
  return worst;
}

}  // namespace

TEST_CASE("tokenizer round-trips arbitrary bytes") {
  CHECK(tokenize("").empty());
  CHECK(detokenize(tokenize("")) == "");
  CHECK(tokenize("abc") == Tokens{97, 98, 99});
  CHECK(detokenize(tokenize("abc")) == "abc");
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    std::string s(1024, '\0');
    for (auto& c : s) c = static_cast<char>(rng() & 0xff);
    CHECK(detokenize(tokenize(s)) == s);
  }
}

TEST_CASE("detokenize rejects ids outside the vocabulary") {
  const Tokens bad{65, 300};
  CHECK_THROWS_AS(detokenize(bad), std::out_of_range);
  const Tokens small{5};
  CHECK_THROWS_AS(detokenize(small, 4), std::out_of_range);
}

TEST_CASE("config validation") {
  ModelConfig c;
  CHECK_NOTHROW(c.validate());
  c.embed_dim = 130;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.context_length = 1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.vocab_size = 1;
  CHECK_THROWS_AS(c.validate(), ConfigError);

  LoraConfig l;
  CHECK_NOTHROW(l.validate());
  l.rank = 0;
  CHECK_THROWS_AS(l.validate(), ConfigError);
  l = {};
  l.targets = {"w_proj"};
  CHECK_THROWS_AS(l.validate(), ConfigError);
  CHECK_THROWS_AS(apply_lora(Model<float>(tiny_config()), l), ConfigError);
}

TEST_CASE("uniform logits give -L ln 256") {
  Model<double> m(tiny_config());
  m.lm_head.value.setZero();
  const Tokens prompt{1, 2, 3};
  CHECK(sequence_logprob(m, prompt, Tokens{7}) == doctest::Approx(-std::log(256.0)).epsilon(1e-12));
  CHECK(sequence_logprob(m, prompt, Tokens{7, 8, 9, 10}) ==
        doctest::Approx(-4 * std::log(256.0)).epsilon(1e-12));
  CHECK(std::log(256.0) == doctest::Approx(5.5452).epsilon(1e-4));
}

TEST_CASE("logprob chain rule") {
  Model<double> m(tiny_config());
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const auto prompt = random_tokens(rng, 1 + rng() % 5);
    const auto r1 = random_tokens(rng, 1 + rng() % 6);
    const auto r2 = random_tokens(rng, 1 + rng() % 6);
    Tokens r12 = r1;
    r12.insert(r12.end(), r2.begin(), r2.end());
    Tokens p1 = prompt;
    p1.insert(p1.end(), r1.begin(), r1.end());
    const double whole = sequence_logprob(m, prompt, r12);
    const double parts = sequence_logprob(m, prompt, r1) + sequence_logprob(m, p1, r2);
    CHECK(std::abs(whole - parts) < 1e-6);
  }
}

TEST_CASE("logprob input contract") {
  Model<float> m(tiny_config());
  const Tokens empty;
  const Tokens one{1};
  CHECK_THROWS_AS(sequence_logprob(m, empty, one), ValidationError);
  CHECK_THROWS_AS(sequence_logprob(m, one, empty), ValidationError);
  const Tokens long_prompt(20, 5);
  const Tokens long_response(5, 6);
  try {
    sequence_logprob(m, long_prompt, long_response);
    FAIL("expected overlength error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("24") != std::string::npos);
  }
}

TEST_CASE("fresh adapters leave logits unchanged") {
  Model<float> base(tiny_config());
  const auto adapted = apply_lora(base, LoraConfig{});
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const auto t = random_tokens(rng, 1 + rng() % 24);
    CHECK(forward_logits(base, t) == forward_logits(adapted, t));
  }
  CHECK_THROWS_AS(apply_lora(adapted, LoraConfig{}), ConfigError);
}

TEST_CASE("merge agrees with the adapted forward") {
  auto adapted = apply_lora(Model<float>(tiny_config()), LoraConfig{});
  auto merged0 = merge_lora(adapted);
  CHECK(parameters_equal(merged0, Model<float>(tiny_config())));

  perturb_adapters(adapted, 1);
  const auto merged = merge_lora(adapted);
  CHECK_FALSE(merged.lora());
  CHECK(trainable_fraction(merged) == 1.0);
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    const auto t = random_tokens(rng, 1 + rng() % 24);
    const auto diff = (forward_logits(adapted, t) - forward_logits(merged, t)).cwiseAbs().maxCoeff();
    CHECK(diff < 1e-5f);
  }
}

TEST_CASE("trainable fraction matches a shape walk") {
  Model<float> m{ModelConfig{}};
  CHECK(trainable_fraction(m) == 1.0);
  const ModelConfig c;
  const std::size_t d = 128, v = 256, ctx = 256, h = 512;
  const std::size_t per_block = d + 4 * d * d + d + h * d + d * h;
  const std::size_t base = d * v + d * ctx + c.layers * per_block + d + v * d;
  LoraConfig l;
  const auto adapted = apply_lora(m, l);
  const std::size_t adapter = c.layers * l.targets.size() * l.rank * (d + d);
  const auto counts = count_parameters(adapted);
  CHECK(counts.total == base + adapter);
  CHECK(counts.trainable == adapter);
  CHECK(trainable_fraction(adapted) == static_cast<double>(adapter) / static_cast<double>(base + adapter));
}

TEST_CASE("manual gradients match finite differences") {
  std::mt19937_64 rng(21);
  const auto prompt = random_tokens(rng, 4);
  const auto response = random_tokens(rng, 9);

  SUBCASE("every parameter of a dense model") {
    Model<double> m(tiny_config());
    CHECK(max_gradient_error(m, prompt, response, 1) < 1e-5);
  }
  SUBCASE("adapters on every projection") {
    LoraConfig l;
    l.rank = 2;
    l.targets = {"q_proj", "k_proj", "v_proj", "o_proj"};
    auto m = apply_lora(Model<double>(tiny_config()), l);
    perturb_adapters(m, 2);
    CHECK(max_gradient_error(m, prompt, response, 1) < 1e-5);
  }
  SUBCASE("default architecture, strided subset") {
    auto m = apply_lora(Model<double>(ModelConfig{}), LoraConfig{});
    perturb_adapters(m, 3);
    CHECK(max_gradient_error(m, prompt, response, 37) < 1e-5);
  }
}

TEST_CASE("frozen parameters receive no gradient") {
  auto m = apply_lora(Model<float>(tiny_config()), LoraConfig{});
  const Tokens p{1, 2}, r{3, 4};
  backprop_logprob(m, score_sequence(m, p, r), 1.0);
  m.for_each_parameter([](const std::string& name, const Parameter<float>& param) {
    if (!param.trainable) CHECK_MESSAGE(param.grad.size() == 0, name);
  });
}

TEST_CASE("generation") {
  const auto m = Model<float>(tiny_config());
  CHECK(generate(m, "hello", 6) == generate(m, "hello", 6));
  const auto s1 = generate(m, "hello", 6, DecodeOptions::sampled(0.8, 17));
  CHECK(s1 == generate(m, "hello", 6, DecodeOptions::sampled(0.8, 17)));
  CHECK(tokenize(generate(m, "hi", 5)).size() <= 5);
  CHECK(generate(m, "hi", 0).empty());
  // Stops at the context limit.
  CHECK(tokenize(generate(m, "hello", 100, DecodeOptions::sampled(1.0, 1))).size() <= 24 - 5);
  CHECK_THROWS_AS(generate(m, "hello", 3, DecodeOptions::sampled(0.0, 1)), ConfigError);
}

TEST_CASE("reference snapshot is a frozen deep copy") {
  auto policy = apply_lora(Model<float>(tiny_config()), LoraConfig{});
  const auto ref = snapshot_reference(policy);
  CHECK(parameters_equal(ref.model(), policy));
  CHECK(ref.model().lora() == policy.lora());
  const Tokens p{9, 8}, r{7, 6};
  CHECK(sequence_logprob(ref.model(), p, r) == sequence_logprob(policy, p, r));
  perturb_adapters(policy, 4);
  CHECK_FALSE(parameters_equal(ref.model(), policy));
  const auto fresh = apply_lora(Model<float>(tiny_config()), LoraConfig{});
  CHECK(parameters_equal(ref.model(), fresh));
}

TEST_CASE("checkpoint round trip is exact") {
  auto m = apply_lora(Model<float>(tiny_config()), LoraConfig{});
  perturb_adapters(m, 5);
  Checkpoint info;
  info.lineage = {{"model_seed", 99}, {"train_seed", 7}};
  const auto path = (std::filesystem::temp_directory_path() / "prefalign_test.ckpt").string();
  write_checkpoint(path, m, info);
  Checkpoint back_info;
  const auto back = read_checkpoint<float>(path, &back_info);
  CHECK(parameters_equal(back, m));
  CHECK(back.config() == m.config());
  CHECK(back.lora() == m.lora());
  CHECK(back_info.lineage == info.lineage);
  CHECK(serialize_checkpoint(back, back_info) == serialize_checkpoint(m, info));
  CHECK_THROWS_AS(read_checkpoint<double>(path), ValidationError);
  CHECK_THROWS_AS(deserialize_checkpoint<float>("garbage"), ValidationError);
  std::filesystem::remove(path);
}

TEST_CASE("cast preserves structure") {
  auto m = apply_lora(Model<float>(tiny_config()), LoraConfig{});
  const auto d = m.cast<double>();
  CHECK(count_parameters(d).trainable == count_parameters(m).trainable);
  const Tokens p{1}, r{2, 3};
  CHECK(sequence_logprob(d, p, r) == doctest::Approx(sequence_logprob(m, p, r)).epsilon(1e-5));
}
