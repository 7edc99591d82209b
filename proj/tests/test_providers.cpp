#include "prefalign/providers.hpp"

#include <httplib.h>

#include <atomic>
#include <cstdlib>
#include <doctest.h>
#include <json.hpp>
#include <random>
#include <set>
#include <thread>

using namespace prefalign;
using namespace prefalign::providers;
using nlohmann::json;

namespace {

// Local JSON server on an ephemeral port, torn down with the fixture.
class TestServer {
 public:
  TestServer() {
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~TestServer() {
    server_.stop();
    thread_.join();
  }
  httplib::Server& server() { return server_; }
  std::string url(const std::string& path) const { return "http://127.0.0.1:" + std::to_string(port_) + path; }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

HttpOptions options(ProviderKind kind, const std::string& endpoint, int max_retries = 0) {
  ProviderConfig c;
  c.kind = kind;
  c.endpoint = endpoint;
  c.model_id = "test-model";
  c.timeout_s = 5;
  c.max_retries = max_retries;
  c.backoff_base_s = 0.0;
  auto o = http_options(c);
  o.retry.sleep = nullptr;
  return o;
}

}  // namespace

TEST_CASE("provider config invariants") {
  ProviderConfig c;
  c.model_id = "m";
  CHECK_NOTHROW(c.validate());
  c.max_retries = -1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.max_retries = 0;
  c.timeout_s = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.timeout_s = 1;
  c.model_id.clear();
  CHECK_THROWS_AS(c.validate(), ConfigError);

  for (auto k : {ProviderKind::kEmbedding, ProviderKind::kJudge, ProviderKind::kNli, ProviderKind::kFormality,
                 ProviderKind::kGenerator}) {
    CHECK(parse_kind(to_string(k)) == k);
  }
  CHECK_THROWS(parse_kind("oracle"));
}

TEST_CASE("mock embedder is deterministic and order preserving") {
  MockEmbedder e("mock:ada");
  const std::vector<std::string> texts = {"my mother forgets names", "keep a calm routine", "my mother forgets names"};
  const auto v = e.embed(texts);
  REQUIRE(v.size() == 3);
  CHECK(v[0].values == v[2].values);
  CHECK(v[0].values != v[1].values);
  CHECK(v[0].values.norm() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(v[0].model_id == "mock:ada");
  CHECK(e.embed(std::vector<std::string>{texts[1]})[0].values == v[1].values);
  CHECK(e.embed(std::span<const std::string>{}).empty());

  MockEmbedder other("mock:mpnet");
  CHECK(other.embed(std::vector<std::string>{texts[0]})[0].values != v[0].values);

  CHECK_THROWS_AS(e.embed(std::vector<std::string>{""}), ValidationError);
}

TEST_CASE("mock embedder separates every corpus-like text") {
  MockEmbedder e("mock:ada");
  std::vector<std::string> texts;
  for (int i = 0; i < 200; ++i) texts.push_back("question number " + std::to_string(i) + " about care");
  const auto v = e.embed(texts);
  for (std::size_t i = 0; i < v.size(); ++i) {
    for (std::size_t j = i + 1; j < v.size(); ++j) CHECK(v[i].values != v[j].values);
  }
}

TEST_CASE("mock judge canned, scripted and strict") {
  MockJudge strict(true);
  strict.add("content", {"0.8"});
  CHECK(strict.judge("sys", "content") == "0.8");
  CHECK_THROWS_AS(strict.judge("sys", "unmapped"), MockError);

  MockJudge scripted(true);
  scripted.add("c", {"oops", "0.4"});
  CHECK(scripted.judge("s", "c") == "oops");
  CHECK(scripted.judge("s", "c") == "0.4");
  CHECK(scripted.judge("s", "c") == "0.4");
  CHECK(scripted.calls().size() == 3);
  CHECK(scripted.calls()[0].system == "s");

  MockJudge loose;
  const auto a = loose.judge("s", "anything");
  CHECK(a == loose.judge("s", "anything"));
  const double x = std::stod(a);
  CHECK(x >= 0.0);
  CHECK(x <= 1.0);

  CHECK_THROWS_AS(loose.judge("", "x"), ValidationError);
  CHECK_THROWS_AS(loose.judge("x", ""), ValidationError);
}

TEST_CASE("mock nli rules and clamping") {
  MockNli nli;
  CHECK(nli.entailment("the cat sat", "the cat sat") == 1.0);
  CHECK(nli.entailment("alpha beta", "gamma delta") == 0.0);
  CHECK(nli.entailment("Alpha beta", "alpha gamma") == doctest::Approx(0.5));
  std::mt19937_64 rng(5);
  const std::vector<std::string> words = {"calm", "routine", "walk", "music", "sleep", "light", "door", "name"};
  for (int i = 0; i < 100; ++i) {
    std::string p, h;
    for (int k = 0; k < 4; ++k) p += words[rng() % words.size()] + " ";
    for (int k = 0; k < 3; ++k) h += words[rng() % words.size()] + " ";
    const double s = nli.entailment(p, h);
    CHECK(s >= 0.0);
    CHECK(s <= 1.0);
    CHECK(s == nli.entailment(p, h));
  }
  CHECK_THROWS_AS(nli.entailment("", "x"), ValidationError);
}

TEST_CASE("mock formality and normalization") {
  MockFormality f;
  auto r = f.classify("Please keep the evening routine calm.");
  CHECK(r.label == FormalityLabel::kFormal);
  CHECK(r.score == 0.9);
  r = f.classify("gonna wanna lol");
  CHECK(r.label == FormalityLabel::kInformal);
  CHECK(r.score == 0.1);
  r = f.classify("Don't worry.");
  CHECK(r.label == FormalityLabel::kInformal);

  auto n = normalize_formality("formal", 0.7);
  CHECK(n.score == doctest::Approx(0.7));
  CHECK(n.label == FormalityLabel::kFormal);
  n = normalize_formality("INFORMAL", 0.7);
  CHECK(n.score == doctest::Approx(0.3));
  CHECK(n.label == FormalityLabel::kInformal);
  n = normalize_formality("in-formal", 0.2);
  CHECK(n.score == doctest::Approx(0.8));
  CHECK(n.label == FormalityLabel::kFormal);
  CHECK_THROWS_AS(normalize_formality("polite", 0.5), IntegrityError);
}

TEST_CASE("retry succeeds on the third attempt with exponential backoff") {
  RetryPolicy p;
  p.max_retries = 3;
  p.backoff_base_s = 0.5;
  std::vector<double> sleeps;
  p.sleep = [&](double s) { sleeps.push_back(s); };
  int failures = 0;
  int attempts = 0;
  const auto v = call_with_retry(
      p, "judge", "m",
      [&] {
        if (failures < 2) {
          ++failures;
          throw TransportError("down");
        }
        return 7;
      },
      &attempts);
  CHECK(v == 7);
  CHECK(attempts == 3);
  CHECK(sleeps == std::vector<double>{0.5, 1.0});
}

TEST_CASE("exhausted retries carry kind, model and attempts") {
  RetryPolicy p;
  p.max_retries = 2;
  p.sleep = nullptr;
  int calls = 0;
  try {
    call_with_retry(p, "nli", "deberta", [&]() -> int {
      ++calls;
      throw TransportError("refused");
    });
    FAIL("expected ProviderError");
  } catch (const ProviderError& e) {
    CHECK(calls == 3);
    CHECK(e.attempts() == 3);
    CHECK(e.kind() == "nli");
    CHECK(e.model_id() == "deberta");
  }
  calls = 0;
  CHECK_THROWS_AS(call_with_retry(p, "nli", "m", [&]() -> int {
                    ++calls;
                    throw MockError("missing");
                  }),
                  MockError);
  CHECK(calls == 1);
}

TEST_CASE("parallel_ordered keeps index order and rethrows the lowest failure") {
  const auto out = parallel_ordered<int>(257, 6, [](std::size_t i) { return static_cast<int>(i * i); });
  REQUIRE(out.size() == 257);
  for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i] == static_cast<int>(i * i));
  CHECK(parallel_ordered<int>(0, 4, [](std::size_t) { return 1; }).empty());

  try {
    parallel_ordered<int>(100, 4, [](std::size_t i) -> int {
      if (i == 17 || i == 80) throw ValidationError("bad " + std::to_string(i));
      return 0;
    });
    FAIL("expected throw");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()) == "bad 17");
  }
}

TEST_CASE("http clients speak the JSON contracts") {
  TestServer ts;
  json last_embed, last_judge, last_nli, last_formality;
  std::string last_auth;
  auto& s = ts.server();
  s.Post("/embed", [&](const httplib::Request& req, httplib::Response& res) {
    last_embed = json::parse(req.body);
    json vectors = json::array();
    for (const auto& t : last_embed["input"]) vectors.push_back({double(t.get<std::string>().size()), 1.0});
    res.set_content(json{{"vectors", vectors}}.dump(), "application/json");
  });
  s.Post("/judge", [&](const httplib::Request& req, httplib::Response& res) {
    last_judge = json::parse(req.body);
    last_auth = req.get_header_value("Authorization");
    res.set_content(R"({"text":"0.7"})", "application/json");
  });
  s.Post("/nli", [&](const httplib::Request& req, httplib::Response& res) {
    last_nli = json::parse(req.body);
    res.set_content(R"({"entailment":1.4})", "application/json");
  });
  s.Post("/formality", [&](const httplib::Request& req, httplib::Response& res) {
    last_formality = json::parse(req.body);
    res.set_content(R"({"label":"informal","score":0.75})", "application/json");
  });
  s.Post("/generate", [&](const httplib::Request& req, httplib::Response& res) {
    res.set_content(json{{"text", "echo:" + json::parse(req.body)["prompt"].get<std::string>()}}.dump(),
                    "application/json");
  });

  auto emb = make_http_embedder(options(ProviderKind::kEmbedding, ts.url("/embed")));
  const auto v = emb->embed(std::vector<std::string>{"ab", "abcd"});
  REQUIRE(v.size() == 2);
  CHECK(v[0].values(0) == 2.0);
  CHECK(v[1].values(0) == 4.0);
  CHECK(last_embed["model"] == "test-model");
  CHECK(last_embed["input"] == json::array({"ab", "abcd"}));

  ::setenv("PREFALIGN_TEST_KEY", "sekret", 1);
  auto jo = options(ProviderKind::kJudge, ts.url("/judge"));
  jo.config.api_key_env = "PREFALIGN_TEST_KEY";
  auto judge = make_http_judge(jo);
  CHECK(judge->judge("sys", "usr") == "0.7");
  CHECK(last_judge == json{{"model", "test-model"}, {"system", "sys"}, {"user", "usr"}});
  CHECK(last_auth == "Bearer sekret");

  auto nli = make_http_nli(options(ProviderKind::kNli, ts.url("/nli")));
  CHECK(nli->entailment("p", "h") == 1.0);
  CHECK(last_nli["premise"] == "p");
  CHECK(last_nli["hypothesis"] == "h");

  auto form = make_http_formality(options(ProviderKind::kFormality, ts.url("/formality")));
  const auto r = form->classify("hey");
  CHECK(r.label == FormalityLabel::kInformal);
  CHECK(r.score == doctest::Approx(0.25));
  CHECK(last_formality["text"] == "hey");

  auto gen = make_http_generator(options(ProviderKind::kGenerator, ts.url("/generate")));
  CHECK(gen->complete("hi") == "echo:hi");
}

TEST_CASE("http retries on 5xx and reports attempts") {
  TestServer ts;
  std::atomic<int> hits{0};
  ts.server().Post("/flaky", [&](const httplib::Request&, httplib::Response& res) {
    if (++hits <= 2) {
      res.status = 503;
      return;
    }
    res.set_content(R"({"text":"0.5"})", "application/json");
  });
  ts.server().Post("/down", [&](const httplib::Request&, httplib::Response& res) { res.status = 500; });
  ts.server().Post("/bad", [&](const httplib::Request&, httplib::Response& res) { res.status = 400; });
  ts.server().Post("/junk", [&](const httplib::Request&, httplib::Response& res) {
    res.set_content("not json", "text/plain");
  });

  auto judge = make_http_judge(options(ProviderKind::kJudge, ts.url("/flaky"), 3));
  CHECK(judge->judge("s", "u") == "0.5");
  CHECK(hits == 3);

  auto down = make_http_judge(options(ProviderKind::kJudge, ts.url("/down"), 1));
  try {
    down->judge("s", "u");
    FAIL("expected ProviderError");
  } catch (const ProviderError& e) {
    CHECK(e.attempts() == 2);
    CHECK(e.kind() == "judge");
    CHECK(e.model_id() == "test-model");
  }
  CHECK_THROWS_AS(make_http_judge(options(ProviderKind::kJudge, ts.url("/bad"), 3))->judge("s", "u"), ProviderError);
  CHECK_THROWS_AS(make_http_judge(options(ProviderKind::kJudge, ts.url("/junk")))->judge("s", "u"), ProviderError);
}

TEST_CASE("embedding dimension drift is an integrity error") {
  TestServer ts;
  std::atomic<int> n{0};
  ts.server().Post("/embed", [&](const httplib::Request&, httplib::Response& res) {
    const int dim = ++n == 1 ? 3 : 4;
    res.set_content(json{{"vectors", {std::vector<double>(dim, 0.5)}}}.dump(), "application/json");
  });
  auto emb = make_http_embedder(options(ProviderKind::kEmbedding, ts.url("/embed")));
  emb->embed(std::vector<std::string>{"a"});
  CHECK_THROWS_AS(emb->embed(std::vector<std::string>{"b"}), IntegrityError);
}

TEST_CASE("http client construction checks") {
  CHECK_THROWS_AS(make_http_judge(options(ProviderKind::kNli, "http://127.0.0.1:1/x")), ConfigError);
  CHECK_THROWS_AS(make_http_judge(options(ProviderKind::kJudge, "")), ConfigError);
  CHECK_THROWS_AS(make_http_judge(options(ProviderKind::kJudge, "localhost/judge")), ConfigError);
  // Nothing listens on port 1.
  auto dead = make_http_judge(options(ProviderKind::kJudge, "http://127.0.0.1:1/judge", 1));
  CHECK_THROWS_AS(dead->judge("s", "u"), ProviderError);
}

TEST_CASE("in-flight limit is bounded by configuration") {
  TestServer ts;
  std::atomic<int> active{0}, peak{0};
  ts.server().Post("/nli", [&](const httplib::Request&, httplib::Response& res) {
    const int now = ++active;
    int p = peak.load();
    while (now > p && !peak.compare_exchange_weak(p, now)) {
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
    --active;
    res.set_content(R"({"entailment":0.5})", "application/json");
  });
  set_max_in_flight(2);
  CHECK(max_in_flight() == 2);
  auto nli = make_http_nli(options(ProviderKind::kNli, ts.url("/nli")));
  const auto out = parallel_ordered<double>(16, 8, [&](std::size_t) { return nli->entailment("p", "h"); });
  CHECK(out.size() == 16);
  CHECK(peak.load() <= 2);
  set_max_in_flight(4);
}
