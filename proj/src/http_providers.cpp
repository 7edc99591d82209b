// Eigen must precede httplib: <resolv.h> defines a `_res` macro that
// collides with Eigen parameter names.
#include "prefalign/providers.hpp"

#include <httplib.h>

#include <condition_variable>
#include <cstdlib>
#include <json.hpp>

namespace prefalign::providers {

namespace {

using nlohmann::json;

class InFlightLimiter {
 public:
  void set_limit(int n) {
    std::lock_guard lock(mutex_);
    limit_ = std::max(1, n);
    cv_.notify_all();
  }
  int limit() const {
    std::lock_guard lock(mutex_);
    return limit_;
  }
  void acquire() {
    std::unique_lock lock(mutex_);
    cv_.wait(lock, [&] { return active_ < limit_; });
    ++active_;
  }
  void release() {
    std::lock_guard lock(mutex_);
    --active_;
    cv_.notify_one();
  }

 private:
  mutable std::mutex mutex_;
  std::condition_variable cv_;
  int limit_ = 4;
  int active_ = 0;
};

InFlightLimiter& limiter() {
  static InFlightLimiter instance;
  return instance;
}

struct Slot {
  Slot() { limiter().acquire(); }
  ~Slot() { limiter().release(); }
  Slot(const Slot&) = delete;
  Slot& operator=(const Slot&) = delete;
};

struct Endpoint {
  std::string base;  // scheme://host[:port]
  std::string path;
};

Endpoint split_endpoint(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) throw ConfigError("endpoint must be an absolute URL: " + url);
  const auto slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) return {url, "/"};
  return {url.substr(0, slash), url.substr(slash)};
}

class JsonTransport {
 public:
  explicit JsonTransport(HttpOptions options)
      : options_(std::move(options)), endpoint_(split_endpoint(options_.config.endpoint)) {}

  const std::string& model_id() const { return options_.config.model_id; }

  json post(const json& body) const {
    const auto kind = to_string(options_.config.kind);
    return call_with_retry(options_.retry, kind, model_id(), [&] { return post_once(body); });
  }

 private:
  json post_once(const json& body) const {
    Slot slot;
    httplib::Client client(endpoint_.base);
    const auto timeout = std::chrono::duration<double>(options_.config.timeout_s);
    client.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
    client.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
    client.set_write_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
    httplib::Headers headers;
    if (!options_.config.api_key_env.empty()) {
      if (const char* key = std::getenv(options_.config.api_key_env.c_str()); key && *key) {
        headers.emplace("Authorization", std::string("Bearer ") + key);
      }
    }
    auto res = client.Post(endpoint_.path, headers, body.dump(), "application/json");
    if (!res) throw TransportError("transport error: " + httplib::to_string(res.error()));
    if (res->status == 429 || res->status >= 500) {
      throw TransportError("HTTP " + std::to_string(res->status));
    }
    if (res->status != 200) {
      throw ProviderError(std::string(to_string(options_.config.kind)), model_id(), 1,
                          "HTTP " + std::to_string(res->status) + ": " + res->body);
    }
    try {
      return json::parse(res->body);
    } catch (const json::exception& e) {
      throw ProviderError(std::string(to_string(options_.config.kind)), model_id(), 1,
                          std::string("malformed JSON response: ") + e.what());
    }
  }

  HttpOptions options_;
  Endpoint endpoint_;
};

template <typename T>
T field(const json& j, const char* name, const JsonTransport& t, std::string_view kind) {
  try {
    return j.at(name).get<T>();
  } catch (const json::exception& e) {
    throw ProviderError(std::string(kind), t.model_id(), 1,
                        std::string("response missing field '") + name + "': " + e.what());
  }
}

class HttpEmbedder final : public Embedder {
 public:
  explicit HttpEmbedder(HttpOptions o) : transport_(std::move(o)) {}
  const std::string& model_id() const override { return transport_.model_id(); }

 protected:
  std::vector<Eigen::VectorXd> do_embed(std::span<const std::string> texts) override {
    json body = {{"model", model_id()}, {"input", std::vector<std::string>(texts.begin(), texts.end())}};
    const auto rows = field<std::vector<std::vector<double>>>(transport_.post(body), "vectors",
                                                              transport_, "embedding");
    std::vector<Eigen::VectorXd> out;
    out.reserve(rows.size());
    for (const auto& r : rows) {
      out.push_back(Eigen::Map<const Eigen::VectorXd>(r.data(), static_cast<Eigen::Index>(r.size())));
    }
    return out;
  }

 private:
  JsonTransport transport_;
};

class HttpJudge final : public Judge {
 public:
  explicit HttpJudge(HttpOptions o) : transport_(std::move(o)) {}
  const std::string& model_id() const override { return transport_.model_id(); }

 protected:
  std::string do_judge(std::string_view system, std::string_view user) override {
    json body = {{"model", model_id()}, {"system", system}, {"user", user}};
    return field<std::string>(transport_.post(body), "text", transport_, "judge");
  }

 private:
  JsonTransport transport_;
};

class HttpNli final : public NliClassifier {
 public:
  explicit HttpNli(HttpOptions o) : transport_(std::move(o)) {}
  const std::string& model_id() const override { return transport_.model_id(); }

 protected:
  double do_entailment(std::string_view premise, std::string_view hypothesis) override {
    json body = {{"model", model_id()}, {"premise", premise}, {"hypothesis", hypothesis}};
    return field<double>(transport_.post(body), "entailment", transport_, "nli");
  }

 private:
  JsonTransport transport_;
};

class HttpFormality final : public FormalityClassifier {
 public:
  explicit HttpFormality(HttpOptions o) : transport_(std::move(o)) {}
  const std::string& model_id() const override { return transport_.model_id(); }

 protected:
  FormalityResult do_classify(std::string_view text) override {
    json body = {{"model", model_id()}, {"text", text}};
    const auto reply = transport_.post(body);
    return normalize_formality(field<std::string>(reply, "label", transport_, "formality"),
                               field<double>(reply, "score", transport_, "formality"));
  }

 private:
  JsonTransport transport_;
};

class HttpGenerator final : public TextGenerator {
 public:
  explicit HttpGenerator(HttpOptions o) : transport_(std::move(o)) {}
  const std::string& model_id() const override { return transport_.model_id(); }

  std::string complete(std::string_view prompt) override {
    json body = {{"model", model_id()}, {"prompt", prompt}};
    return field<std::string>(transport_.post(body), "text", transport_, "generator");
  }

 private:
  JsonTransport transport_;
};

HttpOptions checked(HttpOptions o, ProviderKind expected) {
  if (o.config.kind != expected) {
    throw ConfigError("provider config kind '" + std::string(to_string(o.config.kind)) +
                      "' used for a " + std::string(to_string(expected)) + " client");
  }
  o.config.validate();
  if (o.config.endpoint.empty()) throw ConfigError(std::string(to_string(expected)) + " provider: endpoint is required");
  split_endpoint(o.config.endpoint);
  return o;
}

}  // namespace

HttpOptions http_options(const ProviderConfig& config) {
  HttpOptions o;
  o.config = config;
  o.retry.max_retries = config.max_retries;
  o.retry.backoff_base_s = config.backoff_base_s;
  return o;
}

std::unique_ptr<Embedder> make_http_embedder(HttpOptions o) {
  return std::make_unique<HttpEmbedder>(checked(std::move(o), ProviderKind::kEmbedding));
}
std::unique_ptr<Judge> make_http_judge(HttpOptions o) {
  return std::make_unique<HttpJudge>(checked(std::move(o), ProviderKind::kJudge));
}
std::unique_ptr<NliClassifier> make_http_nli(HttpOptions o) {
  return std::make_unique<HttpNli>(checked(std::move(o), ProviderKind::kNli));
}
std::unique_ptr<FormalityClassifier> make_http_formality(HttpOptions o) {
  return std::make_unique<HttpFormality>(checked(std::move(o), ProviderKind::kFormality));
}
std::unique_ptr<TextGenerator> make_http_generator(HttpOptions o) {
  return std::make_unique<HttpGenerator>(checked(std::move(o), ProviderKind::kGenerator));
}

void set_max_in_flight(int n) { limiter().set_limit(n); }
int max_in_flight() { return limiter().limit(); }

}  // namespace prefalign::providers
