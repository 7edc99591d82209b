#include "prefalign/config.hpp"

#include <algorithm>
#include <filesystem>
#include <functional>

namespace prefalign::config {

namespace fs = std::filesystem;

KeyValues KeyValues::parse(std::string_view text, const std::string& origin) {
  KeyValues kv;
  kv.origin = origin;
  int line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const auto line = trim(text.substr(start, end - start));
    ++line_no;
    start = end + 1;
    if (line.empty() || line[0] == '#') {
      if (end == text.size()) break;
      continue;
    }
    const auto eq = line.find('=');
    const auto at = origin + ":" + std::to_string(line_no);
    if (eq == std::string::npos) throw ConfigError(at + ": expected 'section.key = value'");
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (key.empty() || key.find('.') == std::string::npos) {
      throw ConfigError(at + ": key '" + key + "' must have the form section.key");
    }
    kv.entries[key] = value;
    kv.lines[key] = line_no;
    if (end == text.size()) break;
  }
  return kv;
}

KeyValues KeyValues::load(const std::string& path) {
  if (!fs::is_regular_file(path)) throw IoError("config file not found: " + path);
  return parse(read_file(path), path);
}

namespace {

struct Ctx {
  std::string key;
  std::string value;
  std::string base_dir;
};

[[noreturn]] void bad(const Ctx& c, const std::string& what) {
  throw ConfigError("config key '" + c.key + "' = '" + c.value + "': " + what);
}

long long as_int(const Ctx& c) {
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(c.value, &used);
  } catch (const std::exception&) {
    bad(c, "expected an integer");
  }
  if (used != c.value.size()) bad(c, "expected an integer");
  return v;
}

int as_int32(const Ctx& c) {
  const auto v = as_int(c);
  if (v < INT32_MIN || v > INT32_MAX) bad(c, "out of range");
  return static_cast<int>(v);
}

std::uint64_t as_u64(const Ctx& c) {
  if (c.value.empty() || c.value[0] == '-') bad(c, "expected a non-negative integer");
  std::size_t used = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(c.value, &used);
  } catch (const std::exception&) {
    bad(c, "expected a non-negative integer");
  }
  if (used != c.value.size()) bad(c, "expected a non-negative integer");
  return v;
}

double as_real(const Ctx& c) {
  const auto v = parse_double(c.value);
  if (!v) bad(c, "expected a number");
  return *v;
}

bool as_bool(const Ctx& c) {
  const auto v = to_lower(c.value);
  if (v == "true" || v == "yes" || v == "1") return true;
  if (v == "false" || v == "no" || v == "0") return false;
  bad(c, "expected true or false");
}

std::vector<std::string> as_list(const Ctx& c) {
  std::vector<std::string> out;
  std::size_t p = 0;
  while (p <= c.value.size()) {
    auto q = c.value.find(',', p);
    if (q == std::string::npos) q = c.value.size();
    auto item = trim(std::string_view(c.value).substr(p, q - p));
    if (!item.empty()) out.push_back(std::move(item));
    p = q + 1;
  }
  return out;
}

std::string as_path(const Ctx& c) {
  if (c.value.empty()) return {};
  fs::path p(c.value);
  if (p.is_relative() && !c.base_dir.empty()) p = fs::path(c.base_dir) / p;
  return p.lexically_normal().string();
}

using Setter = std::function<void(RunConfig&, const Ctx&)>;

struct KeySpec {
  std::string key;
  std::string default_value;
  Setter set;
};

constexpr std::array<std::pair<std::string_view, providers::ProviderKind>, 6> kSlots = {{
    {"embedding_e", providers::ProviderKind::kEmbedding},
    {"embedding_t", providers::ProviderKind::kEmbedding},
    {"judge", providers::ProviderKind::kJudge},
    {"nli", providers::ProviderKind::kNli},
    {"formality", providers::ProviderKind::kFormality},
    {"generator", providers::ProviderKind::kGenerator},
}};

std::optional<providers::ProviderConfig>& slot(RunConfig& rc, std::string_view name) {
  auto& s = rc.providers;
  if (name == "embedding_e") return s.embedding_e;
  if (name == "embedding_t") return s.embedding_t;
  if (name == "judge") return s.judge;
  if (name == "nli") return s.nli;
  if (name == "formality") return s.formality;
  return s.generator;
}

std::string default_model_id(std::string_view name) {
  if (name == "embedding_e") return std::string(providers::kDefaultAdaEmbedding);
  if (name == "embedding_t") return std::string(providers::kDefaultSentenceEmbedding);
  if (name == "nli") return std::string(providers::kDefaultNliModel);
  if (name == "formality") return std::string(providers::kDefaultFormalityModel);
  if (name == "generator") return std::string(providers::kDefaultGeneratorModel);
  return {};  // the judge model has no default
}

const std::vector<KeySpec>& key_specs() {
  static const std::vector<KeySpec> specs = [] {
    std::vector<KeySpec> v = {
        {"run.seed", "42", [](RunConfig& r, const Ctx& c) { r.seed = as_u64(c); }},
        {"run.out_dir", "runs/default", [](RunConfig& r, const Ctx& c) { r.out_dir = as_path(c); }},
        {"corpus.paths", "", [](RunConfig& r, const Ctx& c) {
           r.corpus_paths.clear();
           for (auto& item : as_list(c)) r.corpus_paths.push_back(as_path({c.key, item, c.base_dir}));
         }},
        {"template.include_reference", "true",
         [](RunConfig& r, const Ctx& c) { r.pair_template.include_reference = as_bool(c); }},
        {"template.rejected_token_budget", "200",
         [](RunConfig& r, const Ctx& c) { r.pair_template.rejected_token_budget = as_int32(c); }},
        {"template.chosen_token_budget", "100",
         [](RunConfig& r, const Ctx& c) { r.pair_template.chosen_token_budget = as_int32(c); }},
        {"template.delimiter_rejected", std::string(corpus::kDelimiterRejected),
         [](RunConfig& r, const Ctx& c) { r.pair_template.delimiter_rejected = c.value; }},
        {"template.delimiter_chosen", std::string(corpus::kDelimiterChosen),
         [](RunConfig& r, const Ctx& c) { r.pair_template.delimiter_chosen = c.value; }},
        {"generate.max_in_flight", "4", [](RunConfig& r, const Ctx& c) { r.generation.max_in_flight = as_int32(c); }},
        {"generate.max_retries", "2", [](RunConfig& r, const Ctx& c) { r.generation.max_retries = as_int32(c); }},
        {"split.test_fraction", "0.2", [](RunConfig& r, const Ctx& c) { r.test_fraction = as_real(c); }},
        {"split.val_fraction", "0.125", [](RunConfig& r, const Ctx& c) { r.val_fraction = as_real(c); }},
        {"split.seed", "auto", [](RunConfig& r, const Ctx& c) { r.split_seed = as_u64(c); }},
        {"model.context_length", "256", [](RunConfig& r, const Ctx& c) { r.model.context_length = as_int32(c); }},
        {"model.layers", "2", [](RunConfig& r, const Ctx& c) { r.model.layers = as_int32(c); }},
        {"model.heads", "4", [](RunConfig& r, const Ctx& c) { r.model.heads = as_int32(c); }},
        {"model.embed_dim", "128", [](RunConfig& r, const Ctx& c) { r.model.embed_dim = as_int32(c); }},
        {"model.seed", "auto", [](RunConfig& r, const Ctx& c) { r.model.seed = as_u64(c); }},
        {"lora.rank", "8", [](RunConfig& r, const Ctx& c) { r.lora.rank = as_int32(c); }},
        {"lora.alpha", "16", [](RunConfig& r, const Ctx& c) { r.lora.alpha = as_real(c); }},
        {"lora.targets", "q_proj,v_proj", [](RunConfig& r, const Ctx& c) { r.lora.targets = as_list(c); }},
        {"lora.seed", "auto", [](RunConfig& r, const Ctx& c) { r.lora.seed = as_u64(c); }},
        {"dpo.beta", "0.1", [](RunConfig& r, const Ctx& c) { r.dpo.beta = as_real(c); }},
        {"dpo.peak_lr", "0.002", [](RunConfig& r, const Ctx& c) { r.dpo.peak_lr = as_real(c); }},
        {"dpo.warmup_steps", "10", [](RunConfig& r, const Ctx& c) { r.dpo.warmup_steps = as_int32(c); }},
        {"dpo.total_steps", "200", [](RunConfig& r, const Ctx& c) { r.dpo.total_steps = as_int32(c); }},
        {"dpo.batch_size", "8", [](RunConfig& r, const Ctx& c) { r.dpo.batch_size = as_int32(c); }},
        {"dpo.epochs", "4", [](RunConfig& r, const Ctx& c) { r.dpo.epochs = as_int32(c); }},
        {"dpo.patience", "2", [](RunConfig& r, const Ctx& c) { r.dpo.patience = as_int32(c); }},
        {"dpo.weight_decay", "0.01", [](RunConfig& r, const Ctx& c) { r.dpo.weight_decay = as_real(c); }},
        {"dpo.seed", "auto", [](RunConfig& r, const Ctx& c) { r.dpo.seed = as_u64(c); }},
        {"dpo.overflow", "truncate", [](RunConfig& r, const Ctx& c) {
           if (c.value == "truncate") r.overflow = dpo::Overflow::kTruncate;
           else if (c.value == "reject") r.overflow = dpo::Overflow::kReject;
           else bad(c, "expected truncate or reject");
         }},
        {"eval.max_new_tokens", "64", [](RunConfig& r, const Ctx& c) { r.eval_max_new_tokens = as_int32(c); }},
        {"eval.max_examples", "0", [](RunConfig& r, const Ctx& c) { r.eval_max_examples = as_int32(c); }},
        {"eval.workers", "4", [](RunConfig& r, const Ctx& c) { r.eval_workers = as_int32(c); }},
        {"eval.judge_samples", "1", [](RunConfig& r, const Ctx& c) { r.judge_options.samples = as_int32(c); }},
        {"eval.prompts_dir", "", [](RunConfig& r, const Ctx& c) { r.prompts_dir = as_path(c); }},
        {"report.fixtures", "", [](RunConfig& r, const Ctx& c) { r.fixtures_path = as_path(c); }},
        {"report.include_fixtures", "true", [](RunConfig& r, const Ctx& c) { r.include_fixtures = as_bool(c); }},
        {"report.model_label", "micro-lora", [](RunConfig& r, const Ctx& c) { r.model_label = c.value; }},
        {"report.chart_scale", "10", [](RunConfig& r, const Ctx& c) { r.chart_scale = as_real(c); }},
        {"providers.max_in_flight", "4", [](RunConfig& r, const Ctx& c) { r.providers.max_in_flight = as_int32(c); }},
    };
    for (const auto& [name, kind] : kSlots) {
      const std::string n(name);
      const auto prefix = "providers." + n + ".";
      auto touch = [n, kind = kind](RunConfig& r) -> providers::ProviderConfig& {
        auto& s = slot(r, n);
        if (!s) {
          s.emplace();
          s->kind = kind;
          s->model_id = default_model_id(n);
        }
        return *s;
      };
      v.push_back({prefix + "endpoint", "", [touch](RunConfig& r, const Ctx& c) { touch(r).endpoint = c.value; }});
      v.push_back({prefix + "model_id", default_model_id(n),
                   [touch](RunConfig& r, const Ctx& c) { touch(r).model_id = c.value; }});
      v.push_back({prefix + "api_key_env", "", [touch](RunConfig& r, const Ctx& c) { touch(r).api_key_env = c.value; }});
      v.push_back({prefix + "timeout_s", "30", [touch](RunConfig& r, const Ctx& c) { touch(r).timeout_s = as_real(c); }});
      v.push_back({prefix + "max_retries", "3", [touch](RunConfig& r, const Ctx& c) { touch(r).max_retries = as_int32(c); }});
      v.push_back({prefix + "backoff_base_s", "0.5",
                   [touch](RunConfig& r, const Ctx& c) { touch(r).backoff_base_s = as_real(c); }});
    }
    return v;
  }();
  return specs;
}

bool is_seed_key(std::string_view key) {
  return key == "split.seed" || key == "model.seed" || key == "lora.seed" || key == "dpo.seed";
}

bool is_provider_key(std::string_view key) { return key.starts_with("providers.") && key != "providers.max_in_flight"; }

}  // namespace

corpus::SplitSpec RunConfig::test_split() const { return {1.0 - test_fraction, split_seed}; }
corpus::SplitSpec RunConfig::val_split() const { return {1.0 - val_fraction, split_seed + 1}; }

void RunConfig::validate() const {
  if (out_dir.empty()) throw ConfigError("run.out_dir must not be empty");
  pair_template.validate();
  if (generation.max_in_flight < 1) throw ConfigError("generate.max_in_flight must be >= 1");
  if (generation.max_retries < 0) throw ConfigError("generate.max_retries must be >= 0");
  if (!(test_fraction > 0 && test_fraction < 1)) throw ConfigError("split.test_fraction must lie in (0, 1)");
  if (!(val_fraction > 0 && val_fraction < 1)) throw ConfigError("split.val_fraction must lie in (0, 1)");
  model.validate();
  lora.validate();
  dpo.validate();
  if (eval_max_new_tokens < 1) throw ConfigError("eval.max_new_tokens must be >= 1");
  if (eval_max_examples < 0) throw ConfigError("eval.max_examples must be >= 0");
  if (eval_workers < 1) throw ConfigError("eval.workers must be >= 1");
  if (judge_options.samples < 1) throw ConfigError("eval.judge_samples must be >= 1");
  if (model_label.empty()) throw ConfigError("report.model_label must not be empty");
  if (!(chart_scale > 0)) throw ConfigError("report.chart_scale must be positive");
  if (providers.max_in_flight < 1) throw ConfigError("providers.max_in_flight must be >= 1");
}

std::string RunConfig::canonical_text() const {
  std::string out;
  // The output location is not part of what a run computes.
  for (const auto& [k, v] : resolved) {
    if (k != "run.out_dir") out += k + " = " + v + "\n";
  }
  return out;
}

std::string RunConfig::hash() const { return hex64(fnv1a64(canonical_text())); }

RunConfig resolve(const KeyValues& file, const Overrides& overrides, const std::string& base_dir) {
  const auto& specs = key_specs();
  std::map<std::string, const KeySpec*> by_key;
  for (const auto& s : specs) by_key[s.key] = &s;

  for (const auto& [k, v] : file.entries) {
    if (!by_key.count(k)) {
      const auto line = file.lines.count(k) ? ":" + std::to_string(file.lines.at(k)) : std::string();
      throw ConfigError(file.origin + line + ": unknown key '" + k + "'");
    }
  }

  RunConfig rc;
  // Provider slots only exist when the file mentions them.
  std::map<std::string, std::string> values;
  for (const auto& s : specs) {
    if (!is_provider_key(s.key)) values[s.key] = s.default_value;
  }
  std::map<std::string, bool> from_file;
  for (const auto& [k, v] : file.entries) {
    values[k] = v;
    from_file[k] = true;
  }
  if (overrides.seed) {
    values["run.seed"] = std::to_string(*overrides.seed);
    for (const auto& s : specs) {
      if (is_seed_key(s.key)) values[s.key] = "auto";
    }
  }
  if (overrides.out_dir) values["run.out_dir"] = *overrides.out_dir;

  // Component seeds default to fixed offsets from the master seed.
  const std::uint64_t master = as_u64({"run.seed", values["run.seed"], {}});
  const std::map<std::string, std::uint64_t> offsets = {
      {"split.seed", 1}, {"model.seed", 2}, {"lora.seed", 3}, {"dpo.seed", 4}};
  for (const auto& [k, off] : offsets) {
    if (values[k] == "auto") values[k] = std::to_string(master + off);
  }

  for (const auto& [k, v] : values) {
    // Overrides come from the command line and resolve against the cwd.
    const bool cli_path = k == "run.out_dir" && overrides.out_dir;
    by_key.at(k)->set(rc, {k, v, (from_file[k] && !cli_path) ? base_dir : std::string()});
  }
  // Record resolved paths, not the raw text.
  values["run.out_dir"] = rc.out_dir;
  rc.resolved = std::move(values);
  return rc;
}

RunConfig load_run_config(const std::optional<std::string>& path, const Overrides& overrides) {
  if (!path) return resolve(KeyValues{}, overrides, {});
  const auto kv = KeyValues::load(*path);
  const auto base = fs::path(*path).parent_path().string();
  return resolve(kv, overrides, base);
}

std::vector<std::pair<std::string, std::string>> documented_keys() {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& s : key_specs()) out.emplace_back(s.key, s.default_value);
  return out;
}

}  // namespace prefalign::config
