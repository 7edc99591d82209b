#include "prefalign/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include <json.hpp>

namespace prefalign::report {

using metrics::kAllMetrics;
using metrics::metric_key;
using metrics::metric_title;

namespace {

constexpr std::array<std::string_view, 3> kVariantNames = {"baseline", "dpo", "external-fixture"};
constexpr std::array<std::string_view, 3> kVariantTitles = {"Baseline", "DPO-Tuned", "External (paper-reported)"};

struct Family {
  std::string_view title;
  std::vector<Metric> metrics;
};

const std::array<Family, 3>& families() {
  static const std::array<Family, 3> f = {
      Family{"Semantic similarity", {Metric::kSsE, Metric::kSsT}},
      Family{"Factual correctness", {Metric::kGEval, Metric::kNli, Metric::kModBert}},
      Family{"Human-centric", {Metric::kFkgl, Metric::kGEmpathic, Metric::kFormality}},
  };
  return f;
}

std::string key_string(const TableRow& r) {
  return r.model_label + " (" + std::string(variant_name(r.variant)) + ")";
}

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string significant(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

}  // namespace

std::string_view variant_name(Variant v) { return kVariantNames[static_cast<std::size_t>(v)]; }

Variant parse_variant(std::string_view name) {
  for (std::size_t i = 0; i < kVariantNames.size(); ++i) {
    if (kVariantNames[i] == name) return static_cast<Variant>(i);
  }
  throw ValidationError("unknown variant '" + std::string(name) + "'");
}

std::string_view provenance_name(Provenance p) { return p == Provenance::kPaper ? "paper" : "measured"; }

Provenance parse_provenance(std::string_view name) {
  if (name == "paper") return Provenance::kPaper;
  if (name == "measured") return Provenance::kMeasured;
  throw ValidationError("unknown provenance '" + std::string(name) + "'");
}

const TableRow* BenchmarkTable::find(std::string_view label, Variant variant) const {
  for (const auto& r : rows) {
    if (r.model_label == label && r.variant == variant) return &r;
  }
  return nullptr;
}

bool BenchmarkTable::has_metric(Metric m) const {
  return std::any_of(rows.begin(), rows.end(), [&](const TableRow& r) { return r[m].has_value(); });
}

void BenchmarkTable::validate() const {
  std::set<std::pair<std::string, Variant>> seen;
  for (const auto& r : rows) {
    if (r.model_label.empty()) throw ValidationError("table row with empty model label");
    if (!seen.emplace(r.model_label, r.variant).second) {
      throw ValidationError("duplicate table row " + key_string(r));
    }
    for (auto m : kAllMetrics) {
      if (r[m] && !std::isfinite(*r[m])) {
        throw ValidationError("non-finite " + std::string(metric_key(m)) + " in row " + key_string(r));
      }
    }
  }
}

std::vector<TableRow> parse_fixtures(std::string_view json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("fixtures: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("rows") || !doc["rows"].is_array()) {
    throw ValidationError("fixtures: expected an object with a \"rows\" array");
  }
  std::vector<TableRow> out;
  for (const auto& j : doc["rows"]) {
    TableRow r;
    try {
      r.model_label = j.at("model_label").get<std::string>();
      r.variant = parse_variant(j.at("variant").get<std::string>());
      r.provenance = parse_provenance(j.value("provenance", std::string("paper")));
      for (const auto& [key, value] : j.at("values").items()) {
        r[metrics::parse_metric(key)] = value.get<double>();
      }
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(std::string("fixtures row: ") + e.what());
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<TableRow> load_fixtures(const std::string& path) { return parse_fixtures(read_file(path)); }

BenchmarkTable aggregate(std::span<const LabeledReport> reports, std::span<const TableRow> fixtures) {
  BenchmarkTable t;
  for (const auto& lr : reports) {
    TableRow r;
    r.model_label = lr.report.model_label;
    r.variant = lr.variant;
    r.provenance = Provenance::kMeasured;
    r.cells = lr.report.aggregates;
    t.rows.push_back(std::move(r));
  }
  t.rows.insert(t.rows.end(), fixtures.begin(), fixtures.end());
  t.validate();
  return t;
}

int display_decimals(Metric m) { return m == Metric::kFkgl ? 2 : 3; }

std::string format_cell(Metric m, const std::optional<double>& v) {
  if (!v) return "\xE2\x80\x94";
  return fixed(*v, display_decimals(m));
}

std::string render_markdown(const BenchmarkTable& table) {
  table.validate();
  if (table.rows.empty()) throw ValidationError("render_markdown: empty table");
  std::string out = "# Benchmark\n";
  for (const auto& fam : families()) {
    out += "\n## " + std::string(fam.title) + "\n\n| Model | Variant | Source |";
    for (auto m : fam.metrics) out += " " + std::string(metric_title(m)) + " |";
    out += "\n|---|---|---|";
    for (std::size_t i = 0; i < fam.metrics.size(); ++i) out += "---:|";
    out += "\n";
    for (auto v : {Variant::kBaseline, Variant::kDpo, Variant::kExternal}) {
      for (const auto& r : table.rows) {
        if (r.variant != v) continue;
        out += "| " + r.model_label + " | " + std::string(kVariantTitles[static_cast<std::size_t>(v)]) + " | " +
               std::string(provenance_name(r.provenance)) + " |";
        for (auto m : fam.metrics) out += " " + format_cell(m, r[m]) + " |";
        out += "\n";
      }
    }
  }
  return out;
}

std::string render_csv(const BenchmarkTable& table) {
  table.validate();
  std::string out = "model_label,variant,provenance";
  for (auto m : kAllMetrics) out += "," + std::string(metric_key(m));
  out += "\n";
  for (const auto& r : table.rows) {
    out += csv_quote(r.model_label) + "," + std::string(variant_name(r.variant)) + "," +
           std::string(provenance_name(r.provenance));
    for (auto m : kAllMetrics) out += "," + (r[m] ? format_shortest(*r[m]) : std::string());
    out += "\n";
  }
  return out;
}

BenchmarkTable parse_csv(std::string_view csv) {
  const auto lines = split_lines(csv);
  if (lines.empty()) throw ValidationError("table csv: missing header");
  const auto header = csv_split(lines[0]);
  if (header.size() != 11 || header[0] != "model_label") throw ValidationError("table csv: bad header");
  BenchmarkTable t;
  for (std::size_t n = 1; n < lines.size(); ++n) {
    const auto f = csv_split(lines[n]);
    if (f.size() != 11) throw ValidationError("table csv line " + std::to_string(n + 1) + ": expected 11 fields");
    TableRow r;
    r.model_label = f[0];
    r.variant = parse_variant(f[1]);
    r.provenance = parse_provenance(f[2]);
    for (std::size_t k = 0; k < 8; ++k) {
      if (f[k + 3].empty()) continue;
      r.cells[k] = parse_double(f[k + 3]);
      if (!r.cells[k]) throw ValidationError("table csv line " + std::to_string(n + 1) + ": bad number");
    }
    t.rows.push_back(std::move(r));
  }
  t.validate();
  return t;
}

// ---------------------------------------------------------------------------
// Chart

ChartSpec ChartSpec::benchmark(double factor) {
  ChartSpec s;
  s.metrics = {Metric::kSsE, Metric::kGEval, Metric::kFkgl};
  s.scale = {{Metric::kSsE, factor}, {Metric::kGEval, factor}};
  return s;
}

double ChartSpec::factor(Metric m) const {
  const auto it = scale.find(m);
  return it == scale.end() ? 1.0 : it->second;
}

void ChartSpec::validate() const {
  if (metrics.empty()) throw ConfigError("chart: no metrics requested");
  for (const auto& [m, f] : scale) {
    if (!(f > 0.0) || !std::isfinite(f)) {
      throw ConfigError("chart: scale factor for " + std::string(metric_key(m)) + " must be positive");
    }
  }
}

std::string render_chart_svg(const BenchmarkTable& table, const ChartSpec& spec) {
  spec.validate();
  table.validate();
  for (auto m : spec.metrics) {
    if (!table.has_metric(m)) throw ValidationError("chart: metric '" + std::string(metric_key(m)) + "' missing from table");
  }

  static constexpr std::array<std::string_view, 8> palette = {"#4c72b0", "#dd8452", "#55a868", "#c44e52",
                                                               "#8172b3", "#937860", "#da8bc3", "#8c8c8c"};
  const int bar_w = 18, gap = 30, left = 60, top = 30, plot_h = 300, legend_row = 18;
  const int n_rows = static_cast<int>(table.rows.size());
  const int group_w = std::max(1, n_rows) * bar_w;
  const int n_groups = static_cast<int>(spec.metrics.size());
  const int plot_w = n_groups * group_w + (n_groups + 1) * gap;
  const int width = left + plot_w + 20;
  const int height = top + plot_h + 40 + legend_row * n_rows + 10;

  double y_max = 1.0;
  for (auto m : spec.metrics) {
    for (const auto& r : table.rows) {
      if (r[m]) y_max = std::max(y_max, *r[m] * spec.factor(m));
    }
  }
  y_max = std::ceil(y_max);
  const auto y_of = [&](double v) { return top + plot_h - std::max(0.0, v) / y_max * plot_h; };

  std::string out;
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) + "\" height=\"" +
         std::to_string(height) + "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  // Axis and ticks.
  out += "<line x1=\"" + std::to_string(left) + "\" y1=\"" + std::to_string(top) + "\" x2=\"" + std::to_string(left) +
         "\" y2=\"" + std::to_string(top + plot_h) + "\" stroke=\"black\"/>\n";
  out += "<line x1=\"" + std::to_string(left) + "\" y1=\"" + std::to_string(top + plot_h) + "\" x2=\"" +
         std::to_string(left + plot_w) + "\" y2=\"" + std::to_string(top + plot_h) + "\" stroke=\"black\"/>\n";
  const int ticks = 5;
  for (int i = 0; i <= ticks; ++i) {
    const double v = y_max * i / ticks;
    const auto y = fixed(y_of(v), 2);
    out += "<line x1=\"" + std::to_string(left - 4) + "\" y1=\"" + y + "\" x2=\"" + std::to_string(left) +
           "\" y2=\"" + y + "\" stroke=\"black\"/>\n";
    out += "<text x=\"" + std::to_string(left - 6) + "\" y=\"" + y + "\" text-anchor=\"end\" dominant-baseline=\"middle\">" +
           fixed(v, 1) + "</text>\n";
  }

  for (int g = 0; g < n_groups; ++g) {
    const Metric m = spec.metrics[static_cast<std::size_t>(g)];
    const double f = spec.factor(m);
    const int gx = left + gap + g * (group_w + gap);
    for (int i = 0; i < n_rows; ++i) {
      const auto& r = table.rows[static_cast<std::size_t>(i)];
      if (!r[m]) continue;
      const double scaled = std::stod(significant(*r[m] * f, 12));
      const double y = y_of(scaled);
      out += "<rect class=\"bar\" data-metric=\"" + std::string(metric_key(m)) + "\" data-row=\"" +
             xml_escape(key_string(r)) + "\" data-raw=\"" + format_shortest(*r[m]) + "\" data-value=\"" +
             format_shortest(scaled) + "\" x=\"" + std::to_string(gx + i * bar_w) + "\" y=\"" + fixed(y, 2) +
             "\" width=\"" + std::to_string(bar_w - 2) + "\" height=\"" + fixed(top + plot_h - y, 2) + "\" fill=\"" +
             std::string(palette[static_cast<std::size_t>(i) % palette.size()]) + "\"/>\n";
    }
    std::string label(metric_title(m));
    if (f != 1.0) label += " (x" + format_shortest(f) + ")";
    out += "<text x=\"" + std::to_string(gx + group_w / 2) + "\" y=\"" + std::to_string(top + plot_h + 16) +
           "\" text-anchor=\"middle\">" + xml_escape(label) + "</text>\n";
  }

  for (int i = 0; i < n_rows; ++i) {
    const auto& r = table.rows[static_cast<std::size_t>(i)];
    const int y = top + plot_h + 36 + i * legend_row;
    out += "<rect x=\"" + std::to_string(left) + "\" y=\"" + std::to_string(y) + "\" width=\"12\" height=\"12\" fill=\"" +
           std::string(palette[static_cast<std::size_t>(i) % palette.size()]) + "\"/>\n";
    out += "<text x=\"" + std::to_string(left + 18) + "\" y=\"" + std::to_string(y + 10) + "\">" +
           xml_escape(key_string(r) + (r.provenance == Provenance::kPaper ? " [paper]" : "")) + "</text>\n";
  }
  out += "</svg>\n";
  return out;
}

void render_benchmark_chart(const BenchmarkTable& table, const ChartSpec& spec) {
  if (spec.output_path.empty()) throw ConfigError("chart: output path not set");
  write_file(spec.output_path, render_chart_svg(table, spec));
}

}  // namespace prefalign::report
