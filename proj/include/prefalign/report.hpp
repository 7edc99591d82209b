#pragma once

#include <array>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "prefalign/metrics.hpp"

namespace prefalign::report {

using metrics::Metric;

enum class Variant { kBaseline, kDpo, kExternal };

std::string_view variant_name(Variant v);  // "baseline", "dpo", "external-fixture"
Variant parse_variant(std::string_view name);

// Measured rows come from local runs; published rows from the fixtures file.
enum class Provenance { kMeasured, kPaper };

std::string_view provenance_name(Provenance p);
Provenance parse_provenance(std::string_view name);

struct TableRow {
  std::string model_label;
  Variant variant = Variant::kBaseline;
  Provenance provenance = Provenance::kMeasured;
  std::array<std::optional<double>, 8> cells;

  std::optional<double>& operator[](Metric m) { return cells[static_cast<std::size_t>(m)]; }
  const std::optional<double>& operator[](Metric m) const { return cells[static_cast<std::size_t>(m)]; }
};

struct BenchmarkTable {
  std::vector<TableRow> rows;

  const TableRow* find(std::string_view label, Variant variant) const;
  bool has_metric(Metric m) const;
  // Unique (label, variant) keys; every present cell finite.
  void validate() const;
};

struct LabeledReport {
  metrics::MetricReport report;
  Variant variant = Variant::kBaseline;
};

// JSON fixture rows: {"rows": [{model_label, variant, provenance, values: {key: number}}]}.
std::vector<TableRow> parse_fixtures(std::string_view json_text);
std::vector<TableRow> load_fixtures(const std::string& path);

// One row per report, then one per fixture row.
BenchmarkTable aggregate(std::span<const LabeledReport> reports, std::span<const TableRow> fixtures = {});

// Decimal places used when rendering a metric.
int display_decimals(Metric m);
std::string format_cell(Metric m, const std::optional<double>& v);

std::string render_markdown(const BenchmarkTable& table);
std::string render_csv(const BenchmarkTable& table);
BenchmarkTable parse_csv(std::string_view csv);

struct ChartSpec {
  std::vector<Metric> metrics;
  std::map<Metric, double> scale;  // missing entries mean 1
  std::string output_path;

  // SS:E, G-Eval and FKGL with the two unit metrics scaled by `factor`.
  static ChartSpec benchmark(double factor = 10.0);
  double factor(Metric m) const;
  void validate() const;
};

// Grouped bars: one group per metric, one bar per table row.
std::string render_chart_svg(const BenchmarkTable& table, const ChartSpec& spec);
// Renders and writes to spec.output_path.
void render_benchmark_chart(const BenchmarkTable& table, const ChartSpec& spec);

}  // namespace prefalign::report
