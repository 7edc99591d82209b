#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "prefalign/report.hpp"

using namespace prefalign;
using namespace prefalign::report;
using metrics::MetricReport;

namespace {

std::string fixtures_path() { return std::string(PREFALIGN_DATA_DIR) + "/fixtures/paper_values.json"; }

MetricReport measured(std::string label, double ss_e) {
  MetricReport r;
  r.model_label = std::move(label);
  r.aggregates[static_cast<std::size_t>(Metric::kSsE)] = ss_e;
  r.aggregates[static_cast<std::size_t>(Metric::kGEval)] = 0.5;
  r.aggregates[static_cast<std::size_t>(Metric::kFkgl)] = 7.125;
  return r;
}

// Markdown cells for one row of one family table, split on '|'.
std::vector<std::string> md_row(const std::string& md, const std::string& family, const std::string& label,
                                const std::string& variant_title) {
  const auto start = md.find("## " + family);
  REQUIRE(start != std::string::npos);
  const auto end = md.find("\n## ", start + 1);
  const auto section = md.substr(start, end == std::string::npos ? std::string::npos : end - start);
  const auto key = "| " + label + " | " + variant_title + " |";
  const auto pos = section.find(key);
  REQUIRE(pos != std::string::npos);
  const auto line = section.substr(pos, section.find('\n', pos) - pos);
  std::vector<std::string> cells;
  std::size_t p = 1;
  while (p < line.size()) {
    const auto q = line.find('|', p);
    cells.push_back(trim(line.substr(p, q - p)));
    p = q + 1;
  }
  return cells;
}

}  // namespace

TEST_CASE("fixtures file loads") {
  const auto rows = load_fixtures(fixtures_path());
  CHECK(rows.size() == 7);
  for (const auto& r : rows) CHECK(r.provenance == Provenance::kPaper);
  BenchmarkTable t{rows};
  const auto* llama = t.find("Llama3.1-8B", Variant::kBaseline);
  REQUIRE(llama);
  CHECK(*(*llama)[Metric::kSsE] == 0.793);
  CHECK(*(*llama)[Metric::kFkgl] == 12.654);
  const auto* rag = t.find("Llama3.1-8B RAG", Variant::kExternal);
  REQUIRE(rag);
  CHECK(*(*rag)[Metric::kFkgl] == 13.64);
  CHECK_FALSE((*rag)[Metric::kSsE].has_value());
}

TEST_CASE("aggregate row counts and duplicates") {
  const auto fixtures = load_fixtures(fixtures_path());
  std::vector<LabeledReport> reports = {{measured("micro", 0.6), Variant::kBaseline},
                                        {measured("micro", 0.7), Variant::kDpo}};
  auto t = aggregate(reports);
  CHECK(t.rows.size() == 2);
  t = aggregate(reports, fixtures);
  CHECK(t.rows.size() == 2 + fixtures.size());
  CHECK(t.rows[0].provenance == Provenance::kMeasured);
  CHECK(aggregate({}, fixtures).rows.size() == fixtures.size());

  reports.push_back({measured("micro", 0.8), Variant::kDpo});
  CHECK_THROWS_WITH_AS(aggregate(reports), doctest::Contains("duplicate"), ValidationError);
}

TEST_CASE("markdown reproduces the printed tables") {
  const auto table = aggregate({}, load_fixtures(fixtures_path()));
  const auto md = render_markdown(table);

  struct Printed {
    const char* label;
    const char* variant;
    const char* family;
    std::vector<std::string> cells;
  };
  // Values as printed, after 3-decimal (unit metrics) or 2-decimal (FK-GL) rounding.
  const std::vector<Printed> expected = {
      {"Llama3.1-8B", "Baseline", "Semantic similarity", {"0.793", "0.798"}},
      {"DeepSeek-R1-Distill-Qwen-7B", "Baseline", "Semantic similarity", {"0.664", "0.698"}},
      {"Mistral-7B-v0.3", "Baseline", "Semantic similarity", {"0.778", "0.770"}},
      {"Llama3.1-8B", "DPO-Tuned", "Semantic similarity", {"0.834", "0.847"}},
      {"DeepSeek-R1-Distill-Qwen-7B", "DPO-Tuned", "Semantic similarity", {"0.732", "0.714"}},
      {"Mistral-7B-v0.3", "DPO-Tuned", "Semantic similarity", {"0.821", "0.847"}},
      {"Llama3.1-8B", "Baseline", "Factual correctness", {"0.730", "0.801", "0.801"}},
      {"DeepSeek-R1-Distill-Qwen-7B", "Baseline", "Factual correctness", {"0.522", "0.782", "0.634"}},
      {"Mistral-7B-v0.3", "Baseline", "Factual correctness", {"0.706", "0.793", "0.838"}},
      {"Llama3.1-8B", "DPO-Tuned", "Factual correctness", {"0.782", "0.844", "0.816"}},
      {"DeepSeek-R1-Distill-Qwen-7B", "DPO-Tuned", "Factual correctness", {"0.720", "0.821", "0.792"}},
      {"Mistral-7B-v0.3", "DPO-Tuned", "Factual correctness", {"0.755", "0.874", "0.847"}},
      {"Llama3.1-8B", "Baseline", "Human-centric", {"12.65", "0.696", "0.878"}},
      {"DeepSeek-R1-Distill-Qwen-7B", "Baseline", "Human-centric", {"10.37", "0.522", "0.918"}},
      {"Mistral-7B-v0.3", "Baseline", "Human-centric", {"11.93", "0.707", "0.964"}},
      {"Llama3.1-8B", "DPO-Tuned", "Human-centric", {"11.97", "0.725", "0.887"}},
      {"DeepSeek-R1-Distill-Qwen-7B", "DPO-Tuned", "Human-centric", {"9.30", "0.720", "0.976"}},
      {"Mistral-7B-v0.3", "DPO-Tuned", "Human-centric", {"9.34", "0.756", "0.856"}},
  };
  for (const auto& e : expected) {
    INFO(e.label << " " << e.variant << " " << e.family);
    const auto cells = md_row(md, e.family, e.label, e.variant);
    REQUIRE(cells.size() == 3 + e.cells.size());
    CHECK(cells[2] == "paper");
    for (std::size_t i = 0; i < e.cells.size(); ++i) CHECK(cells[3 + i] == e.cells[i]);
  }
  const auto rag = md_row(md, "Human-centric", "Llama3.1-8B RAG", "External (paper-reported)");
  CHECK(rag[3] == "13.64");
  CHECK(rag[4] == "\xE2\x80\x94");
  CHECK(md == render_markdown(table));
}

TEST_CASE("cell formatting") {
  CHECK(format_cell(Metric::kFkgl, 12.654) == "12.65");
  CHECK(format_cell(Metric::kFormality, 0.8781) == "0.878");
  CHECK(format_cell(Metric::kSsE, std::nullopt) == "\xE2\x80\x94");
  CHECK(display_decimals(Metric::kFkgl) == 2);
  CHECK(display_decimals(Metric::kNli) == 3);
}

TEST_CASE("csv round trip is a numeric identity") {
  std::vector<LabeledReport> reports = {{measured("micro, \"quoted\"", 0.1 + 0.2), Variant::kBaseline}};
  const auto t = aggregate(reports, load_fixtures(fixtures_path()));
  const auto csv = render_csv(t);
  const auto back = parse_csv(csv);
  REQUIRE(back.rows.size() == t.rows.size());
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    CHECK(back.rows[i].model_label == t.rows[i].model_label);
    CHECK(back.rows[i].variant == t.rows[i].variant);
    CHECK(back.rows[i].provenance == t.rows[i].provenance);
    CHECK(back.rows[i].cells == t.rows[i].cells);
  }
  CHECK(render_csv(back) == csv);
  CHECK_THROWS_AS(parse_csv("nope\n"), ValidationError);
}

TEST_CASE("benchmark chart scaling") {
  const auto table = aggregate({}, load_fixtures(fixtures_path()));
  const auto before = render_csv(table);
  const auto svg = render_chart_svg(table, ChartSpec::benchmark());
  CHECK(svg.find("data-metric=\"ss_e\" data-row=\"Llama3.1-8B (dpo)\" data-raw=\"0.834\" data-value=\"8.34\"") !=
        std::string::npos);
  CHECK(svg.find("data-metric=\"g_eval\" data-row=\"Llama3.1-8B (baseline)\" data-raw=\"0.73\" data-value=\"7.3\"") !=
        std::string::npos);
  CHECK(svg.find("data-metric=\"fkgl\" data-row=\"Llama3.1-8B RAG (external-fixture)\" data-raw=\"13.64\" "
                 "data-value=\"13.64\"") != std::string::npos);
  CHECK(svg.find("data-metric=\"fkgl\" data-row=\"Llama3.1-8B (baseline)\" data-raw=\"12.654\" data-value=\"12.654\"") !=
        std::string::npos);
  CHECK(svg.find("data-raw=\"0.793\" data-value=\"7.93\"") != std::string::npos);
  CHECK(render_csv(table) == before);
  CHECK(render_chart_svg(table, ChartSpec::benchmark()) == svg);

  const auto unit = render_chart_svg(table, ChartSpec::benchmark(1.0));
  CHECK(unit.find("data-raw=\"0.834\" data-value=\"0.834\"") != std::string::npos);
}

TEST_CASE("chart errors") {
  std::vector<LabeledReport> reports = {{measured("micro", 0.6), Variant::kBaseline}};
  const auto table = aggregate(reports);
  auto spec = ChartSpec::benchmark();
  spec.metrics.push_back(Metric::kNli);
  CHECK_THROWS_WITH_AS(render_chart_svg(table, spec), doctest::Contains("nli"), ValidationError);
  spec = ChartSpec::benchmark(0.0);
  CHECK_THROWS_AS(render_chart_svg(table, spec), ConfigError);
  spec = ChartSpec::benchmark(-2.0);
  CHECK_THROWS_AS(render_chart_svg(table, spec), ConfigError);
}

TEST_CASE("chart file output") {
  const auto dir = std::filesystem::temp_directory_path() / "prefalign_test_report";
  std::filesystem::create_directories(dir);
  auto spec = ChartSpec::benchmark();
  spec.output_path = (dir / "benchmark.svg").string();
  const auto table = aggregate({}, load_fixtures(fixtures_path()));
  render_benchmark_chart(table, spec);
  CHECK(read_file(spec.output_path) == render_chart_svg(table, spec));
  std::filesystem::remove_all(dir);
}
