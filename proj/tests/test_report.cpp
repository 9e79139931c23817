#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "lrpx/report.hpp"

using namespace lrpx;
using nlohmann::json;

namespace {

Explanation fake_explanation() {
  Explanation ex;
  ex.method = Method::kLrpAhLn;
  ex.target = ExplanationTarget::logit(1);
  ex.token_relevances = {0.125, -0.7500000000000003, 0.0, 1.0 / 3.0};
  ex.output_score = 2.7182818284590451;
  ex.wall_time_seconds = 0.0;
  return ex;
}

std::size_t count_occurrences(const std::string& hay, const std::string& needle) {
  std::size_t n = 0;
  for (std::size_t pos = hay.find(needle); pos != std::string::npos;
       pos = hay.find(needle, pos + needle.size()))
    ++n;
  return n;
}

}  // namespace

TEST_CASE("explanation json carries every field and round-trips doubles bitwise") {
  Explanation ex = fake_explanation();
  std::vector<int> tokens = {3, 1, 4, 1};
  std::vector<std::string> labels = {"pos0", "w1", "neg2", "w1"};

  json j = explanation_to_json(ex, tokens, &labels);
  CHECK(j["method"] == "lrp_ah_ln");
  CHECK(j["target"]["kind"] == "logit");
  CHECK(j["target"]["class"] == 1);
  CHECK(!j["target"].contains("negative_class"));
  CHECK(j["tokens"] == json(tokens));
  CHECK(j["token_strings"] == json(labels));
  CHECK(!j.contains("seed"));

  // serialize/parse must reproduce the exact double bits
  json back = json::parse(j.dump());
  for (std::size_t i = 0; i < tokens.size(); ++i)
    CHECK(back["relevances"][i].get<double>() == ex.token_relevances[i]);
  CHECK(back["output_score"].get<double>() == ex.output_score);

  json no_labels = explanation_to_json(ex, tokens);
  CHECK(!no_labels.contains("token_strings"));

  ex.method = Method::kRandom;
  ex.has_seed = true;
  ex.seed = 0xDEADBEEFull;
  json seeded = explanation_to_json(ex, tokens);
  CHECK(seeded["seed"].get<std::uint64_t>() == 0xDEADBEEFull);

  ex.target = ExplanationTarget::logit_diff(1, 0);
  json diff = explanation_to_json(ex, tokens);
  CHECK(diff["target"]["kind"] == "logit_diff");
  CHECK(diff["target"]["negative_class"] == 0);

  CHECK_THROWS_AS(explanation_to_json(ex, {3, 1}), std::invalid_argument);
  std::vector<std::string> short_labels = {"a"};
  CHECK_THROWS_AS(explanation_to_json(ex, tokens, &short_labels), std::invalid_argument);
}

TEST_CASE("html heatmap: one span per token, signed colors, scaled opacity, no scripts") {
  Explanation ex = fake_explanation();
  std::vector<std::string> labels = {"good", "<b>bad</b>", "zero", "third"};
  std::string page = explanation_html(ex, labels);

  CHECK(count_occurrences(page, "<span class=\"tok\"") == 4);
  CHECK(page.find("<script") == std::string::npos);
  CHECK(page.find("&lt;b&gt;bad&lt;/b&gt;") != std::string::npos);
  CHECK(page.find("<b>bad</b>") == std::string::npos);

  // max |r| = 0.75 -> opacities 0.1667, 1.0000, 0.0000, 0.4444
  CHECK(page.find("rgba(200,40,40,0.1667)") != std::string::npos);   // +0.125
  CHECK(page.find("rgba(40,70,200,1.0000)") != std::string::npos);   // -0.75
  CHECK(page.find("rgba(200,40,40,0.0000)") != std::string::npos);   // 0.0
  CHECK(page.find("rgba(200,40,40,0.4444)") != std::string::npos);   // +1/3

  // all-zero relevance: nothing lights up, and no division blowup
  Explanation flat = ex;
  flat.token_relevances = {0.0, 0.0, 0.0, 0.0};
  std::string flat_page = explanation_html(flat, labels);
  CHECK(count_occurrences(flat_page, ",0.0000)") == 4);

  std::vector<std::string> wrong = {"a", "b"};
  CHECK_THROWS_AS(explanation_html(ex, wrong), std::invalid_argument);
}

TEST_CASE("conservation csv round-trips through strtod and json keeps the pairs") {
  ConservationReport rep;
  rep.method = Method::kGi;
  rep.pairs = {{1.0 / 3.0, 0.33333333333333298}, {-2.5, -2.5000000000000004}};
  rep.mean_relative_deviation = 1.25e-7;
  rep.pearson = 0.99999999;

  std::string csv = conservation_csv(rep);
  CHECK(csv.rfind("f,relevance_sum\n", 0) == 0);

  // parse back both data lines
  std::size_t line_start = csv.find('\n') + 1;
  for (const auto& p : rep.pairs) {
    std::size_t comma = csv.find(',', line_start);
    std::size_t eol = csv.find('\n', line_start);
    double f = std::strtod(csv.substr(line_start, comma - line_start).c_str(), nullptr);
    double s = std::strtod(csv.substr(comma + 1, eol - comma - 1).c_str(), nullptr);
    CHECK(f == p.f);
    CHECK(s == p.relevance_sum);
    line_start = eol + 1;
  }
  CHECK(line_start == csv.size());

  json j = conservation_to_json(rep);
  CHECK(j["method"] == "gi");
  CHECK(j["n_examples"] == 2);
  CHECK(j["pairs"][1]["f"].get<double>() == -2.5);
  CHECK(json::parse(j.dump())["mean_relative_deviation"].get<double>() == 1.25e-7);
}

TEST_CASE("scatter svg is deterministic and draws one circle per pair") {
  ConservationReport rep;
  rep.method = Method::kLrpAhLn;
  rep.pairs = {{0.5, 0.5}, {1.5, 1.4999}, {-0.25, -0.25}};
  std::string a = scatter_svg(rep, "ah+ln <conservation>");
  std::string b = scatter_svg(rep, "ah+ln <conservation>");
  CHECK(a == b);
  CHECK(count_occurrences(a, "<circle") == 3);
  CHECK(a.find("&lt;conservation&gt;") != std::string::npos);
  CHECK(a.find("<script") == std::string::npos);

  ConservationReport empty;
  empty.method = Method::kGi;
  CHECK(count_occurrences(scatter_svg(empty, "t"), "<circle") == 0);
}

TEST_CASE("benchmark csv: exact header, one row per method, empty cells on failure") {
  BenchmarkTable table;
  table.dataset_id = "synth-0";
  table.seed = 7;
  table.n_examples = 12;
  BenchmarkRow ok_row;
  ok_row.method = Method::kGi;
  ok_row.ok = true;
  ok_row.mean_auac = 0.875;
  ok_row.mean_aumse = 0.0625;
  ok_row.mean_time_s = 0.001953125;
  BenchmarkRow bad_row;
  bad_row.method = Method::kAFlow;
  bad_row.ok = false;
  bad_row.note = "sequence length over flow cap";
  table.rows = {ok_row, bad_row};

  std::string csv = benchmark_csv(table);
  CHECK(csv.rfind("method,auac,aumse,mean_time_s\n", 0) == 0);
  CHECK(csv.find("gi,0.875,0.0625,0.001953125\n") != std::string::npos);
  CHECK(csv.find("a_flow,,,\n") != std::string::npos);

  json j = benchmark_to_json(table);
  CHECK(j["dataset_id"] == "synth-0");
  CHECK(j["seed"] == 7);
  CHECK(j["n_examples"] == 12);
  CHECK(j["rows"][0]["ok"] == true);
  CHECK(j["rows"][0]["auac"].get<double>() == 0.875);
  CHECK(!j["rows"][0].contains("note"));
  CHECK(j["rows"][1]["ok"] == false);
  CHECK(j["rows"][1]["note"] == "sequence length over flow cap");
  CHECK(!j["rows"][1].contains("auac"));
}

TEST_CASE("curve json and multi-curve svg") {
  PerturbationCurve c1;
  c1.task = PerturbationTask::kActivation;
  c1.method = Method::kGi;
  c1.example_id = 3;
  c1.points = {{0.0, 0.5}, {0.5, 0.9}, {1.0, 0.9}};
  c1.area = 0.8;
  PerturbationCurve c2 = c1;
  c2.method = Method::kRandom;
  c2.task = PerturbationTask::kPruning;
  c2.points = {{0.0, 0.0}, {0.5, 1.0}, {1.0, 16.0}};

  json j = curve_to_json(c1);
  CHECK(j["task"] == "activation");
  CHECK(j["method"] == "gi");
  CHECK(j["example_id"] == 3);
  CHECK(j["area"].get<double>() == 0.8);
  CHECK(j["points"].size() == 3);
  CHECK(j["points"][1][0].get<double>() == 0.5);
  CHECK(curve_to_json(c2)["task"] == "pruning");

  std::string svg = curves_svg({c1, c2}, "curves");
  CHECK(count_occurrences(svg, "<polyline") == 2);
  CHECK(svg.find(">gi</text>") != std::string::npos);
  CHECK(svg.find(">random</text>") != std::string::npos);
  CHECK(svg == curves_svg({c1, c2}, "curves"));
}

TEST_CASE("head and layernorm check serializers") {
  HeadConservationCheck chk;
  chk.lhs = 1.5;
  chk.rhs_base = 1.25;
  chk.correction = 0.25;
  chk.correction_cov = 0.25;
  chk.residual = 3e-12;
  json hj = head_check_to_json(chk, 1, 0);
  CHECK(hj["layer"] == 1);
  CHECK(hj["head"] == 0);
  CHECK(hj["residual"].get<double>() == 3e-12);

  std::vector<LnGroupCheck> checks(2);
  checks[0].group = 0;
  checks[0].measured = 0.4;
  checks[0].predicted = 0.4000001;
  checks[1].group = 1;
  checks[1].degenerate = true;
  json lj = ln_checks_to_json(checks, 3);
  CHECK(lj["ln_index"] == 3);
  CHECK(lj["groups"].size() == 2);
  CHECK(lj["groups"][0]["predicted"].get<double>() == 0.4000001);
  CHECK(lj["groups"][1]["degenerate"] == true);
}

TEST_CASE("write_text_file writes exactly and rejects bad paths") {
  std::string path = "test_report_tmp.txt";
  write_text_file(path, "line1\nline2");
  std::ifstream in(path, std::ios::binary);
  std::string got((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  in.close();
  CHECK(got == "line1\nline2");
  std::remove(path.c_str());

  CHECK_THROWS_AS(write_text_file("no_such_dir_xyz/file.txt", "x"), std::runtime_error);
}
