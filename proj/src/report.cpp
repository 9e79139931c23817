#include "lrpx/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace lrpx {

using nlohmann::json;

namespace {

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::string f17(double v) { return fmt("%.17g", v); }
std::string f6(double v) { return fmt("%.6g", v); }

std::string html_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
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

json target_to_json(const ExplanationTarget& t) {
  json j;
  switch (t.kind) {
    case ExplanationTarget::Kind::kLogit:
      j["kind"] = "logit";
      j["class"] = t.c;
      break;
    case ExplanationTarget::Kind::kLogitDiff:
      j["kind"] = "logit_diff";
      j["class"] = t.c;
      j["negative_class"] = t.c_neg;
      break;
    case ExplanationTarget::Kind::kLogProb:
      j["kind"] = "log_prob";
      j["class"] = t.c;
      break;
  }
  return j;
}

}  // namespace

json explanation_to_json(const Explanation& ex, const std::vector<int>& tokens,
                         const std::vector<std::string>* labels) {
  if (tokens.size() != ex.token_relevances.size())
    throw std::invalid_argument("explanation_to_json: token count mismatch");
  json j;
  j["method"] = to_string(ex.method);
  j["target"] = target_to_json(ex.target);
  j["tokens"] = tokens;
  if (labels) {
    if (labels->size() != tokens.size())
      throw std::invalid_argument("explanation_to_json: label count mismatch");
    j["token_strings"] = *labels;
  }
  j["relevances"] = ex.token_relevances;
  j["output_score"] = ex.output_score;
  j["wall_time_seconds"] = ex.wall_time_seconds;
  if (ex.has_seed) j["seed"] = ex.seed;
  return j;
}

std::string explanation_html(const Explanation& ex, const std::vector<std::string>& labels) {
  if (labels.size() != ex.token_relevances.size())
    throw std::invalid_argument("explanation_html: label count mismatch");
  double max_abs = 0.0;
  for (double r : ex.token_relevances) max_abs = std::max(max_abs, std::abs(r));

  std::string page;
  page +=
      "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n"
      "<title>token relevance</title>\n<style>\n"
      "body { font-family: sans-serif; margin: 2rem; max-width: 60rem; }\n"
      ".tok { display: inline-block; padding: 2px 5px; margin: 2px; border-radius: 3px; }\n"
      ".legend { color: #555; font-size: 0.9rem; }\n"
      "</style>\n</head>\n<body>\n";
  page += "<h1>token relevance</h1>\n<p>method: " + to_string(ex.method) +
          "; target: " + ex.target.describe() + "; score: " + f6(ex.output_score) + "</p>\n";
  page += "<div>\n";
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double r = ex.token_relevances[i];
    const double opacity = max_abs > 0.0 ? std::abs(r) / max_abs : 0.0;
    const char* color = r >= 0.0 ? "200,40,40" : "40,70,200";
    page += "<span class=\"tok\" style=\"background-color: rgba(" + std::string(color) + "," +
            fmt("%.4f", opacity) + ");\" title=\"" + f6(r) + "\">" + html_escape(labels[i]) +
            "</span>\n";
  }
  page += "</div>\n";
  page +=
      "<p class=\"legend\">red: positive relevance, blue: negative; "
      "opacity scales with |relevance| / max |relevance|</p>\n</body>\n</html>\n";
  return page;
}

json conservation_to_json(const ConservationReport& report) {
  json j;
  j["method"] = to_string(report.method);
  j["n_examples"] = report.pairs.size();
  j["mean_relative_deviation"] = report.mean_relative_deviation;
  j["pearson"] = report.pearson;
  json pairs = json::array();
  for (const auto& p : report.pairs) pairs.push_back({{"f", p.f}, {"relevance_sum", p.relevance_sum}});
  j["pairs"] = pairs;
  return j;
}

std::string conservation_csv(const ConservationReport& report) {
  std::string out = "f,relevance_sum\n";
  for (const auto& p : report.pairs) out += f17(p.f) + "," + f17(p.relevance_sum) + "\n";
  return out;
}

std::string scatter_svg(const ConservationReport& report, const std::string& title) {
  const double margin = 50.0, plot = 380.0;
  double lo = 0.0, hi = 0.0;
  bool first = true;
  for (const auto& p : report.pairs) {
    for (double v : {p.f, p.relevance_sum}) {
      lo = first ? v : std::min(lo, v);
      hi = first ? v : std::max(hi, v);
      first = false;
    }
  }
  if (first) lo = hi = 0.0;
  const double pad = std::max(1e-9, (hi - lo) * 0.05 + 1e-12);
  lo -= pad;
  hi += pad;
  auto px = [&](double v) { return margin + (v - lo) / (hi - lo) * plot; };
  auto py = [&](double v) { return margin + plot - (v - lo) / (hi - lo) * plot; };

  std::string svg =
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"480\" height=\"480\" "
      "viewBox=\"0 0 480 480\">\n<rect x=\"50\" y=\"50\" width=\"380\" height=\"380\" "
      "fill=\"white\" stroke=\"#333\"/>\n";
  svg += "<text x=\"240\" y=\"30\" text-anchor=\"middle\" font-size=\"14\">" +
         html_escape(title) + "</text>\n";
  svg += "<line x1=\"" + f6(px(lo + pad)) + "\" y1=\"" + f6(py(lo + pad)) + "\" x2=\"" +
         f6(px(hi - pad)) + "\" y2=\"" + f6(py(hi - pad)) +
         "\" stroke=\"#999\" stroke-dasharray=\"4 3\"/>\n";
  for (const auto& p : report.pairs) {
    svg += "<circle cx=\"" + f6(px(p.f)) + "\" cy=\"" + f6(py(p.relevance_sum)) +
           "\" r=\"3.5\" fill=\"#c22\" fill-opacity=\"0.7\"/>\n";
  }
  svg += "<text x=\"240\" y=\"465\" text-anchor=\"middle\" font-size=\"12\">output score f</text>\n";
  svg += "<text x=\"15\" y=\"240\" text-anchor=\"middle\" font-size=\"12\" "
         "transform=\"rotate(-90 15 240)\">relevance sum</text>\n";
  svg += "<text x=\"50\" y=\"445\" font-size=\"10\">" + f6(lo + pad) + "</text>\n";
  svg += "<text x=\"430\" y=\"445\" text-anchor=\"end\" font-size=\"10\">" + f6(hi - pad) +
         "</text>\n</svg>\n";
  return svg;
}

json head_check_to_json(const HeadConservationCheck& chk, int layer, int head) {
  return json{{"layer", layer},
              {"head", head},
              {"lhs", chk.lhs},
              {"rhs_base", chk.rhs_base},
              {"correction", chk.correction},
              {"correction_cov", chk.correction_cov},
              {"residual", chk.residual}};
}

json ln_checks_to_json(const std::vector<LnGroupCheck>& checks, int ln_index) {
  json groups = json::array();
  for (const auto& c : checks) {
    groups.push_back({{"group", c.group},
                      {"measured", c.measured},
                      {"predicted", c.predicted},
                      {"degenerate", c.degenerate}});
  }
  return json{{"ln_index", ln_index}, {"groups", groups}};
}

json benchmark_to_json(const BenchmarkTable& table) {
  json rows = json::array();
  for (const auto& r : table.rows) {
    json row;
    row["method"] = to_string(r.method);
    row["ok"] = r.ok;
    if (r.ok) {
      row["auac"] = r.mean_auac;
      row["aumse"] = r.mean_aumse;
      row["mean_time_s"] = r.mean_time_s;
    } else {
      row["note"] = r.note;
    }
    rows.push_back(row);
  }
  return json{{"dataset_id", table.dataset_id},
              {"seed", table.seed},
              {"n_examples", table.n_examples},
              {"rows", rows}};
}

std::string benchmark_csv(const BenchmarkTable& table) {
  std::string out = "method,auac,aumse,mean_time_s\n";
  for (const auto& r : table.rows) {
    if (r.ok) {
      out += to_string(r.method) + "," + f17(r.mean_auac) + "," + f17(r.mean_aumse) + "," +
             f17(r.mean_time_s) + "\n";
    } else {
      out += to_string(r.method) + ",,,\n";  // missing cell
    }
  }
  return out;
}

json curve_to_json(const PerturbationCurve& curve) {
  json points = json::array();
  for (const auto& p : curve.points) points.push_back({p.fraction, p.value});
  return json{{"task", curve.task == PerturbationTask::kActivation ? "activation" : "pruning"},
              {"method", to_string(curve.method)},
              {"example_id", curve.example_id},
              {"area", curve.area},
              {"points", points}};
}

std::string curves_svg(const std::vector<PerturbationCurve>& curves, const std::string& title) {
  static const char* kColors[] = {"#c22", "#24c", "#2a2", "#a2a", "#d80",
                                  "#088", "#555", "#841", "#148"};
  const double margin = 50.0, plot = 380.0;
  double y_hi = 1e-12;
  for (const auto& c : curves)
    for (const auto& p : c.points) y_hi = std::max(y_hi, p.value);
  auto px = [&](double v) { return margin + v * plot; };
  auto py = [&](double v) { return margin + plot - v / y_hi * plot; };

  std::string svg =
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"480\" height=\"480\" "
      "viewBox=\"0 0 480 480\">\n<rect x=\"50\" y=\"50\" width=\"380\" height=\"380\" "
      "fill=\"white\" stroke=\"#333\"/>\n";
  svg += "<text x=\"240\" y=\"30\" text-anchor=\"middle\" font-size=\"14\">" +
         html_escape(title) + "</text>\n";
  for (std::size_t ci = 0; ci < curves.size(); ++ci) {
    const char* color = kColors[ci % (sizeof kColors / sizeof *kColors)];
    std::string pts;
    for (const auto& p : curves[ci].points)
      pts += f6(px(p.fraction)) + "," + f6(py(p.value)) + " ";
    svg += "<polyline fill=\"none\" stroke=\"" + std::string(color) +
           "\" stroke-width=\"1.5\" points=\"" + pts + "\"/>\n";
    svg += "<text x=\"436\" y=\"" + f6(60.0 + 14.0 * (double)ci) + "\" font-size=\"10\" fill=\"" +
           color + "\">" + to_string(curves[ci].method) + "</text>\n";
  }
  svg += "<text x=\"240\" y=\"465\" text-anchor=\"middle\" font-size=\"12\">fraction perturbed</text>\n";
  svg += "<text x=\"50\" y=\"445\" font-size=\"10\">0</text>\n";
  svg += "<text x=\"430\" y=\"445\" text-anchor=\"end\" font-size=\"10\">1</text>\n";
  svg += "<text x=\"46\" y=\"54\" text-anchor=\"end\" font-size=\"10\">" + f6(y_hi) + "</text>\n";
  svg += "<text x=\"46\" y=\"434\" text-anchor=\"end\" font-size=\"10\">0</text>\n</svg>\n";
  return svg;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << content;
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

}  // namespace lrpx
