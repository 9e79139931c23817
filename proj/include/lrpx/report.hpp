#pragma once

#include <json.hpp>
#include <string>
#include <vector>

#include "lrpx/conservation.hpp"
#include "lrpx/evalharness.hpp"

namespace lrpx {

// JSON record: method, target, tokens, relevances, output_score,
// wall_time_seconds, and the seed for the seeded baseline.
nlohmann::json explanation_to_json(const Explanation& ex, const std::vector<int>& tokens,
                                   const std::vector<std::string>* labels = nullptr);

// Static heatmap page: one span per token, red for positive relevance, blue for
// negative, opacity |r|/max|r|. No scripts.
std::string explanation_html(const Explanation& ex, const std::vector<std::string>& labels);

nlohmann::json conservation_to_json(const ConservationReport& report);
std::string conservation_csv(const ConservationReport& report);
std::string scatter_svg(const ConservationReport& report, const std::string& title);

nlohmann::json head_check_to_json(const HeadConservationCheck& chk, int layer, int head);
nlohmann::json ln_checks_to_json(const std::vector<LnGroupCheck>& checks, int ln_index);

nlohmann::json benchmark_to_json(const BenchmarkTable& table);
std::string benchmark_csv(const BenchmarkTable& table);  // method,auac,aumse,mean_time_s

nlohmann::json curve_to_json(const PerturbationCurve& curve);
std::string curves_svg(const std::vector<PerturbationCurve>& curves, const std::string& title);

void write_text_file(const std::string& path, const std::string& content);

}  // namespace lrpx
