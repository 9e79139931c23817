#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lrpx/mat.hpp"
#include "lrpx/model.hpp"

namespace lrpx {

enum class Method { kGi, kLrpAh, kLrpLn, kLrpAhLn, kALast, kRollout, kAFlow, kGae, kRandom };

std::string to_string(Method m);
Method method_from_string(const std::string& s);
DetachMode detach_mode_of(Method m);  // valid for kGi and the three LRP variants

struct ExplanationTarget {
  enum class Kind { kLogit, kLogitDiff, kLogProb };
  Kind kind = Kind::kLogit;
  int c = 0;      // class for logit/log_prob; positive class of the diff
  int c_neg = 0;  // negative class of the diff

  static ExplanationTarget logit(int c);
  static ExplanationTarget logit_diff(int c_pos, int c_neg);
  static ExplanationTarget log_prob(int c);
  void validate(int n_classes) const;
  std::string describe() const;
};

struct Explanation {
  Method method = Method::kGi;
  ExplanationTarget target;
  std::vector<double> token_relevances;  // one per input token
  double output_score = 0.0;             // value of the explained f
  double wall_time_seconds = 0.0;
  bool has_seed = false;  // kRandom carries its seed
  std::uint64_t seed = 0;
};

// R(x_i) = sum_j z_ij / sum_i' z_i'j * R(y_j); columns with |sum| < 1e-9
// contribute nothing (the 0/0 = 0 convention).
std::vector<double> lrp_linear_redistribute(const Mat& z, const std::vector<double>& out_relevance);

// Pure aggregation helpers shared by the baselines; att matrices are
// row-stochastic (row j = dependence of position j on the previous layer),
// ordered bottom to top.
Mat rollout_product(const std::vector<Mat>& att, double residual_weight = 0.5);
std::vector<double> attention_flow_relevance(const std::vector<Mat>& att,
                                             const std::vector<double>& source_weights);

Explanation explain_gradient_x_input(const TransformerModel& model,
                                     const std::vector<int>& tokens,
                                     const ExplanationTarget& target, DetachMode mode);
Explanation explain_attention_last(const TransformerModel& model, const std::vector<int>& tokens,
                                   const ExplanationTarget& target);
Explanation explain_rollout(const TransformerModel& model, const std::vector<int>& tokens,
                            const ExplanationTarget& target);
Explanation explain_attention_flow(const TransformerModel& model, const std::vector<int>& tokens,
                                   const ExplanationTarget& target, int length_cap = 32);
Explanation explain_gae(const TransformerModel& model, const std::vector<int>& tokens,
                        const ExplanationTarget& target);
Explanation explain_random(const std::vector<int>& tokens, std::uint64_t seed);

struct ExplainOptions {
  std::uint64_t random_seed = 0;
  int flow_length_cap = 32;
};

Explanation explain(const TransformerModel& model, const std::vector<int>& tokens, Method method,
                    const ExplanationTarget& target, const ExplainOptions& opts = {});

}  // namespace lrpx
