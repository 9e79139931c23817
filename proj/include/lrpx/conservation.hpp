#pragma once

#include <vector>

#include "lrpx/relevance.hpp"

namespace lrpx {

struct ConservationPair {
  double f = 0.0;              // explained output score
  double relevance_sum = 0.0;  // sum of token relevances
};

struct ConservationReport {
  Method method = Method::kGi;
  std::vector<ConservationPair> pairs;        // one per example
  double mean_relative_deviation = 0.0;       // |sum R - f| / max(|f|, 1e-12), averaged
  double pearson = 0.0;                       // correlation of the (f, sum R) scatter
};

// One (f, sum R) point per example with the predicted-class logit as target.
ConservationReport check_global(const TransformerModel& model,
                                const std::vector<std::vector<int>>& examples, Method method,
                                const ExplainOptions& opts = {});

// Per-head conservation identity under plain gradients:
//   sum R(x) + sum R(x') = sum R(y) + correction
// where the correction is sum_j (E_j[(q - E_j q) x^T] + E_j[q (x - E_j x)^T]) df/dy_j.
// correction_cov is the same quantity written as 2 sum_j Cov_j(q, x)^T df/dy_j;
// the two agree identically since both expectations reduce to the covariance.
struct HeadConservationCheck {
  double lhs = 0.0;             // sum R(x) + sum R(x')
  double rhs_base = 0.0;        // sum R(y)
  double correction = 0.0;      // general two-term form
  double correction_cov = 0.0;  // 2 sum_j Cov_j form
  double residual = 0.0;        // |lhs - rhs_base - correction| / scale of terms
};

HeadConservationCheck check_attention_head(const TransformerModel& model,
                                           const std::vector<int>& tokens, int layer, int head);

// Per normalization group (token row) at one LayerNorm core:
// measured = sum R(x) / sum R(y), predicted = 1 - Var[x] / (eps + Var[x]).
struct LnGroupCheck {
  int group = 0;
  double measured = 0.0;
  double predicted = 0.0;
  bool degenerate = false;  // |sum R(y)| < 1e-12: no meaningful ratio
};

std::vector<LnGroupCheck> check_layernorm(const TransformerModel& model,
                                          const std::vector<int>& tokens, int ln_index);

struct CollapsePoint {
  double eps = 0.0;
  double ratio = 0.0;  // 1 - Var[x] / (eps + Var[x])
};

std::vector<CollapsePoint> relevance_collapse_profile(const std::vector<double>& x,
                                                      const std::vector<double>& eps_ladder);

}  // namespace lrpx
