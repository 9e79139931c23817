#include "lrpx/conservation.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "lrpx/rng.hpp"

namespace lrpx {

namespace {

int argmax_class(const std::vector<double>& logits) {
  int best = 0;
  for (int c = 1; c < (int)logits.size(); ++c)
    if (logits[c] > logits[best]) best = c;
  return best;
}

double pearson(const std::vector<ConservationPair>& pairs) {
  const int n = (int)pairs.size();
  if (n < 2) return 0.0;
  double mf = 0.0, ms = 0.0;
  for (const auto& p : pairs) {
    mf += p.f;
    ms += p.relevance_sum;
  }
  mf /= n;
  ms /= n;
  double sff = 0.0, sss = 0.0, sfs = 0.0;
  for (const auto& p : pairs) {
    const double df = p.f - mf, ds = p.relevance_sum - ms;
    sff += df * df;
    sss += ds * ds;
    sfs += df * ds;
  }
  if (sff < 1e-300 || sss < 1e-300) return 0.0;
  return sfs / std::sqrt(sff * sss);
}

}  // namespace

ConservationReport check_global(const TransformerModel& model,
                                const std::vector<std::vector<int>>& examples, Method method,
                                const ExplainOptions& opts) {
  if (examples.empty()) throw std::invalid_argument("check_global: empty example set");
  ConservationReport report;
  report.method = method;
  report.pairs.resize(examples.size());

  const int n = (int)examples.size();
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < n; ++i) {
    const auto logits = logits_of(model, examples[i]);
    ExplainOptions local = opts;
    local.random_seed = Rng::derive(opts.random_seed, (uint64_t)i);
    const auto ex = explain(model, examples[i], method,
                            ExplanationTarget::logit(argmax_class(logits)), local);
    double sum = 0.0;
    for (double r : ex.token_relevances) sum += r;
    report.pairs[i] = ConservationPair{ex.output_score, sum};
  }

  double acc = 0.0;
  for (const auto& p : report.pairs)
    acc += std::abs(p.relevance_sum - p.f) / std::max(std::abs(p.f), 1e-12);
  report.mean_relative_deviation = acc / n;
  report.pearson = pearson(report.pairs);
  return report;
}

HeadConservationCheck check_attention_head(const TransformerModel& model,
                                           const std::vector<int>& tokens, int layer, int head) {
  if (layer < 0 || layer >= model.config.n_layers)
    throw std::invalid_argument("check_attention_head: layer out of range");
  if (head < 0 || head >= model.config.n_heads)
    throw std::invalid_argument("check_attention_head: head out of range");

  auto trace = forward(model, tokens, DetachMode::kNone);
  const int c = argmax_class(trace.logits.values());
  trace.graph->backward(trace.graph->select(trace.logits, c));

  const HeadTrace& ht = trace.heads[layer][head];
  const int n = ht.x_tap.rows();
  const int d = ht.x_tap.cols();

  const auto& xv = ht.x_tap.values();
  const auto& xg = ht.x_tap.grad();
  const auto& xqv = ht.xq_tap.values();
  const auto& xqg = ht.xq_tap.grad();
  const auto& yv = ht.mix.values();
  const auto& yg = ht.mix.grad();
  const auto& q = ht.q.values();  // [n x n], q[i*n+j] pairs row i with query j
  const auto& p = ht.p.values();  // column-stochastic over i

  HeadConservationCheck out;
  for (int i = 0; i < n * d; ++i) out.lhs += xv[i] * xg[i] + xqv[i] * xqg[i];
  for (int i = 0; i < n * d; ++i) out.rhs_base += yv[i] * yg[i];

  std::vector<double> ex(d);
  for (int j = 0; j < n; ++j) {
    std::fill(ex.begin(), ex.end(), 0.0);
    double eq = 0.0;
    for (int i = 0; i < n; ++i) {
      const double w = p[i * n + j];
      eq += w * q[i * n + j];
      for (int k = 0; k < d; ++k) ex[k] += w * xv[i * d + k];
    }
    double ex_dot_gy = 0.0;
    for (int k = 0; k < d; ++k) ex_dot_gy += ex[k] * yg[j * d + k];

    for (int i = 0; i < n; ++i) {
      const double w = p[i * n + j];
      const double qc = q[i * n + j] - eq;
      double x_dot_gy = 0.0;
      for (int k = 0; k < d; ++k) x_dot_gy += xv[i * d + k] * yg[j * d + k];
      out.correction += w * qc * x_dot_gy;                            // query-side term
      out.correction += w * q[i * n + j] * (x_dot_gy - ex_dot_gy);    // key-side term
      out.correction_cov += 2.0 * w * qc * (x_dot_gy - ex_dot_gy);    // covariance form
    }
  }

  const double scale = std::max(
      {std::abs(out.lhs), std::abs(out.rhs_base), std::abs(out.correction), 1e-12});
  out.residual = std::abs(out.lhs - out.rhs_base - out.correction) / scale;
  return out;
}

std::vector<LnGroupCheck> check_layernorm(const TransformerModel& model,
                                          const std::vector<int>& tokens, int ln_index) {
  auto trace = forward(model, tokens, DetachMode::kNone);
  if (ln_index < 0 || ln_index >= (int)trace.lns.size())
    throw std::invalid_argument("check_layernorm: ln_index out of range");
  trace.graph->backward(trace.graph->select(trace.logits, argmax_class(trace.logits.values())));

  const LnTrace& lt = trace.lns[ln_index];
  const int n = lt.input.rows();
  const int d = lt.input.cols();
  const auto& iv = lt.input.values();
  const auto& ig = lt.input.grad();
  const auto& cv = lt.core.values();
  const auto& cg = lt.core.grad();
  const double eps = model.config.eps_ln;

  std::vector<LnGroupCheck> checks(n);
  for (int r = 0; r < n; ++r) {
    double mean = 0.0;
    for (int k = 0; k < d; ++k) mean += iv[r * d + k];
    mean /= d;
    double var = 0.0;
    for (int k = 0; k < d; ++k) {
      const double dv = iv[r * d + k] - mean;
      var += dv * dv;
    }
    var /= d;

    double sx = 0.0, sy = 0.0;
    for (int k = 0; k < d; ++k) {
      sx += iv[r * d + k] * ig[r * d + k];
      sy += cv[r * d + k] * cg[r * d + k];
    }

    LnGroupCheck& chk = checks[r];
    chk.group = r;
    chk.predicted = 1.0 - var / (eps + var);
    chk.degenerate = std::abs(sy) < 1e-12;
    chk.measured = chk.degenerate ? 0.0 : sx / sy;
  }
  return checks;
}

std::vector<CollapsePoint> relevance_collapse_profile(const std::vector<double>& x,
                                                      const std::vector<double>& eps_ladder) {
  if (x.empty()) throw std::invalid_argument("relevance_collapse_profile: empty input");
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= (double)x.size();
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= (double)x.size();

  std::vector<CollapsePoint> profile;
  profile.reserve(eps_ladder.size());
  for (double eps : eps_ladder) {
    if (eps <= 0.0) throw std::invalid_argument("relevance_collapse_profile: eps must be > 0");
    profile.push_back(CollapsePoint{eps, 1.0 - var / (eps + var)});
  }
  return profile;
}

}  // namespace lrpx
