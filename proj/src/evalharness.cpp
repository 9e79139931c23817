#include "lrpx/evalharness.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <numeric>
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

double class_probability(const std::vector<double>& logits, int c) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double v : logits) z += std::exp(v - mx);
  return std::exp(logits[c] - mx) / z;
}

void require_curve_inputs(const std::vector<int>& tokens, const Explanation& explanation,
                          const EvalOptions& opts) {
  if (tokens.empty()) throw std::invalid_argument("perturbation curve: empty token sequence");
  if (explanation.token_relevances.size() != tokens.size())
    throw std::invalid_argument("perturbation curve: relevance count does not match tokens");
  if (opts.unk_id < 0) throw std::invalid_argument("perturbation curve: negative unk id");
}

double trapezoid_area(const std::vector<CurvePoint>& pts) {
  double area = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i)
    area += (pts[i].fraction - pts[i - 1].fraction) * (pts[i].value + pts[i - 1].value) / 2.0;
  const double span = pts.back().fraction - pts.front().fraction;
  return span > 0.0 ? area / span : 0.0;
}

std::vector<int> order_by_relevance_desc(const std::vector<double>& rel) {
  std::vector<int> idx(rel.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&rel](int a, int b) {
    if (rel[a] != rel[b]) return rel[a] > rel[b];
    return a < b;
  });
  return idx;
}

std::vector<int> order_by_abs_relevance_asc(const std::vector<double>& rel) {
  std::vector<int> idx(rel.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&rel](int a, int b) {
    const double fa = std::abs(rel[a]), fb = std::abs(rel[b]);
    if (fa != fb) return fa < fb;
    return a < b;
  });
  return idx;
}

}  // namespace

PerturbationCurve activation_curve(const Scorer& scorer, const std::vector<int>& tokens,
                                   const Explanation& explanation, const EvalOptions& opts) {
  require_curve_inputs(tokens, explanation, opts);
  const int n = (int)tokens.size();
  const int c = argmax_class(scorer.logits(tokens));
  const auto order = order_by_relevance_desc(explanation.token_relevances);

  PerturbationCurve curve;
  curve.task = PerturbationTask::kActivation;
  curve.method = explanation.method;
  curve.points.reserve(n + 1);

  std::vector<int> cur(tokens.size(), opts.unk_id);
  curve.points.push_back(CurvePoint{0.0, class_probability(scorer.logits(cur), c)});
  for (int k = 1; k <= n; ++k) {
    cur[order[k - 1]] = tokens[order[k - 1]];
    curve.points.push_back(
        CurvePoint{(double)k / n, class_probability(scorer.logits(cur), c)});
  }
  curve.area = trapezoid_area(curve.points);
  return curve;
}

PerturbationCurve pruning_curve(const Scorer& scorer, const std::vector<int>& tokens,
                                const Explanation& explanation, const EvalOptions& opts) {
  require_curve_inputs(tokens, explanation, opts);
  const int n = (int)tokens.size();
  const auto base = scorer.logits(tokens);
  const int c = argmax_class(base);
  const auto order = order_by_abs_relevance_asc(explanation.token_relevances);

  auto metric = [&](const std::vector<double>& logits) {
    if (!opts.vector_mse) {
      const double d = base[c] - logits[c];
      return d * d;
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < base.size(); ++i) {
      const double d = base[i] - logits[i];
      acc += d * d;
    }
    return acc / (double)base.size();
  };

  PerturbationCurve curve;
  curve.task = PerturbationTask::kPruning;
  curve.method = explanation.method;
  curve.points.reserve(n + 1);
  curve.points.push_back(CurvePoint{0.0, 0.0});  // intact input, zero error by definition

  std::vector<int> cur = tokens;
  for (int k = 1; k <= n; ++k) {
    cur[order[k - 1]] = opts.unk_id;
    curve.points.push_back(CurvePoint{(double)k / n, metric(scorer.logits(cur))});
  }
  curve.area = trapezoid_area(curve.points);
  return curve;
}

namespace {

void require_model_unk(const TransformerModel& model, const EvalOptions& opts) {
  if (opts.unk_id < 0 || opts.unk_id >= model.config.vocab_size)
    throw std::invalid_argument("unk id outside the model vocabulary");
}

}  // namespace

PerturbationCurve activation_curve(const TransformerModel& model, const std::vector<int>& tokens,
                                   const Explanation& explanation, const EvalOptions& opts) {
  require_model_unk(model, opts);
  return activation_curve(ModelScorer(model), tokens, explanation, opts);
}

PerturbationCurve pruning_curve(const TransformerModel& model, const std::vector<int>& tokens,
                                const Explanation& explanation, const EvalOptions& opts) {
  require_model_unk(model, opts);
  return pruning_curve(ModelScorer(model), tokens, explanation, opts);
}

BenchmarkTable run_benchmark(const TransformerModel& model,
                             const std::vector<std::vector<int>>& examples,
                             const std::vector<Method>& methods, std::uint64_t seed,
                             const BenchmarkOptions& opts) {
  if (examples.empty()) throw std::invalid_argument("run_benchmark: empty example set");
  if (methods.empty()) throw std::invalid_argument("run_benchmark: no methods requested");
  require_model_unk(model, opts.eval);

  const int m_count = (int)methods.size();
  const int e_count = (int)examples.size();

  struct Cell {
    bool ok = false;
    double auac = 0.0, aumse = 0.0, time_s = 0.0;
    std::string err;
  };
  std::vector<Cell> cells((std::size_t)m_count * e_count);

#pragma omp parallel for schedule(dynamic)
  for (int idx = 0; idx < m_count * e_count; ++idx) {
    const int mi = idx / e_count;
    const int ei = idx % e_count;
    Cell& cell = cells[idx];
    try {
      const auto& tokens = examples[ei];
      const int c = argmax_class(logits_of(model, tokens));
      ExplainOptions eo;
      eo.random_seed = Rng::derive(seed, (std::uint64_t)ei);
      eo.flow_length_cap = opts.flow_length_cap;
      const auto ex = explain(model, tokens, methods[mi], ExplanationTarget::logit(c), eo);
      cell.auac = activation_curve(model, tokens, ex, opts.eval).area;
      cell.aumse = pruning_curve(model, tokens, ex, opts.eval).area;
      cell.time_s = ex.wall_time_seconds;
      cell.ok = true;
    } catch (const std::exception& e) {
      cell.err = e.what();
    }
  }

  BenchmarkTable table;
  table.dataset_id = opts.dataset_id;
  table.seed = seed;
  table.n_examples = e_count;
  table.rows.resize(m_count);
  for (int mi = 0; mi < m_count; ++mi) {
    BenchmarkRow& row = table.rows[mi];
    row.method = methods[mi];
    row.ok = true;
    for (int ei = 0; ei < e_count && row.ok; ++ei) {
      const Cell& cell = cells[(std::size_t)mi * e_count + ei];
      if (!cell.ok) {
        row.ok = false;
        row.note = cell.err;
        row.mean_auac = row.mean_aumse = row.mean_time_s = 0.0;
      }
    }
    if (!row.ok) continue;
    for (int ei = 0; ei < e_count; ++ei) {
      const Cell& cell = cells[(std::size_t)mi * e_count + ei];
      row.mean_auac += cell.auac;
      row.mean_aumse += cell.aumse;
      row.mean_time_s += cell.time_s;
    }
    row.mean_auac /= e_count;
    row.mean_aumse /= e_count;
    row.mean_time_s /= e_count;
  }
  return table;
}

}  // namespace lrpx
