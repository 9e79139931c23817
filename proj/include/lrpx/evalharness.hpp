#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lrpx/relevance.hpp"

namespace lrpx {

// Minimal scoring surface the perturbation tasks need. Lets tests drive the
// curves with hand-built score tables; the transformer plugs in via ModelScorer.
struct Scorer {
  virtual ~Scorer() = default;
  virtual int n_classes() const = 0;
  virtual std::vector<double> logits(const std::vector<int>& tokens) const = 0;
};

struct ModelScorer final : Scorer {
  const TransformerModel* model;
  explicit ModelScorer(const TransformerModel& m) : model(&m) {}
  int n_classes() const override { return model->config.n_classes; }
  std::vector<double> logits(const std::vector<int>& tokens) const override {
    return logits_of(*model, tokens);
  }
};

enum class PerturbationTask { kActivation, kPruning };

struct CurvePoint {
  double fraction = 0.0;  // share of tokens perturbed so far
  double value = 0.0;     // p_c for activation, squared logit error for pruning
};

struct PerturbationCurve {
  PerturbationTask task = PerturbationTask::kActivation;
  Method method = Method::kGi;
  int example_id = -1;
  std::vector<CurvePoint> points;  // N+1 points, fractions strictly increasing 0..1
  double area = 0.0;               // trapezoid over the unit fraction range
};

struct EvalOptions {
  int unk_id = 0;
  bool vector_mse = false;  // pruning metric over the whole logit vector instead
};

// All-UNK start; tokens come back highest relevance first (ties: lowest index).
// Tracks the probability of the class predicted on the intact input.
PerturbationCurve activation_curve(const Scorer& scorer, const std::vector<int>& tokens,
                                   const Explanation& explanation, const EvalOptions& opts = {});
PerturbationCurve activation_curve(const TransformerModel& model, const std::vector<int>& tokens,
                                   const Explanation& explanation, const EvalOptions& opts = {});

// Intact start; tokens leave smallest |relevance| first (ties: lowest index).
// Tracks (y_0 - y_k)^2 on the predicted-class logit.
PerturbationCurve pruning_curve(const Scorer& scorer, const std::vector<int>& tokens,
                                const Explanation& explanation, const EvalOptions& opts = {});
PerturbationCurve pruning_curve(const TransformerModel& model, const std::vector<int>& tokens,
                                const Explanation& explanation, const EvalOptions& opts = {});

struct BenchmarkRow {
  Method method = Method::kGi;
  bool ok = false;            // false: missing cell, see note
  double mean_auac = 0.0;
  double mean_aumse = 0.0;
  double mean_time_s = 0.0;   // mean explanation wall time
  std::string note;           // failure reason when !ok
};

struct BenchmarkTable {
  std::string dataset_id;
  std::uint64_t seed = 0;
  int n_examples = 0;
  std::vector<BenchmarkRow> rows;  // one per requested method, input order
};

struct BenchmarkOptions {
  EvalOptions eval;
  int flow_length_cap = 32;
  std::string dataset_id;
};

// Both curves for every (method, example); failures turn into missing cells
// while the rest of the table still fills in.
BenchmarkTable run_benchmark(const TransformerModel& model,
                             const std::vector<std::vector<int>>& examples,
                             const std::vector<Method>& methods, std::uint64_t seed,
                             const BenchmarkOptions& opts = {});

}  // namespace lrpx
