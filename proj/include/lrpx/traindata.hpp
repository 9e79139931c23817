#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "lrpx/model.hpp"

namespace lrpx {

struct Vocab {
  std::vector<std::string> id_to_token;  // id 0 is always the UNK token
  std::unordered_map<std::string, int> token_to_id;
  int unk_id = 0;

  int size() const { return (int)id_to_token.size(); }
  int id_of(const std::string& token) const {
    auto it = token_to_id.find(token);
    return it == token_to_id.end() ? unk_id : it->second;
  }
  void add(const std::string& token) {
    token_to_id.emplace(token, (int)id_to_token.size());
    id_to_token.push_back(token);
  }
};

struct DatasetExample {
  std::vector<int> tokens;
  int label = 0;
  std::vector<int> keyword_positions;  // planted evidence for the label, if known
};

struct Dataset {
  std::vector<DatasetExample> examples;
  Vocab vocab;
  std::string generator;
  std::uint64_t seed = 0;
  int n_classes = 2;
  int train_count = 0;  // examples[0..train_count) train, the rest held out

  std::vector<const DatasetExample*> train_split() const;
  std::vector<const DatasetExample*> heldout_split() const;
};

// Binary sentiment with planted keywords: disjoint positive/negative keyword id
// ranges, majority polarity decides the label, at least one keyword per example.
Dataset gen_keyword_sentiment(std::uint64_t seed, int n_examples, int seq_len, int vocab_size);

struct TrainConfig {
  double lr = 2e-4;
  int batch_size = 32;
  int max_epochs = 30;
  int patience = 5;          // early stop after this many epochs without val improvement
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t seed = 0;

  void validate() const;
};

struct EpochMetrics {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
};

struct TrainResult {
  std::vector<EpochMetrics> trace;
  int best_epoch = -1;  // epoch whose parameters the model ends up with
};

// Cross-entropy with AdamW; deterministic per seed; restores the best epoch's
// parameters on exit. Throws on non-finite loss.
TrainResult train(TransformerModel& model, const Dataset& data, const TrainConfig& cfg);

double accuracy(const TransformerModel& model,
                const std::vector<const DatasetExample*>& examples);

// JSONL, one {"tokens": [...], "label": n} object per line (optionally
// "keywords": [positions]); vocab and metadata go to <path>.meta.json.
void save_dataset(const Dataset& data, const std::string& path);
Dataset load_dataset(const std::string& path);

}  // namespace lrpx
