#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "lsat/adapters.hpp"
#include "lsat/rng.hpp"
#include "lsat/types.hpp"

namespace lsat {

// Adapter target layers of the scorer. Embeddings and biases are frozen
// with the base and are never adapter targets.
inline constexpr const char* kLayerW1 = "W1";
inline constexpr const char* kLayerW2 = "W2";

// Probabilities are clamped to [kProbEps, 1-kProbEps] so outputs stay
// strictly inside (0,1) and the BCE loss stays finite.
inline constexpr double kProbEps = 1e-12;

struct ModelConfig {
  Index embedding_dim = 64;
  Index hidden_dim = 64;
  int history_len = 10;
};

// One user-item event as seen by the scorer: target item plus the
// user's most recent liked/disliked items, all strictly earlier than
// the target. Item ids are dataset vocabulary rows (0 = unknown).
struct Sample {
  std::vector<std::int32_t> history_pos;
  std::vector<std::int32_t> history_neg;
  std::int32_t target_item = 0;
  int label = 0;
};

// The frozen backbone: item embedding table plus a two-layer scorer.
// Input u = [mean(E[pos]) - mean(E[neg]) || E[target]] (empty pools
// contribute zero vectors), z = relu(u*W1 + b1), score = sigmoid(z*W2 + b2).
// Item vocabulary is fixed at pretraining time; ids unseen then map to
// embedding row 0, which is zero-initialized and never trained.
struct BaseParams {
  ModelConfig config;
  std::vector<std::int32_t> item_to_row;  // dataset item row -> embedding row
  Matrix item_embeddings;                 // (known_items+1) x d
  Matrix w1;                              // 2d x h
  Matrix b1;                              // h x 1
  Matrix w2;                              // h x 1
  Matrix b2;                              // 1 x 1

  std::int32_t embedding_row(std::int32_t item) const {
    if (item < 0 || static_cast<std::size_t>(item) >= item_to_row.size()) return 0;
    return item_to_row[static_cast<std::size_t>(item)];
  }

  // FNV-1a over the serialized image; recorded at freeze time and
  // asserted unchanged after every adapter-training run.
  std::uint64_t content_hash() const;
};

std::vector<std::uint8_t> base_params_bytes(const BaseParams& base);
void save_base_params(const BaseParams& base, const std::filesystem::path& path);
BaseParams load_base_params(const std::filesystem::path& path);

// Scores with adapters applied on the fly (adapters may be null or
// empty; fresh adapters are an exact no-op). Output in (0,1).
double forward(const Sample& x, const BaseParams& base, const AdapterSet* adapters = nullptr);
Vector forward_batch(std::span<const Sample> batch, const BaseParams& base,
                     const AdapterSet* adapters = nullptr);

// Mean binary cross-entropy over the batch.
double bce_loss(std::span<const Sample> batch, const BaseParams& base,
                const AdapterSet* adapters = nullptr);

struct LayerGrads {
  Matrix a;
  Matrix b;
};
using AdapterGradients = std::map<std::string, LayerGrads>;

struct BatchGradResult {
  double loss = 0.0;
  AdapterGradients grads;
};

// Analytic gradients of bce_loss with respect to every A and B in
// `adapters`. Base parameters never receive gradients.
BatchGradResult backward_adapters(std::span<const Sample> batch, const BaseParams& base,
                                  const AdapterSet& adapters);

struct TrainOptions {
  int epochs = 10;
  int batch_size = 256;
  double learning_rate = 1e-3;
  double weight_decay = 1e-5;
};

struct AdapterTrainResult {
  AdapterSet adapters;
  std::vector<double> epoch_loss;
};

// Mini-batch Adam over shuffled data; the shuffle order is the only
// consumer of `rng`. epochs = 0 returns `initial` unchanged.
AdapterTrainResult train_adapter(std::span<const Sample> data, const BaseParams& base,
                                 const AdapterSet& initial, const TrainOptions& options,
                                 SeededRng& rng);

struct PretrainOptions {
  int epochs = 20;
  int batch_size = 256;
  double learning_rate = 1e-3;
  double weight_decay = 1e-5;
};

struct PretrainResult {
  BaseParams base;
  std::vector<double> epoch_loss;
};

// Trains every base field (embeddings included) and returns the result
// to be treated as frozen from here on. `item_count` is the dataset
// item-vocabulary size; items absent from `data` map to row 0.
PretrainResult pretrain_base(std::span<const Sample> data, Index item_count,
                             const ModelConfig& config, const PretrainOptions& options,
                             SeededRng& rng);

}  // namespace lsat
