#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "drex/adam.hpp"
#include "drex/eval.hpp"
#include "drex/explain.hpp"
#include "drex/ingest.hpp"
#include "drex/model.hpp"

namespace drex {

// state: stored rows are recurrent state, read as constants by the gradient
// pass and overwritten by the commit pass. leaf: rows additionally receive
// Adam updates from their accumulated gradients before the overwrite.
enum class StateMode { kState, kLeaf };

// Scope of attention accumulation for keyword profiles.
enum class ProfileWindow { kFinalEpoch, kFinalBatch };

struct TrainConfig {
  double lr = 1e-3;
  double lambda = 1e-3;
  int batch_size = 1024;
  int max_epochs = 100;
  int patience = 10;
  int d = 64;
  Variant variant = Variant::kDrex;
  StateMode state_mode = StateMode::kState;
  std::uint64_t seed = 0;
  bool shuffle = false;
  int threads = 1;
  ProfileWindow profile_window = ProfileWindow::kFinalEpoch;

  void validate() const;  // ConfigError on out-of-range fields
};

struct EpochStats {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_f1_at_5 = 0.0;
  double val_ndcg_at_5 = 0.0;
  double criterion = 0.0;  // (F1@5 + NDCG@5) / 2
  double mean_state_norm = 0.0;
  double wall_ms = 0.0;  // informational; excluded from the CSV
};

using History = std::vector<EpochStats>;

// True once the best criterion is `patience` or more epochs old. Only a
// strictly greater value counts as improvement, so a flat stretch ages the
// incumbent.
bool early_stop(const History& history, int patience);

// Deterministic bytes for a deterministic run; wall time stays out.
std::string history_csv(const History& history);

// Stable sort by timestamp; ties keep ingest order.
std::vector<Interaction> order_chronologically(std::vector<Interaction> interactions);

// Batch positions whose state input routes through an encoder graph instead
// of the stored row (the entity's first interaction of the epoch), keyed by
// position with the encoder's input vector as value.
struct EncoderRouting {
  std::unordered_map<int, Vec> user_at;
  std::unordered_map<int, Vec> item_at;
};

// Mean loss over the batch; fills `grads` (congruent with params) with the
// mean gradient. Every interaction reads pre-batch state, so the pass is
// order-independent and safe to parallelize. In leaf mode `state_grads`
// receives d(loss)/d(stored rows). `profiles`, when given, collects the
// batch's attention mass. Exposed for the composed-loss gradient check.
double batch_gradients(const NamedTensors& params, const EntityState& states,
                       const std::vector<Interaction>& batch, const TrainConfig& config,
                       const EmbeddingProvider& embedder, const Vocab& vocab,
                       NamedTensors& grads, EntityState* state_grads = nullptr,
                       ProfileStore* profiles = nullptr,
                       const EncoderRouting* routing = nullptr);

// Sequential re-evaluation of the GRU updates in batch order with the
// current parameters. Chains rows: an entity's second in-batch interaction
// reads the row just written by its first.
void commit_batch_states(const NamedTensors& params, EntityState& states,
                         const std::vector<Interaction>& batch,
                         const EmbeddingProvider& embedder, const Vocab& vocab);

// Validation metrics (F1@5, NDCG@5) per epoch; injectable so tests can
// script the early-stopping signal.
using ValidationFn =
    std::function<std::pair<double, double>(const NamedTensors&, const EntityState&, int epoch)>;

struct TrainResult {
  NamedTensors params;  // best-epoch snapshot
  EntityState states;
  History history;
  int best_epoch = 0;
  bool stopped_early = false;
  ProfileStore profiles{0, 0};  // attention mass over the profile window
};

TrainResult train(const SplitBundle& bundle, const EmbeddingProvider& embedder,
                  const TrainConfig& config, const ValidationFn& validation = {});

// --- hyperparameter sweep ---

struct SweepGrids {
  std::vector<double> lr{1e-4, 1e-3, 1e-2, 1e-1};
  std::vector<double> lambda{1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0};
  std::vector<int> d{8, 16, 32, 64, 128, 256};
};

struct SweepEntry {
  double lr = 0.0;
  double lambda = 0.0;
  int d = 0;
  std::vector<double> run_scores;
  double score = 0.0;  // mean of the runs
};

struct SweepResult {
  std::vector<SweepEntry> table;
  SweepEntry winner;
};

// Per run, s = [MAE + sum_{k=1..5}(1 - F1@k) + sum_{k=1..5}(1 - NDCG@k)] / 11
// on the validation split; run seeds are seed, seed+1, ... The winner has
// minimal mean s, ties broken by smaller lambda, then smaller lr, then
// smaller d.
SweepResult sweep(const SplitBundle& bundle, const EmbeddingProvider& embedder,
                  const TrainConfig& base, const SweepGrids& grids, int runs = 3);

std::string sweep_csv(const SweepResult& result);

}  // namespace drex
