#pragma once

#include <optional>
#include <string>
#include <unordered_map>

#include "drex/ingest.hpp"
#include "drex/params.hpp"
#include "drex/tape.hpp"
#include "drex/text.hpp"

namespace drex {

struct HyperParams {
  int d = 64;             // latent dimension
  int b = 768;            // token-embedding dimension
  int rating_scale = 5;   // S
  double lambda = 1e-3;   // L2 weight
  int modality_count = 2; // review + rating
};

// drex: random state init. drex_mlp: encoder MLPs produce the initial states.
enum class Variant { kDrex, kDrexMlp };

struct EntityState {
  Mat users;  // M x d
  Mat items;  // N x d
};

// Tensor layout (names are stable; they key checkpoints and optimizer state):
//   text.P (b x d), text.b (d), att.v (d)
//   rate.P (S x d), rate.b (d)
//   fuse.P (2d x d), fuse.b (d)
//   gru_u.* / gru_i.*: W_r, U_r, b_r, W_z, U_z, b_z, W_h, U_h, b_h
//   mlp.W1 (2d x d), mlp.b1 (d), mlp.W2 (d x 1), mlp.b2 (1)
//   enc_u.W1 (N x 2d), enc_u.b1, enc_u.W2 (2d x d), enc_u.b2; enc_i.* (M x ...)
//   embed.table (table_size x b) when the provider is hashed_trainable
NamedTensors init_params(const HyperParams& hyper, Variant variant, int user_count,
                         int item_count, const EmbeddingProvider* provider,
                         std::uint64_t seed);

// --- plain forward (no gradients) ---

struct ReviewFeatures {
  Vec pooled;     // d
  Vec attention;  // w, sums to 1
};

ReviewFeatures review_features(const NamedTensors& params, const Mat& token_embeds);
Vec rating_features(const NamedTensors& params, int rating, int rating_scale);
// nullptr marks an absent modality; its block of z is zero.
Vec fuse(const NamedTensors& params, const Vec* review_feat, const Vec* rating_feat);
Vec gru_update(const NamedTensors& params, const std::string& prefix, const Vec& state,
               const Vec& x);
double predict(const NamedTensors& params, const Vec& user_state, const Vec& item_state);
double clamp_rating(double raw, int rating_scale);
Vec encoder_forward(const NamedTensors& params, const std::string& prefix, const Vec& input);

Vec user_preference_vector(const std::vector<Interaction>& train, int user, int item_count,
                           int rating_scale);
Vec item_preference_vector(const std::vector<Interaction>& train, int item, int user_count,
                           int rating_scale);

EntityState init_states_random(int user_count, int item_count, int d, std::uint64_t seed);
EntityState init_states_encoders(const NamedTensors& params,
                                 const std::vector<Interaction>& train, int user_count,
                                 int item_count, int rating_scale);

// --- tape builders (mirror the plain forward exactly) ---

// Caches one leaf per parameter tensor per tape.
struct BuildCtx {
  BuildCtx(Tape& t, const NamedTensors& p, bool trainable_leaves = true)
      : tape(t), params(p), trainable(trainable_leaves) {}

  Tape& tape;
  const NamedTensors& params;
  bool trainable;

  Var param(const std::string& name);

 private:
  std::unordered_map<std::string, Var> cache_;
};

struct ReviewGraph {
  Var pooled;
  Var attention;
};

ReviewGraph review_features_graph(BuildCtx& ctx, Var token_embeds);
Var rating_features_graph(BuildCtx& ctx, int rating, int rating_scale);
Var fuse_graph(BuildCtx& ctx, std::optional<Var> review_feat, std::optional<Var> rating_feat);
Var gru_update_graph(BuildCtx& ctx, const std::string& prefix, Var state, Var x);
Var predict_graph(BuildCtx& ctx, Var user_state, Var item_state);
Var encoder_graph(BuildCtx& ctx, const std::string& prefix, Var input);

// --- checkpoint artifact ---

struct Checkpoint {
  HyperParams hyper;
  Variant variant = Variant::kDrex;
  EmbedKind embed_kind = EmbedKind::kHashedTrainable;
  int embed_table_size = kDefaultHashBuckets;
  NamedTensors params;
  EntityState states;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace drex
