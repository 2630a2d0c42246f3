#include "drex/model.hpp"

#include <cmath>

#include "drex/io.hpp"

namespace drex {

namespace {

void check_hyper(const HyperParams& h) {
  if (h.d < 1 || h.b < 1 || h.rating_scale < 1) {
    throw ContractError("HyperParams: d, b, and the rating scale must be >= 1");
  }
  if (h.lambda < 0.0) throw ContractError("HyperParams: lambda must be >= 0");
  if (h.modality_count != 2) throw ContractError("HyperParams: only two modalities are wired");
}

Mat glorot(Rng& rng, int rows, int cols) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = rng.uniform(-limit, limit);
  return m;
}

void add_glorot(NamedTensors& p, std::uint64_t seed, const std::string& name, int rows,
                int cols) {
  Rng rng = substream(seed, "init/" + name);
  p.add(name, glorot(rng, rows, cols));
}

void add_zeros(NamedTensors& p, const std::string& name, int rows) {
  p.add(name, Mat::Zero(rows, 1));
}

void add_gru(NamedTensors& p, std::uint64_t seed, const std::string& prefix, int d) {
  for (const char* gate : {"r", "z", "h"}) {
    add_glorot(p, seed, prefix + ".W_" + gate, d, d);
    add_glorot(p, seed, prefix + ".U_" + gate, d, d);
    add_zeros(p, prefix + ".b_" + gate, d);
  }
}

}  // namespace

NamedTensors init_params(const HyperParams& hyper, Variant variant, int user_count,
                         int item_count, const EmbeddingProvider* provider,
                         std::uint64_t seed) {
  check_hyper(hyper);
  const int d = hyper.d;
  const int b = provider != nullptr ? provider->dimension() : hyper.b;

  NamedTensors p;
  add_glorot(p, seed, "text.P", b, d);
  add_zeros(p, "text.b", d);
  add_glorot(p, seed, "att.v", d, 1);
  add_glorot(p, seed, "rate.P", hyper.rating_scale, d);
  add_zeros(p, "rate.b", d);
  add_glorot(p, seed, "fuse.P", 2 * d, d);
  add_zeros(p, "fuse.b", d);
  add_gru(p, seed, "gru_u", d);
  add_gru(p, seed, "gru_i", d);
  add_glorot(p, seed, "mlp.W1", 2 * d, d);
  add_zeros(p, "mlp.b1", d);
  add_glorot(p, seed, "mlp.W2", d, 1);
  add_zeros(p, "mlp.b2", 1);

  if (variant == Variant::kDrexMlp) {
    add_glorot(p, seed, "enc_u.W1", item_count, 2 * d);
    add_zeros(p, "enc_u.b1", 2 * d);
    add_glorot(p, seed, "enc_u.W2", 2 * d, d);
    add_zeros(p, "enc_u.b2", d);
    add_glorot(p, seed, "enc_i.W1", user_count, 2 * d);
    add_zeros(p, "enc_i.b1", 2 * d);
    add_glorot(p, seed, "enc_i.W2", 2 * d, d);
    add_zeros(p, "enc_i.b2", d);
  }

  if (provider != nullptr && provider->kind() == EmbedKind::kHashedTrainable) {
    Rng rng = substream(seed, "init/embed.table");
    const double limit = std::sqrt(3.0 / static_cast<double>(b));
    Mat table(provider->table_rows(), b);
    for (Eigen::Index i = 0; i < table.size(); ++i) table(i) = rng.uniform(-limit, limit);
    p.add("embed.table", std::move(table));
  }
  return p;
}

ReviewFeatures review_features(const NamedTensors& params, const Mat& token_embeds) {
  if (token_embeds.rows() < 1) {
    throw ContractError("review_features: empty review must use the missing-modality path");
  }
  const Mat& p = params.at("text.P");
  if (token_embeds.cols() != p.rows()) {
    throw DimensionError("review_features: embeddings are " + shape_str(token_embeds) +
                         " but the projection expects width " + std::to_string(p.rows()));
  }
  Mat projected = token_embeds * p;  // w x d
  projected.rowwise() += params.at("text.b").transpose().row(0);
  const Vec scores = projected * params.at("att.v");
  ReviewFeatures out;
  out.attention = softmax(scores);
  out.pooled = projected.transpose() * out.attention;
  return out;
}

Vec rating_features(const NamedTensors& params, int rating, int rating_scale) {
  if (rating < 1 || rating > rating_scale) {
    throw DomainError("rating_features: rating " + std::to_string(rating) +
                      " outside scale 1.." + std::to_string(rating_scale));
  }
  const Mat& p = params.at("rate.P");
  if (p.rows() != rating_scale) {
    throw DimensionError("rating_features: table has " + std::to_string(p.rows()) +
                         " rows for scale " + std::to_string(rating_scale));
  }
  return p.row(rating - 1).transpose() + params.at("rate.b").col(0);
}

Vec fuse(const NamedTensors& params, const Vec* review_feat, const Vec* rating_feat) {
  const Mat& p = params.at("fuse.P");
  const int d = static_cast<int>(p.cols());
  Vec z = Vec::Zero(2 * d);
  if (review_feat != nullptr) z.head(d) = *review_feat;
  if (rating_feat != nullptr) z.tail(d) = *rating_feat;
  return project(p, Vec(params.at("fuse.b").col(0)), z);
}

Vec gru_update(const NamedTensors& params, const std::string& prefix, const Vec& state,
               const Vec& x) {
  auto w = [&](const char* n) -> const Mat& { return params.at(prefix + "." + n); };
  const Vec r = elementwise(Activation::kSigmoid,
                            w("W_r") * state + w("U_r") * x + w("b_r"));
  const Vec z = elementwise(Activation::kSigmoid,
                            w("W_z") * state + w("U_z") * x + w("b_z"));
  const Vec cand = elementwise(Activation::kTanh,
                               w("W_h") * r.cwiseProduct(state) + w("U_h") * x + w("b_h"));
  return (1.0 - z.array()).matrix().cwiseProduct(state) + z.cwiseProduct(cand);
}

double predict(const NamedTensors& params, const Vec& user_state, const Vec& item_state) {
  Vec joint(user_state.size() + item_state.size());
  joint << user_state, item_state;
  const Vec h = elementwise(
      Activation::kRelu, project(params.at("mlp.W1"), Vec(params.at("mlp.b1").col(0)), joint));
  return (params.at("mlp.W2").transpose() * h)(0, 0) + params.at("mlp.b2")(0, 0);
}

double clamp_rating(double raw, int rating_scale) {
  if (std::isnan(raw)) throw NumericError("clamp_rating: prediction is NaN");
  return std::min(std::max(raw, 1.0), static_cast<double>(rating_scale));
}

Vec encoder_forward(const NamedTensors& params, const std::string& prefix, const Vec& input) {
  const Vec h = elementwise(
      Activation::kRelu,
      project(params.at(prefix + ".W1"), Vec(params.at(prefix + ".b1").col(0)), input));
  return project(params.at(prefix + ".W2"), Vec(params.at(prefix + ".b2").col(0)), h);
}

Vec user_preference_vector(const std::vector<Interaction>& train, int user, int item_count,
                           int rating_scale) {
  Vec v = Vec::Zero(item_count);
  for (const auto& x : train) {
    if (x.user_idx == user) {
      v(x.item_idx) = static_cast<double>(x.rating) / static_cast<double>(rating_scale);
    }
  }
  return v;
}

Vec item_preference_vector(const std::vector<Interaction>& train, int item, int user_count,
                           int rating_scale) {
  Vec v = Vec::Zero(user_count);
  for (const auto& x : train) {
    if (x.item_idx == item) {
      v(x.user_idx) = static_cast<double>(x.rating) / static_cast<double>(rating_scale);
    }
  }
  return v;
}

EntityState init_states_random(int user_count, int item_count, int d, std::uint64_t seed) {
  const double limit = 1.0 / std::sqrt(static_cast<double>(d));
  EntityState s;
  Rng ur = substream(seed, "init/state.users");
  s.users = Mat(user_count, d);
  for (Eigen::Index i = 0; i < s.users.size(); ++i) s.users(i) = ur.uniform(-limit, limit);
  Rng ir = substream(seed, "init/state.items");
  s.items = Mat(item_count, d);
  for (Eigen::Index i = 0; i < s.items.size(); ++i) s.items(i) = ir.uniform(-limit, limit);
  return s;
}

EntityState init_states_encoders(const NamedTensors& params,
                                 const std::vector<Interaction>& train, int user_count,
                                 int item_count, int rating_scale) {
  const int d = static_cast<int>(params.at("enc_u.W2").cols());
  EntityState s;
  s.users = Mat(user_count, d);
  s.items = Mat(item_count, d);
  // column-sparse accumulation: one pass to gather, one matrix per entity
  std::vector<Vec> user_inputs(static_cast<std::size_t>(user_count),
                               Vec::Zero(item_count));
  std::vector<Vec> item_inputs(static_cast<std::size_t>(item_count),
                               Vec::Zero(user_count));
  for (const auto& x : train) {
    const double r = static_cast<double>(x.rating) / static_cast<double>(rating_scale);
    user_inputs[static_cast<std::size_t>(x.user_idx)](x.item_idx) = r;
    item_inputs[static_cast<std::size_t>(x.item_idx)](x.user_idx) = r;
  }
  for (int u = 0; u < user_count; ++u) {
    s.users.row(u) =
        encoder_forward(params, "enc_u", user_inputs[static_cast<std::size_t>(u)]).transpose();
  }
  for (int i = 0; i < item_count; ++i) {
    s.items.row(i) =
        encoder_forward(params, "enc_i", item_inputs[static_cast<std::size_t>(i)]).transpose();
  }
  return s;
}

// ---------------------------------------------------------------------------

Var BuildCtx::param(const std::string& name) {
  auto it = cache_.find(name);
  if (it != cache_.end()) return it->second;
  Var v = tape.leaf(&params.at(name), trainable);
  cache_.emplace(name, v);
  return v;
}

ReviewGraph review_features_graph(BuildCtx& ctx, Var token_embeds) {
  if (ctx.tape.value(token_embeds).rows() < 1) {
    throw ContractError("review_features_graph: empty review");
  }
  Var projected = add_rowwise(matmul(token_embeds, ctx.param("text.P")), ctx.param("text.b"));
  Var attn = softmax(matmul(projected, ctx.param("att.v")));
  return ReviewGraph{matmul_tA(projected, attn), attn};
}

Var rating_features_graph(BuildCtx& ctx, int rating, int rating_scale) {
  if (rating < 1 || rating > rating_scale) {
    throw DomainError("rating_features_graph: rating " + std::to_string(rating) +
                      " outside scale 1.." + std::to_string(rating_scale));
  }
  Mat onehot = Mat::Zero(rating_scale, 1);
  onehot(rating - 1, 0) = 1.0;
  return project(ctx.param("rate.P"), ctx.param("rate.b"), ctx.tape.constant(std::move(onehot)));
}

Var fuse_graph(BuildCtx& ctx, std::optional<Var> review_feat, std::optional<Var> rating_feat) {
  const int d = static_cast<int>(ctx.params.at("fuse.P").cols());
  Var zero = ctx.tape.constant(Mat::Zero(d, 1));
  Var t = review_feat.value_or(zero);
  Var r = rating_feat.value_or(zero);
  return project(ctx.param("fuse.P"), ctx.param("fuse.b"), concat_v(t, r));
}

Var gru_update_graph(BuildCtx& ctx, const std::string& prefix, Var state, Var x) {
  auto w = [&](const char* n) { return ctx.param(prefix + "." + n); };
  Var r = elementwise(Activation::kSigmoid,
                      add(add(matmul(w("W_r"), state), matmul(w("U_r"), x)), w("b_r")));
  Var z = elementwise(Activation::kSigmoid,
                      add(add(matmul(w("W_z"), state), matmul(w("U_z"), x)), w("b_z")));
  Var cand = elementwise(
      Activation::kTanh,
      add(add(matmul(w("W_h"), hadamard(r, state)), matmul(w("U_h"), x)), w("b_h")));
  return add(hadamard(one_minus(z), state), hadamard(z, cand));
}

Var predict_graph(BuildCtx& ctx, Var user_state, Var item_state) {
  Var joint = concat_v(user_state, item_state);
  Var h = elementwise(Activation::kRelu,
                      project(ctx.param("mlp.W1"), ctx.param("mlp.b1"), joint));
  return project(ctx.param("mlp.W2"), ctx.param("mlp.b2"), h);
}

Var encoder_graph(BuildCtx& ctx, const std::string& prefix, Var input) {
  Var h = elementwise(Activation::kRelu,
                      project(ctx.param(prefix + ".W1"), ctx.param(prefix + ".b1"), input));
  return project(ctx.param(prefix + ".W2"), ctx.param(prefix + ".b2"), h);
}

// ---------------------------------------------------------------------------

namespace {

constexpr char kCheckpointMagic[4] = {'D', 'R', 'X', 'M'};
constexpr std::uint16_t kCheckpointVersion = 1;

void write_mat(ByteWriter& w, const Mat& m) {
  w.u32(static_cast<std::uint32_t>(m.rows()));
  w.u32(static_cast<std::uint32_t>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) w.f64(m(r, c));
  }
}

Mat read_mat(ByteReader& r) {
  const std::uint32_t rows = r.u32();
  const std::uint32_t cols = r.u32();
  Mat m(rows, cols);
  for (std::uint32_t i = 0; i < rows; ++i) {
    for (std::uint32_t j = 0; j < cols; ++j) m(i, j) = r.f64();
  }
  return m;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  ByteWriter w;
  w.u32(static_cast<std::uint32_t>(ckpt.hyper.d));
  w.u32(static_cast<std::uint32_t>(ckpt.hyper.b));
  w.u32(static_cast<std::uint32_t>(ckpt.hyper.rating_scale));
  w.f64(ckpt.hyper.lambda);
  w.u32(static_cast<std::uint32_t>(ckpt.hyper.modality_count));
  w.u8(ckpt.variant == Variant::kDrexMlp ? 1 : 0);
  w.u8(ckpt.embed_kind == EmbedKind::kHashedTrainable ? 1 : 0);
  w.u32(static_cast<std::uint32_t>(ckpt.embed_table_size));
  w.u32(static_cast<std::uint32_t>(ckpt.params.size()));
  for (const auto& name : ckpt.params.names()) {
    w.str(name);
    write_mat(w, ckpt.params.at(name));
  }
  write_mat(w, ckpt.states.users);
  write_mat(w, ckpt.states.items);
  write_framed_file(path, kCheckpointMagic, kCheckpointVersion, w.buffer());
}

Checkpoint load_checkpoint(const std::string& path) {
  const std::string payload = read_framed_file(path, kCheckpointMagic, kCheckpointVersion);
  ByteReader r(payload);
  Checkpoint c;
  c.hyper.d = static_cast<int>(r.u32());
  c.hyper.b = static_cast<int>(r.u32());
  c.hyper.rating_scale = static_cast<int>(r.u32());
  c.hyper.lambda = r.f64();
  c.hyper.modality_count = static_cast<int>(r.u32());
  c.variant = r.u8() != 0 ? Variant::kDrexMlp : Variant::kDrex;
  c.embed_kind = r.u8() != 0 ? EmbedKind::kHashedTrainable : EmbedKind::kFileTable;
  c.embed_table_size = static_cast<int>(r.u32());
  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.str();
    c.params.add(name, read_mat(r));
  }
  c.states.users = read_mat(r);
  c.states.items = read_mat(r);
  if (!r.done()) throw FormatError("checkpoint has trailing bytes: " + path);
  for (const auto& name : c.params.names()) {
    if (!c.params.at(name).allFinite()) {
      throw FormatError("checkpoint tensor '" + name + "' has non-finite values");
    }
  }
  return c;
}

}  // namespace drex
