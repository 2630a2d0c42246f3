#include "drex/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <span>

#include "drex/common.hpp"

namespace drex {

void TrainConfig::validate() const {
  if (lr <= 0.0) throw ConfigError("lr must be positive");
  if (lambda < 0.0) throw ConfigError("lambda must be non-negative");
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (max_epochs < 1) throw ConfigError("max_epochs must be at least 1");
  if (patience < 1) throw ConfigError("patience must be at least 1");
  if (d < 1) throw ConfigError("d must be at least 1");
  if (threads < 1) throw ConfigError("threads must be at least 1");
}

bool early_stop(const History& history, int patience) {
  if (history.empty()) throw ContractError("early_stop on empty history");
  int best_epoch = history.front().epoch;
  double best = history.front().criterion;
  for (const auto& h : history) {
    if (h.criterion > best) {
      best = h.criterion;
      best_epoch = h.epoch;
    }
  }
  return history.back().epoch - best_epoch >= patience;
}

std::string history_csv(const History& history) {
  std::string out = "epoch,train_loss,val_f1_at_5,val_ndcg_at_5,criterion,mean_state_norm\n";
  char buf[160];
  for (const auto& h : history) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g,%.17g\n", h.epoch,
                  h.train_loss, h.val_f1_at_5, h.val_ndcg_at_5, h.criterion,
                  h.mean_state_norm);
    out += buf;
  }
  return out;
}

std::vector<Interaction> order_chronologically(std::vector<Interaction> interactions) {
  std::stable_sort(interactions.begin(), interactions.end(),
                   [](const Interaction& a, const Interaction& b) {
                     return a.timestamp < b.timestamp;
                   });
  return interactions;
}

namespace {

std::vector<std::string> token_strings(const Vocab& vocab, const std::vector<int>& ids) {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (int id : ids) out.push_back(vocab.token(id));
  return out;
}

// Span-based core so the trainer can slice batches without copying token
// vectors around.
double batch_gradients_span(const NamedTensors& params, const EntityState& states,
                            std::span<const Interaction> batch, const TrainConfig& config,
                            const EmbeddingProvider& embedder, const Vocab& vocab,
                            NamedTensors& grads, EntityState* state_grads,
                            ProfileStore* profiles, const EncoderRouting* routing) {
  if (batch.empty()) throw ContractError("batch_gradients on an empty batch");
  const bool hashed = embedder.kind() == EmbedKind::kHashedTrainable;
  const Mat* table = hashed ? &params.at("embed.table") : nullptr;
  const bool leaf_states = config.state_mode == StateMode::kLeaf;
  if (leaf_states && state_grads == nullptr) {
    throw ContractError("leaf state mode needs a state gradient buffer");
  }
  const double inv_b = 1.0 / static_cast<double>(batch.size());

  grads.set_zero();
  if (state_grads != nullptr) {
    state_grads->users.setZero(states.users.rows(), states.users.cols());
    state_grads->items.setZero(states.items.rows(), states.items.cols());
  }

  struct ChunkAccum {
    NamedTensors dense;
    std::map<int, Vec> embed_rows;
    std::map<int, Vec> user_rows;
    std::map<int, Vec> item_rows;
    double loss_sum = 0.0;
    std::string failure;
  };
  const int threads = config.threads;
  const int chunk_count = std::max(1, std::min<int>(threads, static_cast<int>(batch.size())));
  std::vector<ChunkAccum> accums(static_cast<std::size_t>(chunk_count));
  for (auto& a : accums) {
    for (const auto& name : params.names()) {
      if (name == "embed.table") continue;  // rows accumulate sparsely
      const Mat& p = params.at(name);
      a.dense.add(name, Mat::Zero(p.rows(), p.cols()));
    }
  }
  std::vector<Vec> attention(batch.size());

  parallel_chunks(batch.size(), threads, [&](int chunk, std::size_t begin, std::size_t end) {
    auto& acc = accums[static_cast<std::size_t>(chunk)];
    for (std::size_t n = begin; n < end; ++n) {
      const Interaction& x = batch[n];
      Tape tape;
      BuildCtx ctx(tape, params);

      std::optional<Var> review;
      std::map<int, Var> bucket_leaves;
      if (!x.tokens.empty()) {
        Var embeds;
        if (hashed) {
          std::vector<Var> rows;
          rows.reserve(x.tokens.size());
          for (int tok : x.tokens) {
            const int bucket = embedder.slot(vocab.token(tok));
            auto it = bucket_leaves.find(bucket);
            if (it == bucket_leaves.end()) {
              Var leaf = tape.leaf(Mat(table->row(bucket).transpose()));
              it = bucket_leaves.emplace(bucket, leaf).first;
            }
            rows.push_back(it->second);
          }
          embeds = stack_rows(tape, rows);
        } else {
          embeds = tape.constant(embedder.embed(token_strings(vocab, x.tokens)));
        }
        auto rg = review_features_graph(ctx, embeds);
        review = rg.pooled;
        attention[n] = tape.value(rg.attention).col(0);
      }
      Var rating = rating_features_graph(ctx, x.rating,
                                         static_cast<int>(params.at("rate.P").rows()));
      Var fused = fuse_graph(ctx, review, rating);

      auto state_input = [&](int idx, const Mat& store, const char* enc_prefix,
                             const std::unordered_map<int, Vec>* routed) -> Var {
        if (routed != nullptr) {
          auto it = routed->find(static_cast<int>(n));
          if (it != routed->end()) {
            return encoder_graph(ctx, enc_prefix, tape.constant(Mat(it->second)));
          }
        }
        Mat row = store.row(idx).transpose();
        return leaf_states ? tape.leaf(std::move(row)) : tape.constant(std::move(row));
      };
      const auto* route_u = routing != nullptr ? &routing->user_at : nullptr;
      const auto* route_i = routing != nullptr ? &routing->item_at : nullptr;
      Var u_in = state_input(x.user_idx, states.users, "enc_u", route_u);
      Var i_in = state_input(x.item_idx, states.items, "enc_i", route_i);

      Var u_next = gru_update_graph(ctx, "gru_u", u_in, fused);
      Var i_next = gru_update_graph(ctx, "gru_i", i_in, fused);
      Var pred = predict_graph(ctx, u_next, i_next);
      Var resid = sub(tape.constant(static_cast<double>(x.rating)), pred);
      Var loss = hadamard(resid, resid);
      if (config.lambda != 0.0) {
        Var reg = scale(add(squared_norm(u_next), squared_norm(i_next)), config.lambda / 2.0);
        loss = add(loss, reg);
      }

      const double lval = tape.value(loss)(0, 0);
      if (!std::isfinite(lval)) {
        if (acc.failure.empty()) {
          acc.failure = "non-finite loss at interaction user=" + std::to_string(x.user_idx) +
                        " item=" + std::to_string(x.item_idx) +
                        " batch_pos=" + std::to_string(n);
        }
        return;
      }
      acc.loss_sum += lval;
      tape.backward(loss);

      for (const auto& name : params.names()) {
        if (name == "embed.table") continue;
        tape.accumulate_gradient(ctx.param(name), acc.dense.at(name), inv_b);
      }
      for (const auto& [bucket, leaf] : bucket_leaves) {
        const Mat g = tape.gradient(leaf);
        auto it = acc.embed_rows.find(bucket);
        if (it == acc.embed_rows.end()) {
          acc.embed_rows.emplace(bucket, inv_b * g.col(0));
        } else {
          it->second += inv_b * g.col(0);
        }
      }
      if (leaf_states) {
        auto take = [&](std::map<int, Vec>& rows, int idx, Var v) {
          const Mat g = tape.gradient(v);
          auto it = rows.find(idx);
          if (it == rows.end()) {
            rows.emplace(idx, inv_b * g.col(0));
          } else {
            it->second += inv_b * g.col(0);
          }
        };
        // routed positions feed the encoder instead; the stored row gets none
        if (route_u == nullptr || route_u->find(static_cast<int>(n)) == route_u->end()) {
          take(acc.user_rows, x.user_idx, u_in);
        }
        if (route_i == nullptr || route_i->find(static_cast<int>(n)) == route_i->end()) {
          take(acc.item_rows, x.item_idx, i_in);
        }
      }
    }
  });

  for (const auto& a : accums) {
    if (!a.failure.empty()) throw NumericError(a.failure);
  }

  double loss_sum = 0.0;
  for (const auto& a : accums) {
    loss_sum += a.loss_sum;
    for (const auto& name : a.dense.names()) grads.at(name) += a.dense.at(name);
    for (const auto& [bucket, g] : a.embed_rows) {
      grads.at("embed.table").row(bucket) += g.transpose();
    }
    if (state_grads != nullptr) {
      for (const auto& [idx, g] : a.user_rows) state_grads->users.row(idx) += g.transpose();
      for (const auto& [idx, g] : a.item_rows) state_grads->items.row(idx) += g.transpose();
    }
  }

  if (profiles != nullptr) {
    for (std::size_t n = 0; n < batch.size(); ++n) {
      if (batch[n].tokens.empty()) continue;
      profiles->accumulate(batch[n].user_idx, batch[n].item_idx,
                           token_strings(vocab, batch[n].tokens), attention[n]);
    }
  }
  return loss_sum * inv_b;
}

void commit_batch_states_span(const NamedTensors& params, EntityState& states,
                              std::span<const Interaction> batch,
                              const EmbeddingProvider& embedder, const Vocab& vocab) {
  const Mat* table = embedder.kind() == EmbedKind::kHashedTrainable
                         ? &params.at("embed.table")
                         : nullptr;
  const int rating_scale = static_cast<int>(params.at("rate.P").rows());
  for (const Interaction& x : batch) {
    std::optional<Vec> review;
    if (!x.tokens.empty()) {
      review = review_features(params, embedder.embed(token_strings(vocab, x.tokens), table))
                   .pooled;
    }
    const Vec rating = rating_features(params, x.rating, rating_scale);
    const Vec fused = fuse(params, review ? &*review : nullptr, &rating);
    const Vec u = states.users.row(x.user_idx).transpose();
    const Vec i = states.items.row(x.item_idx).transpose();
    states.users.row(x.user_idx) = gru_update(params, "gru_u", u, fused).transpose();
    states.items.row(x.item_idx) = gru_update(params, "gru_i", i, fused).transpose();
  }
}

std::pair<double, double> default_validation(const NamedTensors& params,
                                             const EntityState& states,
                                             const SplitBundle& bundle, int threads) {
  const auto built = build_rankings(params, states, bundle, RankingScope::kTestItems,
                                    /*theta=*/4, threads, EvalSplit::kValidation);
  const double f1 = f1_at_k(built.rankings, 5).f1;
  const double ndcg = ndcg_at_k(built.rankings, 5, NdcgNorm::kCapped);
  return {f1, ndcg};
}

double mean_row_norm(const EntityState& states) {
  double sum = 0.0;
  for (Eigen::Index r = 0; r < states.users.rows(); ++r) sum += states.users.row(r).norm();
  for (Eigen::Index r = 0; r < states.items.rows(); ++r) sum += states.items.row(r).norm();
  const double count = static_cast<double>(states.users.rows() + states.items.rows());
  return count > 0 ? sum / count : 0.0;
}

}  // namespace

double batch_gradients(const NamedTensors& params, const EntityState& states,
                       const std::vector<Interaction>& batch, const TrainConfig& config,
                       const EmbeddingProvider& embedder, const Vocab& vocab,
                       NamedTensors& grads, EntityState* state_grads,
                       ProfileStore* profiles, const EncoderRouting* routing) {
  return batch_gradients_span(params, states, std::span<const Interaction>(batch), config,
                              embedder, vocab, grads, state_grads, profiles, routing);
}

void commit_batch_states(const NamedTensors& params, EntityState& states,
                         const std::vector<Interaction>& batch,
                         const EmbeddingProvider& embedder, const Vocab& vocab) {
  commit_batch_states_span(params, states, std::span<const Interaction>(batch), embedder,
                           vocab);
}

TrainResult train(const SplitBundle& bundle, const EmbeddingProvider& embedder,
                  const TrainConfig& config, const ValidationFn& validation) {
  config.validate();
  if (bundle.train.empty()) throw ConfigError("training split is empty");
  const int m = bundle.user_count();
  const int n = bundle.item_count();

  HyperParams hyper;
  hyper.d = config.d;
  hyper.b = embedder.dimension();
  hyper.rating_scale = bundle.rating_scale;
  hyper.lambda = config.lambda;

  NamedTensors params = init_params(hyper, config.variant, m, n, &embedder, config.seed);
  EntityState states = config.variant == Variant::kDrex
                           ? init_states_random(m, n, config.d, config.seed)
                           : init_states_encoders(params, bundle.train, m, n,
                                                  bundle.rating_scale);

  AdamState opt = AdamState::like(params);
  NamedTensors grads = params.zeros_like();

  const bool leaf_states = config.state_mode == StateMode::kLeaf;
  EntityState state_grads;
  NamedTensors state_view;
  AdamState state_opt;
  if (leaf_states) {
    state_view.add("users", states.users);
    state_view.add("items", states.items);
    state_opt = AdamState::like(state_view);
  }

  const std::vector<Interaction> ordered = order_chronologically(bundle.train);

  TrainResult result;
  result.profiles = ProfileStore(m, n);
  NamedTensors best_params;
  EntityState best_states;
  double best_criterion = 0.0;

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    if (config.variant == Variant::kDrexMlp && epoch > 1) {
      states = init_states_encoders(params, bundle.train, m, n, bundle.rating_scale);
    }
    std::vector<Interaction> shuffled;
    if (config.shuffle) {
      shuffled = ordered;
      Rng rng = substream(config.seed, "shuffle/epoch" + std::to_string(epoch));
      rng.shuffle(shuffled);
    }
    const std::vector<Interaction>& epoch_order = config.shuffle ? shuffled : ordered;

    if (config.profile_window == ProfileWindow::kFinalEpoch) result.profiles.clear();
    std::vector<char> user_seen(static_cast<std::size_t>(m), 0);
    std::vector<char> item_seen(static_cast<std::size_t>(n), 0);

    double loss_sum = 0.0;
    for (std::size_t start = 0; start < epoch_order.size();
         start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t len =
          std::min<std::size_t>(static_cast<std::size_t>(config.batch_size),
                                epoch_order.size() - start);
      const std::span<const Interaction> batch(epoch_order.data() + start, len);

      EncoderRouting routing;
      const EncoderRouting* routing_ptr = nullptr;
      if (config.variant == Variant::kDrexMlp) {
        for (std::size_t pos = 0; pos < batch.size(); ++pos) {
          const Interaction& x = batch[pos];
          if (!user_seen[static_cast<std::size_t>(x.user_idx)]) {
            user_seen[static_cast<std::size_t>(x.user_idx)] = 1;
            routing.user_at.emplace(static_cast<int>(pos),
                                    user_preference_vector(bundle.train, x.user_idx, n,
                                                           bundle.rating_scale));
          }
          if (!item_seen[static_cast<std::size_t>(x.item_idx)]) {
            item_seen[static_cast<std::size_t>(x.item_idx)] = 1;
            routing.item_at.emplace(static_cast<int>(pos),
                                    item_preference_vector(bundle.train, x.item_idx, m,
                                                           bundle.rating_scale));
          }
        }
        routing_ptr = &routing;
      }

      if (config.profile_window == ProfileWindow::kFinalBatch) result.profiles.clear();
      const double loss = batch_gradients_span(params, states, batch, config, embedder,
                                               bundle.vocab, grads,
                                               leaf_states ? &state_grads : nullptr,
                                               &result.profiles, routing_ptr);
      loss_sum += loss * static_cast<double>(len);

      adam_step(params, grads, opt, config.lr);
      if (leaf_states) {
        state_view.at("users") = states.users;
        state_view.at("items") = states.items;
        NamedTensors sg;
        sg.add("users", state_grads.users);
        sg.add("items", state_grads.items);
        adam_step(state_view, sg, state_opt, config.lr);
        states.users = state_view.at("users");
        states.items = state_view.at("items");
      }
      commit_batch_states_span(params, states, batch, embedder, bundle.vocab);
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = loss_sum / static_cast<double>(epoch_order.size());
    stats.mean_state_norm = mean_row_norm(states);
    const auto [f1, ndcg] = validation
                                ? validation(params, states, epoch)
                                : default_validation(params, states, bundle, config.threads);
    stats.val_f1_at_5 = f1;
    stats.val_ndcg_at_5 = ndcg;
    stats.criterion = (f1 + ndcg) / 2.0;
    stats.wall_ms = std::chrono::duration<double, std::milli>(
                        std::chrono::steady_clock::now() - t0)
                        .count();
    result.history.push_back(stats);

    if (epoch == 1 || stats.criterion > best_criterion) {
      best_criterion = stats.criterion;
      result.best_epoch = epoch;
      best_params = params;
      best_states = states;
    }
    if (early_stop(result.history, config.patience)) {
      result.stopped_early = true;
      break;
    }
  }

  result.params = std::move(best_params);
  result.states = std::move(best_states);
  return result;
}

SweepResult sweep(const SplitBundle& bundle, const EmbeddingProvider& embedder,
                  const TrainConfig& base, const SweepGrids& grids, int runs) {
  if (grids.lr.empty() || grids.lambda.empty() || grids.d.empty()) {
    throw ConfigError("sweep grids must be non-empty");
  }
  if (runs < 1) throw ConfigError("sweep needs at least one run");

  SweepResult out;
  for (int d : grids.d) {
    for (double lambda : grids.lambda) {
      for (double lr : grids.lr) {
        SweepEntry entry;
        entry.lr = lr;
        entry.lambda = lambda;
        entry.d = d;
        for (int run = 0; run < runs; ++run) {
          TrainConfig cfg = base;
          cfg.lr = lr;
          cfg.lambda = lambda;
          cfg.d = d;
          cfg.seed = base.seed + static_cast<std::uint64_t>(run);
          const TrainResult trained = train(bundle, embedder, cfg);
          EvalOptions opts;
          opts.split = EvalSplit::kValidation;
          opts.threads = base.threads;
          const MetricReport report =
              evaluate_model(trained.params, trained.states, bundle, opts);
          double s = report.mae;
          for (int k = 1; k <= 5; ++k) {
            s += 1.0 - metric_at_k(report, report.f1, k);
            s += 1.0 - metric_at_k(report, report.ndcg, k);
          }
          entry.run_scores.push_back(s / 11.0);
        }
        double sum = 0.0;
        for (double s : entry.run_scores) sum += s;
        entry.score = sum / static_cast<double>(runs);
        out.table.push_back(std::move(entry));
      }
    }
  }

  const SweepEntry* best = &out.table.front();
  for (const auto& e : out.table) {
    const auto key = [](const SweepEntry& x) {
      return std::make_tuple(x.score, x.lambda, x.lr, x.d);
    };
    if (key(e) < key(*best)) best = &e;
  }
  out.winner = *best;
  return out;
}

std::string sweep_csv(const SweepResult& result) {
  std::string out = "lr,lambda,d,score";
  const std::size_t runs = result.table.empty() ? 0 : result.table.front().run_scores.size();
  for (std::size_t r = 1; r <= runs; ++r) out += ",run" + std::to_string(r);
  out += "\n";
  char buf[96];
  for (const auto& e : result.table) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%d,%.17g", e.lr, e.lambda, e.d, e.score);
    out += buf;
    for (double s : e.run_scores) {
      std::snprintf(buf, sizeof buf, ",%.17g", s);
      out += buf;
    }
    out += "\n";
  }
  return out;
}

}  // namespace drex
