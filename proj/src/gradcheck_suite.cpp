#include <cstdio>

#include "drex/gradcheck.hpp"
#include "drex/model.hpp"
#include "drex/train.hpp"

namespace drex {
namespace {

Mat random_mat(int rows, int cols, Rng& rng) {
  Mat m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) m(r, c) = rng.uniform(-1.0, 1.0);
  }
  return m;
}

using GraphFn = std::function<Var(BuildCtx&)>;

// Builds the graph twice: once per finite-difference probe (fresh tape on the
// perturbed tensors) and once at the base point for the analytic gradients.
// Inputs ride along inside `params` under in.* names, so they are checked too.
GradcheckReport check_graph(const NamedTensors& params, const GraphFn& build) {
  ScalarFn fn = [&](const NamedTensors& p) {
    Tape tape;
    BuildCtx ctx(tape, p);
    return tape.value(build(ctx))(0, 0);
  };
  Tape tape;
  BuildCtx ctx(tape, params);
  Var root = build(ctx);
  tape.backward(root);
  NamedTensors analytic = params.zeros_like();
  for (const auto& name : params.names()) {
    tape.accumulate_gradient(ctx.param(name), analytic.at(name));
  }
  return finite_diff_gradcheck(fn, params, analytic);
}

NamedTensors copy_tensors(const NamedTensors& full, const std::vector<std::string>& names) {
  NamedTensors out;
  for (const auto& name : names) out.add(name, full.at(name));
  return out;
}

std::vector<std::string> gru_names(const std::string& prefix) {
  std::vector<std::string> names;
  for (const char* gate : {"W_r", "U_r", "b_r", "W_z", "U_z", "b_z", "W_h", "U_h", "b_h"}) {
    names.push_back(prefix + "." + std::string(gate));
  }
  return names;
}

OpCheck composed_loss_check(const NamedTensors& full, const EmbeddingProvider& embedder,
                            int d, Rng& rng) {
  Vocab vocab;
  for (const char* w : {"crisp", "engine", "plot", "muddy"}) vocab.add(w);
  std::vector<Interaction> batch = {
      {0, 0, 5, {0, 1}, 10},
      {1, 1, 2, {2, 3, 0}, 20},
      {0, 1, 3, {}, 30},  // review modality absent
  };
  EntityState states;
  states.users = random_mat(2, d, rng);
  states.items = random_mat(2, d, rng);

  TrainConfig config;
  config.d = d;
  config.lambda = 0.01;
  config.batch_size = static_cast<int>(batch.size());

  NamedTensors grads = full.zeros_like();
  batch_gradients(full, states, batch, config, embedder, vocab, grads);
  ScalarFn fn = [&](const NamedTensors& p) {
    NamedTensors scratch = p.zeros_like();
    return batch_gradients(p, states, batch, config, embedder, vocab, scratch);
  };
  return {"composed_loss", finite_diff_gradcheck(fn, full, grads)};
}

}  // namespace

double GradcheckSuite::worst() const {
  double w = 0.0;
  for (const auto& c : checks) w = std::max(w, c.report.max_rel_error);
  return w;
}

bool GradcheckSuite::passed() const {
  for (const auto& c : checks) {
    if (!c.report.passed(threshold)) return false;
  }
  return !checks.empty();
}

GradcheckSuite run_gradcheck_suite(std::uint64_t seed) {
  const int d = 3;
  const int b = 5;
  const int users = 3;
  const int items = 4;
  HyperParams hyper;
  hyper.d = d;
  hyper.b = b;
  hyper.rating_scale = 5;
  EmbeddingProvider embedder = EmbeddingProvider::hashed(b, 8);
  NamedTensors full =
      init_params(hyper, Variant::kDrexMlp, users, items, &embedder, seed);
  Rng rng = substream(seed, "gradcheck/inputs");

  GradcheckSuite suite;

  {
    NamedTensors p = copy_tensors(full, {"text.P", "text.b"});
    p.add("in.token", random_mat(b, 1, rng));
    suite.checks.push_back({"projection", check_graph(p, [](BuildCtx& ctx) {
                              return squared_norm(project(ctx.param("text.P"),
                                                          ctx.param("text.b"),
                                                          ctx.param("in.token")));
                            })});
  }
  {
    NamedTensors p;
    p.add("in.scores", random_mat(6, 1, rng));
    suite.checks.push_back({"softmax", check_graph(p, [](BuildCtx& ctx) {
                              return squared_norm(softmax(ctx.param("in.scores")));
                            })});
  }
  {
    NamedTensors p = copy_tensors(full, {"text.P", "text.b", "att.v"});
    p.add("in.tokens", random_mat(6, b, rng));
    suite.checks.push_back({"review_attention", check_graph(p, [](BuildCtx& ctx) {
                              auto rg = review_features_graph(ctx, ctx.param("in.tokens"));
                              return squared_norm(rg.pooled);
                            })});
  }
  {
    NamedTensors p = copy_tensors(full, {"rate.P", "rate.b"});
    suite.checks.push_back({"rating_embedding", check_graph(p, [](BuildCtx& ctx) {
                              return squared_norm(rating_features_graph(ctx, 4, 5));
                            })});
  }
  {
    NamedTensors p = copy_tensors(full, {"fuse.P", "fuse.b"});
    p.add("in.review", random_mat(d, 1, rng));
    p.add("in.rating", random_mat(d, 1, rng));
    suite.checks.push_back({"fusion", check_graph(p, [](BuildCtx& ctx) {
                              return squared_norm(fuse_graph(ctx, ctx.param("in.review"),
                                                             ctx.param("in.rating")));
                            })});
    suite.checks.push_back({"fusion_single_modality", check_graph(p, [](BuildCtx& ctx) {
                              return squared_norm(
                                  fuse_graph(ctx, std::nullopt, ctx.param("in.rating")));
                            })});
  }
  for (const char* prefix : {"gru_u", "gru_i"}) {
    NamedTensors p = copy_tensors(full, gru_names(prefix));
    p.add("in.state", random_mat(d, 1, rng));
    p.add("in.x", random_mat(d, 1, rng));
    suite.checks.push_back(
        {std::string(prefix) + "_update", check_graph(p, [prefix](BuildCtx& ctx) {
           return squared_norm(
               gru_update_graph(ctx, prefix, ctx.param("in.state"), ctx.param("in.x")));
         })});
  }
  {
    NamedTensors p = copy_tensors(full, {"mlp.W1", "mlp.b1", "mlp.W2", "mlp.b2"});
    p.add("in.u", random_mat(d, 1, rng));
    p.add("in.i", random_mat(d, 1, rng));
    suite.checks.push_back({"prediction_head", check_graph(p, [](BuildCtx& ctx) {
                              return predict_graph(ctx, ctx.param("in.u"), ctx.param("in.i"));
                            })});
  }
  {
    NamedTensors p = copy_tensors(full, {"enc_u.W1", "enc_u.b1", "enc_u.W2", "enc_u.b2"});
    p.add("in.pref", random_mat(items, 1, rng));
    suite.checks.push_back({"user_encoder", check_graph(p, [](BuildCtx& ctx) {
                              return squared_norm(
                                  encoder_graph(ctx, "enc_u", ctx.param("in.pref")));
                            })});
  }
  {
    NamedTensors p = copy_tensors(full, {"enc_i.W1", "enc_i.b1", "enc_i.W2", "enc_i.b2"});
    p.add("in.pref", random_mat(users, 1, rng));
    suite.checks.push_back({"item_encoder", check_graph(p, [](BuildCtx& ctx) {
                              return squared_norm(
                                  encoder_graph(ctx, "enc_i", ctx.param("in.pref")));
                            })});
  }
  {
    // kDrex keeps the composed check free of encoder tensors; those are
    // covered in isolation above.
    NamedTensors plain = init_params(hyper, Variant::kDrex, users, items, &embedder, seed);
    suite.checks.push_back(composed_loss_check(plain, embedder, d, rng));
  }
  return suite;
}

std::string gradcheck_text(const GradcheckSuite& suite) {
  std::string out;
  char line[160];
  for (const auto& c : suite.checks) {
    std::snprintf(line, sizeof(line), "%-24s max_rel_error %.3e  %s\n", c.op.c_str(),
                  c.report.max_rel_error, c.report.passed(suite.threshold) ? "ok" : "FAIL");
    out += line;
  }
  std::snprintf(line, sizeof(line), "worst %.3e threshold %.1e -> %s\n", suite.worst(),
                suite.threshold, suite.passed() ? "pass" : "fail");
  out += line;
  return out;
}

}  // namespace drex
