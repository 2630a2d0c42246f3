#include "drex/runner.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <unordered_set>
#include <utility>

#include <CLI11.hpp>
#include <json.hpp>

#include "drex/config.hpp"
#include "drex/eval.hpp"
#include "drex/explain.hpp"
#include "drex/gradcheck.hpp"
#include "drex/io.hpp"
#include "drex/synth.hpp"
#include "drex/train.hpp"

namespace drex {
namespace {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

std::string crc_hex(std::uint32_t crc) {
  char buf[9];
  std::snprintf(buf, sizeof(buf), "%08x", crc);
  return buf;
}

// Manifest bookkeeping shared by every verb: inputs and artifacts are
// checksummed as they pass through, and finish() freezes the run record.
class RunContext {
 public:
  RunContext(std::string verb, std::string out_dir, Config cfg)
      : verb_(std::move(verb)), out_(std::move(out_dir)), cfg_(std::move(cfg)) {
    fs::create_directories(out_);
  }

  const Config& cfg() const { return cfg_; }
  std::string path(const std::string& name) const { return (fs::path(out_) / name).string(); }

  // Resolves the config key to an existing file; `what` leads the diagnostic
  // so callers can pin the wording ("checkpoint not found", ...).
  std::string input_file(const std::string& key, const std::string& what) {
    std::string p = cfg_.get_string(key, "");
    if (p.empty()) throw IoError(what + " (config key '" + key + "' is unset)");
    if (!fs::exists(p)) throw IoError(what + ": " + p);
    inputs_.emplace_back(p, crc32_file(p));
    return p;
  }

  void write_artifact(const std::string& name, std::string_view bytes) {
    write_file(path(name), bytes);
    artifacts_.emplace_back(name, crc32(bytes));
  }

  // For artifacts serialized straight to disk (bundle, checkpoint).
  void note_artifact(const std::string& name) {
    artifacts_.emplace_back(name, crc32_file(path(name)));
  }

  void finish() {
    ordered_json m;
    m["verb"] = verb_;
    m["seed"] = cfg_.get_u64("seed", 0);
    m["threads"] = cfg_.get_int("threads", 1);
    ordered_json conf = ordered_json::object();
    for (const auto& [k, v] : cfg_.entries()) conf[k] = v;
    m["config"] = std::move(conf);
    ordered_json in = ordered_json::object();
    for (const auto& [p, crc] : inputs_) in[p] = crc_hex(crc);
    m["inputs"] = std::move(in);
    ordered_json art = ordered_json::object();
    for (const auto& [n, crc] : artifacts_) art[n] = crc_hex(crc);
    m["artifacts"] = std::move(art);
    write_file(path("run_manifest.json"), m.dump(2) + "\n");
  }

 private:
  std::string verb_;
  std::string out_;
  Config cfg_;
  std::vector<std::pair<std::string, std::uint32_t>> inputs_;
  std::vector<std::pair<std::string, std::uint32_t>> artifacts_;
};

int cmd_synth(RunContext& ctx) {
  const Config& cfg = ctx.cfg();
  SynthConfig sc;
  sc.users = cfg.get_int("synth.users", sc.users);
  sc.items = cfg.get_int("synth.items", sc.items);
  sc.interactions_per_user = cfg.get_int("synth.per_user", sc.interactions_per_user);
  sc.latent_dim = cfg.get_int("synth.latent_dim", sc.latent_dim);
  sc.keywords_per_item = cfg.get_int("synth.keywords", sc.keywords_per_item);
  sc.noise_per_review = cfg.get_int("synth.noise", sc.noise_per_review);
  sc.noise_pool = cfg.get_int("synth.noise_pool", sc.noise_pool);
  sc.base_rating = cfg.get_double("synth.base", sc.base_rating);
  sc.signal_gain = cfg.get_double("synth.gain", sc.signal_gain);
  sc.review_dropout = cfg.get_double("synth.dropout", sc.review_dropout);
  sc.rating_scale = cfg.get_int("synth.scale", sc.rating_scale);
  sc.seed = cfg.get_u64("seed", sc.seed);

  SynthDataset ds = make_synth(sc);
  ctx.write_artifact("synth.jsonl", synth_jsonl(ds));
  ctx.write_artifact("synth_manifest.json", synth_manifest_json(ds));
  ctx.finish();
  std::cout << "synth: " << ds.reviews.size() << " interactions, " << sc.users << " users, "
            << sc.items << " items\n";
  return 0;
}

int cmd_ingest(RunContext& ctx) {
  const Config& cfg = ctx.cfg();
  std::string corpus = ctx.input_file("corpus", "corpus not found");
  int scale = cfg.get_int("rating_scale", 5);

  ParseResult parsed = parse_corpus(corpus, scale);
  std::size_t parsed_count = parsed.reviews.size();
  std::vector<RawReview> rows = dedupe_latest(std::move(parsed.reviews));
  std::size_t deduped_count = rows.size();
  rows = filter_density(std::move(rows), cfg.get_int("min_user_ratings", 20),
                        cfg.get_int("min_item_raters", 5), cfg.get_bool("kcore_iterate", false));
  if (rows.empty()) throw DomainError("no interactions survive density filtering");
  std::size_t filtered_count = rows.size();

  std::unordered_set<std::string> stop =
      cfg.has("stopwords") ? load_stopword_file(cfg.require_string("stopwords")) : stopword_set();
  IndexedCorpus indexed = build_indexed(rows, stop);
  int vocab_size = indexed.vocab.size();

  int understratified = 0;
  SplitBundle bundle = split_70_20_10(std::move(indexed),
                                      substream_seed(cfg.get_u64("seed", 0), "split"), scale,
                                      &understratified);
  save_bundle(bundle, ctx.path("bundle.drxb"));
  ctx.note_artifact("bundle.drxb");

  ordered_json s;
  s["parsed"] = parsed_count;
  s["skipped"] = parsed.skipped;
  s["after_dedupe"] = deduped_count;
  s["after_filter"] = filtered_count;
  s["users"] = bundle.user_count();
  s["items"] = bundle.item_count();
  s["vocab"] = vocab_size;
  s["train"] = bundle.train.size();
  s["test"] = bundle.test.size();
  s["validation"] = bundle.validation.size();
  s["understratified_users"] = understratified;
  ctx.write_artifact("ingest_summary.json", s.dump(2) + "\n");
  ctx.finish();
  std::cout << "ingest: " << bundle.user_count() << " users, " << bundle.item_count()
            << " items, " << bundle.interaction_count() << " interactions (skipped "
            << parsed.skipped << " lines)\n";
  return 0;
}

EmbeddingProvider make_embedder(RunContext& ctx) {
  if (ctx.cfg().get_string("embedder.kind", "hashed") == "file") {
    ctx.input_file("embedder.path", "embedding file not found");
  }
  return embedder_from(ctx.cfg());
}

int cmd_train(RunContext& ctx) {
  const Config& cfg = ctx.cfg();
  SplitBundle bundle = load_bundle(ctx.input_file("bundle", "bundle not found"));
  TrainConfig tc = train_config_from(cfg);
  EmbeddingProvider embedder = make_embedder(ctx);

  TrainResult result = train(bundle, embedder, tc);
  for (const EpochStats& e : result.history) {
    std::printf("epoch %d  loss %.6f  criterion %.6f\n", e.epoch, e.train_loss, e.criterion);
  }

  Checkpoint ck;
  ck.hyper.d = tc.d;
  ck.hyper.b = embedder.dimension();
  ck.hyper.rating_scale = bundle.rating_scale;
  ck.hyper.lambda = tc.lambda;
  ck.variant = tc.variant;
  ck.embed_kind = embedder.kind();
  ck.embed_table_size = embedder.table_rows();
  ck.params = result.params;
  ck.states = result.states;
  save_checkpoint(ck, ctx.path("checkpoint.drxm"));
  ctx.note_artifact("checkpoint.drxm");
  ctx.write_artifact("history.csv", history_csv(result.history));
  ctx.write_artifact("profiles.json",
                     profiles_json(result.profiles, bundle.ids, cfg.get_int("profile.k", 10)));
  ctx.finish();
  std::cout << "train: best epoch " << result.best_epoch
            << (result.stopped_early ? " (early stop)" : "") << "\n";
  return 0;
}

int cmd_evaluate(RunContext& ctx) {
  SplitBundle bundle = load_bundle(ctx.input_file("bundle", "bundle not found"));
  Checkpoint ck = load_checkpoint(ctx.input_file("checkpoint", "checkpoint not found"));
  MetricReport report = evaluate_model(ck.params, ck.states, bundle, eval_options_from(ctx.cfg()));
  ctx.write_artifact("metrics.csv", metric_csv(report));
  ctx.write_artifact("metrics.json", metric_json(report));
  ctx.finish();
  std::printf("evaluate: mae %.4f  f1@5 %.4f  ndcg@5 %.4f\n", report.mae,
              metric_at_k(report, report.f1, 5), metric_at_k(report, report.ndcg, 5));
  return 0;
}

int cmd_sweep(RunContext& ctx) {
  const Config& cfg = ctx.cfg();
  SplitBundle bundle = load_bundle(ctx.input_file("bundle", "bundle not found"));
  TrainConfig base = train_config_from(cfg);
  EmbeddingProvider embedder = make_embedder(ctx);

  SweepGrids grids;
  grids.lr = cfg.get_double_list("sweep.lr", grids.lr);
  grids.lambda = cfg.get_double_list("sweep.lambda", grids.lambda);
  grids.d = cfg.get_int_list("sweep.d", grids.d);
  SweepResult result = sweep(bundle, embedder, base, grids, cfg.get_int("sweep.runs", 3));

  ctx.write_artifact("sweep.csv", sweep_csv(result));
  char winner[128];
  std::snprintf(winner, sizeof(winner), "lr = %.17g\nlambda = %.17g\nd = %d\n",
                result.winner.lr, result.winner.lambda, result.winner.d);
  ctx.write_artifact("winner.cfg", winner);
  ctx.finish();
  std::printf("sweep: winner lr %.17g lambda %.17g d %d (score %.6f)\n", result.winner.lr,
              result.winner.lambda, result.winner.d, result.winner.score);
  return 0;
}

int cmd_explain(RunContext& ctx) {
  const Config& cfg = ctx.cfg();
  SplitBundle bundle = load_bundle(ctx.input_file("bundle", "bundle not found"));
  Checkpoint ck = load_checkpoint(ctx.input_file("checkpoint", "checkpoint not found"));

  EmbeddingProvider embedder =
      ck.embed_kind == EmbedKind::kHashedTrainable
          ? EmbeddingProvider::hashed(ck.hyper.b, ck.embed_table_size)
          : load_embedding_file(ctx.input_file("embedder.path", "embedding file not found"));
  const Mat* table =
      ck.embed_kind == EmbedKind::kHashedTrainable ? &ck.params.at("embed.table") : nullptr;

  // Keyword profiles replayed from the training reviews under the checkpoint's
  // attention weights; no training artifact is needed beyond the checkpoint.
  ProfileStore store(bundle.user_count(), bundle.item_count());
  for (const Interaction& x : bundle.train) {
    if (x.tokens.empty()) continue;
    std::vector<std::string> words;
    words.reserve(x.tokens.size());
    for (int id : x.tokens) words.push_back(bundle.vocab.token(id));
    ReviewFeatures rf = review_features(ck.params, embedder.embed(words, table));
    store.accumulate(x.user_idx, x.item_idx, words, rf.attention);
  }

  std::string user_key = cfg.require_string("explain.user");
  auto uit = bundle.ids.user_idx.find(user_key);
  if (uit == bundle.ids.user_idx.end()) throw DomainError("unknown user '" + user_key + "'");
  int user = uit->second;

  std::vector<int> targets;
  if (cfg.has("explain.item")) {
    std::string item_key = cfg.require_string("explain.item");
    auto iit = bundle.ids.item_idx.find(item_key);
    if (iit == bundle.ids.item_idx.end()) throw DomainError("unknown item '" + item_key + "'");
    targets.push_back(iit->second);
  } else {
    std::unordered_set<int> seen;
    for (const Interaction& x : bundle.train) {
      if (x.user_idx == user) seen.insert(x.item_idx);
    }
    Vec u_state = ck.states.users.row(user).transpose();
    std::vector<std::pair<double, int>> scored;
    for (int i = 0; i < bundle.item_count(); ++i) {
      if (seen.count(i)) continue;
      scored.emplace_back(predict(ck.params, u_state, ck.states.items.row(i).transpose()), i);
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
      return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    int n = cfg.get_int("explain.top_n", 5);
    if (n < 1) throw ConfigError("explain.top_n must be >= 1");
    for (int i = 0; i < n && i < static_cast<int>(scored.size()); ++i) {
      targets.push_back(scored[i].second);
    }
  }

  int k = cfg.get_int("explain.k", 10);
  auto user_top = top_k_profile(store.user_scores(user), k);
  Vec u_state = ck.states.users.row(user).transpose();
  ordered_json records = ordered_json::array();
  for (int item : targets) {
    double pred = clamp_rating(
        predict(ck.params, u_state, ck.states.items.row(item).transpose()),
        bundle.rating_scale);
    Explanation e =
        build_explanation(user, item, user_top, top_k_profile(store.item_scores(item), k), pred);
    records.push_back(ordered_json::parse(explanation_json(e, bundle.ids)));
  }
  ctx.write_artifact("explanations.json", records.dump(2) + "\n");
  ctx.finish();
  std::cout << "explain: " << records.size() << " record(s) for user " << user_key << "\n";
  return 0;
}

int cmd_gradcheck(RunContext& ctx) {
  GradcheckSuite suite = run_gradcheck_suite(ctx.cfg().get_u64("seed", 0));
  std::string text = gradcheck_text(suite);
  std::cout << text;
  ctx.write_artifact("gradcheck.txt", text);
  ctx.finish();
  return suite.passed() ? 0 : 1;
}

// Shared flag block; resolution order is config file, then --set pairs, then
// the dedicated flags.
struct CommonFlags {
  std::string config_path;
  std::vector<std::string> sets;
  std::string out_dir = "out";
  int threads = 1;
  std::uint64_t seed = 0;
  CLI::Option* threads_opt = nullptr;
  CLI::Option* seed_opt = nullptr;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "key = value config file");
    cmd->add_option("--set", sets, "override, key=value (repeatable)");
    cmd->add_option("--out", out_dir, "output directory (default: out)");
    threads_opt = cmd->add_option("--threads", threads, "worker threads");
    seed_opt = cmd->add_option("--seed", seed, "master RNG seed");
  }

  Config resolve() const {
    Config cfg;
    if (!config_path.empty()) cfg = Config::from_file(config_path);
    for (const std::string& s : sets) cfg.apply_override(s, "--set");
    if (threads_opt->count() > 0) cfg.set("threads", std::to_string(threads));
    if (seed_opt->count() > 0) cfg.set("seed", std::to_string(seed));
    return cfg;
  }
};

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"DReX: recurrent multimodal recommender with keyword explanations"};
  app.require_subcommand(1);

  struct VerbSpec {
    const char* name;
    const char* help;
    int (*fn)(RunContext&);
  };
  static const VerbSpec verbs[] = {
      {"ingest", "parse, filter, and split a review corpus into a bundle", cmd_ingest},
      {"train", "train a model on a bundle", cmd_train},
      {"evaluate", "score a checkpoint on the test split", cmd_evaluate},
      {"sweep", "grid-search lr / lambda / d", cmd_sweep},
      {"explain", "emit keyword explanations for a user", cmd_explain},
      {"gradcheck", "finite-difference check of every model operation", cmd_gradcheck},
      {"synth", "generate the planted-signal synthetic corpus", cmd_synth},
  };

  // CLI11 binds the addresses of the flag members, so the structs must not
  // move after attach().
  std::array<CommonFlags, std::size(verbs)> flags;
  for (std::size_t i = 0; i < std::size(verbs); ++i) {
    flags[i].attach(app.add_subcommand(verbs[i].name, verbs[i].help));
  }

  try {
    app.parse(argc, argv);
    for (std::size_t i = 0; i < std::size(verbs); ++i) {
      if (app.get_subcommand(verbs[i].name)->parsed()) {
        RunContext ctx(verbs[i].name, flags[i].out_dir, flags[i].resolve());
        return verbs[i].fn(ctx);
      }
    }
    throw ContractError("no subcommand dispatched");
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.kind() == Error::Kind::kInput ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

int run_cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  argv.push_back("drex");
  for (const std::string& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace drex
