#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>

#include "drex/config.hpp"
#include "drex/io.hpp"
#include "drex/text.hpp"

using namespace drex;

TEST_CASE("from_text parses comments, blanks, and trimmed pairs") {
  Config cfg = Config::from_text(
      "# top comment\n"
      "\n"
      "lr = 0.01\n"
      "  name =  spaced value \n"
      "path = /a/b=c\n"  // value keeps everything after the first '='
      "lr = 0.02\n",     // later assignment wins
      "inline");
  CHECK(cfg.get_double("lr", 0.0) == 0.02);
  CHECK(cfg.get_string("name", "") == "spaced value");
  CHECK(cfg.get_string("path", "") == "/a/b=c");
  CHECK(cfg.entries().size() == 3);
}

TEST_CASE("from_text rejects malformed lines with their line number") {
  CHECK_THROWS_WITH_AS(Config::from_text("a = 1\nnonsense\n", "f"),
                       doctest::Contains("f:2"), ConfigError);
  CHECK_THROWS_AS(Config::from_text("= value\n", "f"), ConfigError);
}

TEST_CASE("apply_override splits on the first equals sign") {
  Config cfg;
  cfg.apply_override("k=v", "--set");
  cfg.apply_override("sweep.lr = 0.1,0.2", "--set");
  CHECK(cfg.get_string("k", "") == "v");
  CHECK(cfg.get_string("sweep.lr", "") == "0.1,0.2");
  CHECK_THROWS_AS(cfg.apply_override("novalue", "--set"), ConfigError);
  CHECK_THROWS_AS(cfg.apply_override("=x", "--set"), ConfigError);
}

TEST_CASE("typed getters parse fully or throw") {
  Config cfg;
  cfg.set("i", "42");
  cfg.set("d", "2.5e-3");
  cfg.set("u", "18446744073709551615");
  cfg.set("b1", "Yes");
  cfg.set("b0", "off");
  cfg.set("junk", "12x");

  CHECK(cfg.get_int("i", 0) == 42);
  CHECK(cfg.get_double("d", 0.0) == 2.5e-3);
  CHECK(cfg.get_double("i", 0.0) == 42.0);
  CHECK(cfg.get_u64("u", 0) == 18446744073709551615ull);
  CHECK(cfg.get_bool("b1", false));
  CHECK_FALSE(cfg.get_bool("b0", true));

  CHECK(cfg.get_int("absent", 7) == 7);
  CHECK(cfg.get_double("absent", 1.5) == 1.5);
  CHECK(cfg.get_bool("absent", true));
  CHECK(cfg.get_string("absent", "x") == "x");

  CHECK_THROWS_AS(cfg.get_int("junk", 0), ConfigError);
  CHECK_THROWS_AS(cfg.get_double("junk", 0.0), ConfigError);
  CHECK_THROWS_AS(cfg.get_u64("junk", 0), ConfigError);
  CHECK_THROWS_AS(cfg.get_bool("junk", false), ConfigError);
  CHECK_THROWS_AS(cfg.get_int("d", 0), ConfigError);  // "2.5e-3" is not an int
}

TEST_CASE("require_string") {
  Config cfg;
  cfg.set("p", "path");
  cfg.set("empty", "");
  CHECK(cfg.require_string("p") == "path");
  CHECK_THROWS_AS(cfg.require_string("absent"), ConfigError);
  CHECK_THROWS_AS(cfg.require_string("empty"), ConfigError);
}

TEST_CASE("comma lists") {
  Config cfg;
  cfg.set("ds", "0.1, 0.2 ,3");
  cfg.set("is", "8,16");
  cfg.set("bad", "1,,2");
  CHECK(cfg.get_double_list("ds", {}) == std::vector<double>{0.1, 0.2, 3.0});
  CHECK(cfg.get_int_list("is", {}) == std::vector<int>{8, 16});
  CHECK(cfg.get_double_list("absent", {9.0}) == std::vector<double>{9.0});
  CHECK_THROWS_AS(cfg.get_double_list("bad", {}), ConfigError);
  CHECK_THROWS_AS(cfg.get_int_list("ds", {}), ConfigError);
}

TEST_CASE("enum spellings round-trip and reject unknowns") {
  CHECK(parse_variant(variant_name(Variant::kDrex)) == Variant::kDrex);
  CHECK(parse_variant(variant_name(Variant::kDrexMlp)) == Variant::kDrexMlp);
  CHECK(parse_state_mode(state_mode_name(StateMode::kLeaf)) == StateMode::kLeaf);
  CHECK(parse_profile_window(profile_window_name(ProfileWindow::kFinalBatch)) ==
        ProfileWindow::kFinalBatch);
  CHECK(parse_ranking_scope(ranking_scope_name(RankingScope::kFullCatalog)) ==
        RankingScope::kFullCatalog);
  CHECK(parse_ndcg_norm(ndcg_norm_name(NdcgNorm::kFullRelevant)) == NdcgNorm::kFullRelevant);

  CHECK_THROWS_AS(parse_variant("gru"), ConfigError);
  CHECK_THROWS_AS(parse_state_mode("frozen"), ConfigError);
  CHECK_THROWS_AS(parse_profile_window("all"), ConfigError);
  CHECK_THROWS_AS(parse_ranking_scope("everything"), ConfigError);
  CHECK_THROWS_AS(parse_ndcg_norm("raw"), ConfigError);
}

TEST_CASE("train_config_from maps keys and validates") {
  Config empty;
  TrainConfig defaults = train_config_from(empty);
  CHECK(defaults.lr == TrainConfig{}.lr);
  CHECK(defaults.d == TrainConfig{}.d);

  Config cfg = Config::from_text(
      "lr = 0.05\nlambda = 0.5\nd = 16\nbatch_size = 7\nmax_epochs = 3\npatience = 2\n"
      "seed = 99\nshuffle = true\nthreads = 4\nvariant = drex_mlp\nstate_mode = leaf\n"
      "profile_window = final_batch\n",
      "t");
  TrainConfig tc = train_config_from(cfg);
  CHECK(tc.lr == 0.05);
  CHECK(tc.lambda == 0.5);
  CHECK(tc.d == 16);
  CHECK(tc.batch_size == 7);
  CHECK(tc.max_epochs == 3);
  CHECK(tc.patience == 2);
  CHECK(tc.seed == 99);
  CHECK(tc.shuffle);
  CHECK(tc.threads == 4);
  CHECK(tc.variant == Variant::kDrexMlp);
  CHECK(tc.state_mode == StateMode::kLeaf);
  CHECK(tc.profile_window == ProfileWindow::kFinalBatch);

  Config bad;
  bad.set("lr", "-1");
  CHECK_THROWS_AS(train_config_from(bad), ConfigError);
  bad.set("lr", "0.1");
  bad.set("variant", "nope");
  CHECK_THROWS_AS(train_config_from(bad), ConfigError);
}

TEST_CASE("eval_options_from") {
  Config cfg = Config::from_text("scope = full_catalog\nndcg_norm = full_relevant\ntheta = 3\n",
                                 "t");
  EvalOptions opts = eval_options_from(cfg);
  CHECK(opts.scope == RankingScope::kFullCatalog);
  CHECK(opts.norm == NdcgNorm::kFullRelevant);
  CHECK(opts.theta == 3);

  Config bad;
  bad.set("theta", "0");
  CHECK_THROWS_AS(eval_options_from(bad), ConfigError);
}

TEST_CASE("embedder_from builds hashed and file providers") {
  Config cfg;
  EmbeddingProvider hashed = embedder_from(cfg);  // defaults
  CHECK(hashed.kind() == EmbedKind::kHashedTrainable);
  CHECK(hashed.dimension() == kDefaultEmbedDim);

  cfg.set("embedder.b", "32");
  cfg.set("embedder.buckets", "128");
  EmbeddingProvider small = embedder_from(cfg);
  CHECK(small.dimension() == 32);
  CHECK(small.table_rows() == 128);

  cfg.set("embedder.kind", "file");
  CHECK_THROWS_AS(embedder_from(cfg), ConfigError);  // no path

  Mat table(2, 3);
  table << 1, 2, 3, 4, 5, 6;
  std::string path = "cfg_embed_tmp.drxe";
  save_embedding_file(EmbeddingProvider::file_table({"alpha", "beta"}, table), path);
  cfg.set("embedder.path", path);
  EmbeddingProvider loaded = embedder_from(cfg);
  CHECK(loaded.kind() == EmbedKind::kFileTable);
  CHECK(loaded.dimension() == 3);
  CHECK(loaded.slot("beta") == 1);
  std::remove(path.c_str());

  cfg.set("embedder.kind", "magic");
  CHECK_THROWS_AS(embedder_from(cfg), ConfigError);
}

TEST_CASE("from_file reads and missing file raises IoError") {
  std::string path = "cfg_file_tmp.cfg";
  write_file(path, "alpha = 1\n# comment\nbeta = two\n");
  Config cfg = Config::from_file(path);
  CHECK(cfg.get_int("alpha", 0) == 1);
  CHECK(cfg.get_string("beta", "") == "two");
  std::remove(path.c_str());
  CHECK_THROWS_AS(Config::from_file("definitely_missing.cfg"), IoError);
}
