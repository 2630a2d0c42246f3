#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "drex/config.hpp"
#include "drex/gradcheck.hpp"
#include "drex/io.hpp"
#include "drex/runner.hpp"

using namespace drex;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int run(std::vector<std::string> args) { return run_cli(args); }

// One scratch tree per process; the pipeline stages feed later test cases.
const fs::path& scratch() {
  static const fs::path root = [] {
    fs::path p = fs::temp_directory_path() / "drex_cli_scratch";
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return root;
}

std::string at(const std::string& rel) { return (scratch() / rel).string(); }

// synth -> ingest -> train, executed once.
struct Pipeline {
  std::string corpus, bundle, checkpoint, train_dir;
  int synth_rc, ingest_rc, train_rc;
};

const Pipeline& pipeline() {
  static const Pipeline p = [] {
    Pipeline r;
    r.synth_rc = run({"synth", "--out", at("synth"), "--seed", "7", "--set", "synth.users=15",
                      "--set", "synth.items=20", "--set", "synth.per_user=6", "--set",
                      "synth.noise_pool=40"});
    r.corpus = at("synth/synth.jsonl");
    r.ingest_rc = run({"ingest", "--out", at("bundle"), "--seed", "3", "--set",
                       "corpus=" + r.corpus, "--set", "min_user_ratings=3", "--set",
                       "min_item_raters=1"});
    r.bundle = at("bundle/bundle.drxb");
    r.train_dir = at("train");
    r.train_rc = run({"train", "--out", r.train_dir, "--seed", "11", "--set",
                      "bundle=" + r.bundle, "--set", "d=4", "--set", "embedder.b=8", "--set",
                      "embedder.buckets=64", "--set", "lr=0.05", "--set", "max_epochs=2",
                      "--set", "batch_size=32"});
    r.checkpoint = at("train/checkpoint.drxm");
    return r;
  }();
  return p;
}

}  // namespace

TEST_CASE("usage errors exit 2, help exits 0") {
  CHECK(run({}) == 2);
  CHECK(run({"frobnicate"}) == 2);
  CHECK(run({"--help"}) == 0);
  CHECK(run({"synth", "--set", "missing_equals", "--out", at("bad_set")}) == 2);
}

TEST_CASE("synth, ingest, and train produce their artifacts") {
  const Pipeline& p = pipeline();
  CHECK(p.synth_rc == 0);
  CHECK(p.ingest_rc == 0);
  CHECK(p.train_rc == 0);
  for (const char* f : {"synth/synth.jsonl", "synth/synth_manifest.json",
                        "bundle/bundle.drxb", "bundle/ingest_summary.json",
                        "train/checkpoint.drxm", "train/history.csv", "train/profiles.json"}) {
    CAPTURE(f);
    CHECK(fs::exists(scratch() / f));
  }
  json summary = json::parse(read_file(at("bundle/ingest_summary.json")));
  CHECK(summary["users"] == 15);
  CHECK(summary["items"] == 20);
  CHECK(summary["skipped"] == 0);
  CHECK(summary["train"].get<int>() + summary["test"].get<int>() +
            summary["validation"].get<int>() ==
        90);
}

TEST_CASE("run manifest records config, input checksums, and artifact checksums") {
  const Pipeline& p = pipeline();
  REQUIRE(p.train_rc == 0);
  json m = json::parse(read_file(at("train/run_manifest.json")));
  CHECK(m["verb"] == "train");
  CHECK(m["seed"] == 11);
  CHECK(m["config"]["d"] == "4");
  CHECK(m["config"]["bundle"] == p.bundle);

  char expect[9];
  std::snprintf(expect, sizeof(expect), "%08x", crc32_file(p.bundle));
  CHECK(m["inputs"][p.bundle] == expect);
  std::snprintf(expect, sizeof(expect), "%08x", crc32_file(p.checkpoint));
  CHECK(m["artifacts"]["checkpoint.drxm"] == expect);
  CHECK(m["artifacts"].contains("history.csv"));
  CHECK(m["artifacts"].contains("profiles.json"));
}

TEST_CASE("train twice with the same seed is byte-identical") {
  const Pipeline& p = pipeline();
  REQUIRE(p.train_rc == 0);
  int rc = run({"train", "--out", at("train_again"), "--seed", "11", "--set",
                "bundle=" + p.bundle, "--set", "d=4", "--set", "embedder.b=8", "--set",
                "embedder.buckets=64", "--set", "lr=0.05", "--set", "max_epochs=2", "--set",
                "batch_size=32"});
  REQUIRE(rc == 0);
  for (const char* f : {"checkpoint.drxm", "history.csv", "profiles.json"}) {
    CAPTURE(f);
    CHECK(read_file(at("train/" + std::string(f))) ==
          read_file(at("train_again/" + std::string(f))));
  }
}

TEST_CASE("evaluate writes metric reports; missing checkpoint exits 2") {
  const Pipeline& p = pipeline();
  REQUIRE(p.train_rc == 0);
  CHECK(run({"evaluate", "--out", at("eval"), "--set", "bundle=" + p.bundle, "--set",
             "checkpoint=" + p.checkpoint}) == 0);
  std::string csv = read_file(at("eval/metrics.csv"));
  CHECK(csv.find("mae") != std::string::npos);
  json report = json::parse(read_file(at("eval/metrics.json")));
  CHECK(report["mae"].get<double>() >= 0.0);

  CHECK(run({"evaluate", "--out", at("eval_none"), "--set", "bundle=" + p.bundle}) == 2);
  CHECK(run({"evaluate", "--out", at("eval_gone"), "--set", "bundle=" + p.bundle, "--set",
             "checkpoint=" + at("nope.drxm")}) == 2);
}

TEST_CASE("explain emits records for a known user and rejects unknown ids") {
  const Pipeline& p = pipeline();
  REQUIRE(p.train_rc == 0);
  CHECK(run({"explain", "--out", at("explain"), "--set", "bundle=" + p.bundle, "--set",
             "checkpoint=" + p.checkpoint, "--set", "explain.user=u0002", "--set",
             "explain.top_n=3"}) == 0);
  json records = json::parse(read_file(at("explain/explanations.json")));
  REQUIRE(records.is_array());
  CHECK(records.size() == 3);
  CHECK(records[0]["user"] == "u0002");
  CHECK(records[0].contains("predicted_rating"));

  CHECK(run({"explain", "--out", at("explain_bad"), "--set", "bundle=" + p.bundle, "--set",
             "checkpoint=" + p.checkpoint, "--set", "explain.user=nobody"}) == 2);
}

TEST_CASE("sweep writes the table and a loadable winner config") {
  const Pipeline& p = pipeline();
  REQUIRE(p.ingest_rc == 0);
  CHECK(run({"sweep", "--out", at("sweep"), "--seed", "5", "--set", "bundle=" + p.bundle,
             "--set", "embedder.b=8", "--set", "embedder.buckets=64", "--set", "max_epochs=1",
             "--set", "batch_size=32", "--set", "sweep.lr=0.01,0.05", "--set",
             "sweep.lambda=0.001", "--set", "sweep.d=4", "--set", "sweep.runs=1"}) == 0);
  std::string csv = read_file(at("sweep/sweep.csv"));
  CHECK(csv.rfind("lr,lambda,d,score,run1\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);

  Config winner = Config::from_file(at("sweep/winner.cfg"));
  CHECK(winner.get_int("d", 0) == 4);
  CHECK(winner.get_double("lambda", 0.0) == 0.001);
  double lr = winner.get_double("lr", 0.0);
  CHECK((lr == 0.01 || lr == 0.05));
}

TEST_CASE("gradcheck verb passes and writes its report") {
  CHECK(run({"gradcheck", "--out", at("gradcheck"), "--seed", "17"}) == 0);
  std::string text = read_file(at("gradcheck/gradcheck.txt"));
  CHECK(text.find("composed_loss") != std::string::npos);
  CHECK(text.find("-> pass") != std::string::npos);
  CHECK(text.find("FAIL") == std::string::npos);
}

TEST_CASE("config file layers under --set overrides") {
  write_file(at("layered.cfg"), "synth.users = 5\nsynth.items = 9\nsynth.per_user = 4\n");
  CHECK(run({"synth", "--out", at("layered"), "--config", at("layered.cfg"), "--set",
             "synth.users=7", "--set", "synth.noise_pool=30"}) == 0);
  json manifest = json::parse(read_file(at("layered/synth_manifest.json")));
  CHECK(manifest["users"] == 7);   // --set wins
  CHECK(manifest["items"] == 9);   // file survives
  json run_m = json::parse(read_file(at("layered/run_manifest.json")));
  CHECK(run_m["config"]["synth.users"] == "7");
}

TEST_CASE("ingest on a corpus too sparse for the default filter exits 2") {
  const Pipeline& p = pipeline();
  REQUIRE(p.synth_rc == 0);
  // default min_user_ratings = 20 removes every 6-review user
  CHECK(run({"ingest", "--out", at("too_sparse"), "--set", "corpus=" + p.corpus}) == 2);
}
