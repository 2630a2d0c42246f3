#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <set>

#include "drex/ingest.hpp"
#include "drex/io.hpp"

using namespace drex;

namespace {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("drex_ingest_test_" + std::to_string(::getpid()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string file(const char* name) const { return (path / name).string(); }
};

RawReview rr(const std::string& u, const std::string& i, double r,
             std::optional<std::int64_t> ts = std::nullopt, const std::string& text = "") {
  RawReview out;
  out.user_key = u;
  out.item_key = i;
  out.rating = r;
  out.review_text = text;
  out.timestamp = ts;
  return out;
}

}  // namespace

TEST_CASE("parse_corpus: happy path, skips, and errors") {
  TempDir tmp;

  SUBCASE("empty file parses to an empty list") {
    write_file(tmp.file("empty.jsonl"), "");
    const auto r = parse_corpus(tmp.file("empty.jsonl"), 5);
    CHECK(r.reviews.empty());
    CHECK(r.skipped == 0);
  }

  SUBCASE("malformed lines are counted, not fatal") {
    write_file(tmp.file("mixed.jsonl"),
               R"({"user_id":"u1","item_id":"i1","rating":5,"review_text":"fine game","timestamp":100})"
               "\n"
               R"({"user_id":"u2","item_id":"i1","rating":3})"
               "\n"
               R"({"user_id":"u3","item_id":"i2"})"
               "\n"
               R"({"user_id":"u4","item_id":"i2","rating":4.5})"
               "\n");
    const auto r = parse_corpus(tmp.file("mixed.jsonl"), 5);
    CHECK(r.reviews.size() == 3);
    CHECK(r.skipped == 1);
    CHECK(r.reviews[0].review_text == "fine game");
    CHECK(r.reviews[0].timestamp == 100);
    CHECK_FALSE(r.reviews[1].timestamp.has_value());
    CHECK(r.reviews[2].rating == 4.5);
  }

  SUBCASE("out-of-range ratings are skipped") {
    write_file(tmp.file("range.jsonl"),
               R"({"user_id":"u1","item_id":"i1","rating":6})"
               "\n"
               R"({"user_id":"u1","item_id":"i2","rating":0.5})"
               "\n"
               R"({"user_id":"u1","item_id":"i3","rating":5})"
               "\n");
    const auto r = parse_corpus(tmp.file("range.jsonl"), 5);
    CHECK(r.reviews.size() == 1);
    CHECK(r.skipped == 2);
  }

  SUBCASE("zero well-formed lines in a non-empty file") {
    write_file(tmp.file("junk.jsonl"), "not a record\n{\"user_id\":\"u\"}\n");
    CHECK_THROWS_AS(parse_corpus(tmp.file("junk.jsonl"), 5), FormatError);
  }

  SUBCASE("missing file") {
    CHECK_THROWS_AS(parse_corpus(tmp.file("absent.jsonl"), 5), IoError);
  }
}

TEST_CASE("dedupe keeps the latest by timestamp, else the last occurrence") {
  std::vector<RawReview> raws = {
      rr("u1", "i1", 3, 100), rr("u1", "i1", 5, 50),   // older: first stays
      rr("u2", "i1", 2, 10),  rr("u2", "i1", 4, 20),   // newer: second wins
      rr("u3", "i1", 1),      rr("u3", "i1", 5),       // no timestamps: last wins
      rr("u4", "i1", 2, 30),  rr("u4", "i1", 3, 30),   // equal: later record wins
  };
  const auto out = dedupe_latest(raws);
  REQUIRE(out.size() == 4);
  CHECK(out[0].rating == 3);
  CHECK(out[1].rating == 4);
  CHECK(out[2].rating == 5);
  CHECK(out[3].rating == 3);
}

TEST_CASE("filter_density: users pass then items pass") {
  std::vector<RawReview> raws;
  // user A: 19 records and the only rater of item X (5 times)
  for (int k = 0; k < 14; ++k) raws.push_back(rr("A", "common" + std::to_string(k), 4));
  for (int k = 0; k < 5; ++k) raws.push_back(rr("A", "X", 4));
  // users B..F: 20 records each over shared items, giving every common item 5 raters
  for (char u = 'B'; u <= 'F'; ++u) {
    for (int k = 0; k < 20; ++k) {
      raws.push_back(rr(std::string(1, u), "common" + std::to_string(k), 3));
    }
  }
  const auto out = filter_density(raws, 20, 5);
  std::set<std::string> users, items;
  for (const auto& r : out) {
    users.insert(r.user_key);
    items.insert(r.item_key);
  }
  CHECK(users.count("A") == 0);      // 19 < 20, dropped in pass 1
  CHECK(items.count("X") == 0);      // its only raters left with A
  CHECK(users.size() == 5);
  // items common14..19 now have only 5 raters (B..F) -> kept; all kept items have >= 5
  std::unordered_map<std::string, int> raters;
  for (const auto& r : out) ++raters[r.item_key];
  for (const auto& [item, n] : raters) CHECK(n >= 5);
}

TEST_CASE("filter_density: single pass versus fixpoint") {
  // chain where dropping an item pushes a user below threshold
  std::vector<RawReview> raws;
  for (int k = 0; k < 3; ++k) raws.push_back(rr("u1", "rare", 4));
  for (int k = 0; k < 2; ++k) raws.push_back(rr("u1", "solid" + std::to_string(k), 4));
  for (int u = 0; u < 4; ++u) {
    for (int k = 0; k < 5; ++k) {
      raws.push_back(rr("v" + std::to_string(u), "solid" + std::to_string(k % 2), 4));
    }
  }
  // thresholds chosen so pass 2 (items) drops "rare", leaving u1 with 2 < 5
  const auto once = filter_density(raws, 5, 5, false);
  std::set<std::string> users_once;
  for (const auto& r : once) users_once.insert(r.user_key);
  CHECK(users_once.count("u1") == 1);  // single pass does not revisit users

  const auto fix = filter_density(raws, 5, 5, true);
  std::set<std::string> users_fix;
  for (const auto& r : fix) users_fix.insert(r.user_key);
  CHECK(users_fix.count("u1") == 0);   // fixpoint drops u1 after its item vanishes

  CHECK_THROWS_AS(filter_density({}, 0, 5), ContractError);
}

TEST_CASE("largest remainder split counts") {
  auto c10 = largest_remainder_70_20_10(10);
  CHECK(c10.train == 7);
  CHECK(c10.test == 2);
  CHECK(c10.validation == 1);

  auto c13 = largest_remainder_70_20_10(13);
  CHECK(c13.train == 9);
  CHECK(c13.test == 3);
  CHECK(c13.validation == 1);

  for (int n = 3; n < 200; ++n) {
    const auto c = largest_remainder_70_20_10(n);
    CHECK(c.train + c.test + c.validation == n);
    CHECK(c.train >= 1);
  }
}

TEST_CASE("split is per-user, exhaustive, disjoint, and deterministic") {
  std::vector<RawReview> raws;
  for (int u = 0; u < 6; ++u) {
    const int n = 10 + u * 3;  // 10, 13, 16, 19, 22, 25
    for (int k = 0; k < n; ++k) {
      raws.push_back(rr("user" + std::to_string(u), "item" + std::to_string(u * 100 + k), 4,
                        k, "great game " + std::to_string(k)));
    }
  }
  const auto stop = stopword_set();
  auto corpus = build_indexed(raws, stop);
  const std::size_t total = corpus.interactions.size();

  int warned = -1;
  auto b1 = split_70_20_10(std::move(corpus), 42, 5, &warned);
  CHECK(warned == 0);
  CHECK(b1.interaction_count() == total);

  // per-user proportions
  std::vector<SplitCounts> per_user(static_cast<std::size_t>(b1.user_count()));
  for (const auto& x : b1.train) ++per_user[static_cast<std::size_t>(x.user_idx)].train;
  for (const auto& x : b1.test) ++per_user[static_cast<std::size_t>(x.user_idx)].test;
  for (const auto& x : b1.validation) ++per_user[static_cast<std::size_t>(x.user_idx)].validation;
  for (int u = 0; u < b1.user_count(); ++u) {
    const auto& c = per_user[static_cast<std::size_t>(u)];
    const auto want = largest_remainder_70_20_10(c.train + c.test + c.validation);
    CHECK(c.train == want.train);
    CHECK(c.test == want.test);
    CHECK(c.validation == want.validation);
  }

  // disjoint: every (user, item) pair appears exactly once across splits
  std::set<std::pair<int, int>> seen;
  auto scan = [&](const std::vector<Interaction>& xs) {
    for (const auto& x : xs) {
      CHECK(seen.emplace(x.user_idx, x.item_idx).second);
    }
  };
  scan(b1.train);
  scan(b1.test);
  scan(b1.validation);
  CHECK(seen.size() == total);

  // determinism: same seed -> same assignment; different seed -> different
  auto again = split_70_20_10(build_indexed(raws, stop), 42, 5);
  CHECK(again.train.size() == b1.train.size());
  bool same = true;
  for (std::size_t i = 0; i < b1.train.size(); ++i) {
    same &= b1.train[i].user_idx == again.train[i].user_idx &&
            b1.train[i].item_idx == again.train[i].item_idx;
  }
  CHECK(same);

  auto other = split_70_20_10(build_indexed(raws, stop), 43, 5);
  bool identical = other.train.size() == b1.train.size();
  if (identical) {
    for (std::size_t i = 0; i < b1.train.size(); ++i) {
      identical &= b1.train[i].item_idx == other.train[i].item_idx;
    }
  }
  CHECK_FALSE(identical);
}

TEST_CASE("users with fewer than 3 interactions go wholly to train") {
  std::vector<RawReview> raws = {rr("tiny", "i1", 4), rr("tiny", "i2", 5),
                                 rr("big", "i1", 3), rr("big", "i2", 3), rr("big", "i3", 3),
                                 rr("big", "i4", 3), rr("big", "i5", 3)};
  int warned = 0;
  auto b = split_70_20_10(build_indexed(raws, stopword_set()), 7, 5, &warned);
  CHECK(warned == 1);
  int tiny_train = 0, tiny_elsewhere = 0;
  const int tiny = b.ids.user_idx.at("tiny");
  for (const auto& x : b.train) tiny_train += x.user_idx == tiny;
  for (const auto& x : b.test) tiny_elsewhere += x.user_idx == tiny;
  for (const auto& x : b.validation) tiny_elsewhere += x.user_idx == tiny;
  CHECK(tiny_train == 2);
  CHECK(tiny_elsewhere == 0);
}

TEST_CASE("ratings round to nearest with ties up") {
  std::vector<RawReview> raws = {rr("u", "a", 4.5), rr("u", "b", 4.4), rr("u", "c", 1.0),
                                 rr("u", "d", 2.5)};
  const auto corpus = build_indexed(raws, stopword_set());
  CHECK(corpus.interactions[0].rating == 5);
  CHECK(corpus.interactions[1].rating == 4);
  CHECK(corpus.interactions[2].rating == 1);
  CHECK(corpus.interactions[3].rating == 3);
}

TEST_CASE("bundle round-trip and corruption handling") {
  TempDir tmp;
  std::vector<RawReview> raws;
  for (int u = 0; u < 3; ++u) {
    for (int k = 0; k < 5; ++k) {
      raws.push_back(rr("u" + std::to_string(u), "i" + std::to_string(k), 1 + (u + k) % 5,
                        u * 10 + k, k % 2 == 0 ? "great story lines" : ""));
    }
  }
  auto bundle = split_70_20_10(build_indexed(raws, stopword_set()), 99, 5);
  save_bundle(bundle, tmp.file("b.drxb"));
  const auto loaded = load_bundle(tmp.file("b.drxb"));

  CHECK(loaded.split_seed == bundle.split_seed);
  CHECK(loaded.rating_scale == bundle.rating_scale);
  CHECK(loaded.user_count() == bundle.user_count());
  CHECK(loaded.item_count() == bundle.item_count());
  CHECK(loaded.vocab.size() == bundle.vocab.size());
  CHECK(loaded.vocab.frozen());
  REQUIRE(loaded.train.size() == bundle.train.size());
  REQUIRE(loaded.test.size() == bundle.test.size());
  REQUIRE(loaded.validation.size() == bundle.validation.size());
  for (std::size_t i = 0; i < bundle.train.size(); ++i) {
    CHECK(loaded.train[i].user_idx == bundle.train[i].user_idx);
    CHECK(loaded.train[i].item_idx == bundle.train[i].item_idx);
    CHECK(loaded.train[i].rating == bundle.train[i].rating);
    CHECK(loaded.train[i].tokens == bundle.train[i].tokens);
    CHECK(loaded.train[i].timestamp == bundle.train[i].timestamp);
  }

  // wrong magic
  std::string buf = read_file(tmp.file("b.drxb"));
  std::string bad = buf;
  bad[0] = 'Z';
  write_file(tmp.file("magic.drxb"), bad);
  CHECK_THROWS_AS(load_bundle(tmp.file("magic.drxb")), FormatError);

  // truncation
  write_file(tmp.file("cut.drxb"), std::string_view(buf).substr(0, buf.size() / 2));
  CHECK_THROWS_AS(load_bundle(tmp.file("cut.drxb")), ChecksumError);
}
