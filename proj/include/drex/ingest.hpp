#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "drex/common.hpp"
#include "drex/text.hpp"

namespace drex {

struct RawReview {
  std::string user_key;
  std::string item_key;
  double rating = 0.0;  // raw value on [1, S]
  std::string review_text;
  std::optional<std::int64_t> timestamp;
};

struct ParseResult {
  std::vector<RawReview> reviews;
  std::size_t skipped = 0;
};

// One key-value record per line: user_id, item_id, rating required;
// review_text, timestamp optional. Malformed lines (bad syntax, missing or
// empty keys, non-numeric or out-of-range rating) are counted and skipped.
// A non-empty file with zero well-formed lines is an error.
ParseResult parse_corpus(const std::string& path, int rating_scale);

// Keeps one record per (user, item) pair: the latest timestamp, falling back
// to the last occurrence. Output preserves first-appearance order of pairs.
std::vector<RawReview> dedupe_latest(std::vector<RawReview> raws);

// Drops users with fewer than min_user_ratings records, then items with
// fewer than min_item_raters records among what remains. iterate repeats the
// two passes to a fixpoint.
std::vector<RawReview> filter_density(std::vector<RawReview> raws, int min_user_ratings = 20,
                                      int min_item_raters = 5, bool iterate = false);

struct Interaction {
  int user_idx = -1;
  int item_idx = -1;
  int rating = 0;               // 1..S
  std::vector<int> tokens;      // vocab ids; empty = review modality missing
  std::optional<std::int64_t> timestamp;
};

struct IdMaps {
  std::vector<std::string> users;
  std::vector<std::string> items;
  std::unordered_map<std::string, int> user_idx;
  std::unordered_map<std::string, int> item_idx;

  int add_user(const std::string& key);
  int add_item(const std::string& key);
};

struct SplitBundle {
  std::vector<Interaction> train;
  std::vector<Interaction> test;
  std::vector<Interaction> validation;
  IdMaps ids;
  Vocab vocab;
  std::uint64_t split_seed = 0;
  int rating_scale = 5;

  int user_count() const { return static_cast<int>(ids.users.size()); }
  int item_count() const { return static_cast<int>(ids.items.size()); }
  std::size_t interaction_count() const {
    return train.size() + test.size() + validation.size();
  }
};

struct IndexedCorpus {
  std::vector<Interaction> interactions;
  IdMaps ids;
  Vocab vocab;
};

// Assigns contiguous indices in first-appearance order, normalizes review
// text, and rounds ratings to the nearest integer (ties up).
IndexedCorpus build_indexed(const std::vector<RawReview>& filtered,
                            const std::unordered_set<std::string>& stopwords);

struct SplitCounts {
  int train = 0;
  int test = 0;
  int validation = 0;
};

// Largest-remainder rounding of n into 70:20:10; remainder ties resolve
// train, then test, then validation.
SplitCounts largest_remainder_70_20_10(int n);

// Per-user stratified split. Users with fewer than 3 interactions go wholly
// to train (counted in the returned warning total via *understratified).
SplitBundle split_70_20_10(IndexedCorpus corpus, std::uint64_t seed, int rating_scale,
                           int* understratified = nullptr);

void save_bundle(const SplitBundle& bundle, const std::string& path);
SplitBundle load_bundle(const std::string& path);

}  // namespace drex
