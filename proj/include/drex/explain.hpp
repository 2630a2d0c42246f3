#pragma once

#include <map>
#include <string>
#include <vector>

#include "drex/ingest.hpp"
#include "drex/linalg.hpp"

namespace drex {

struct ScoredWord {
  std::string word;
  double score = 0.0;
};

struct Explanation {
  int user = -1;
  int item = -1;
  std::vector<ScoredWord> shared;  // combined score descending, then word ascending
  double predicted_rating = 0.0;
};

// Per-entity keyword scores accumulated from attention weights. One store
// covers every user and item of a corpus; accumulation is single-writer,
// reads afterwards are safe to share.
class ProfileStore {
 public:
  ProfileStore(int user_count, int item_count);

  // Adds each token's attention weight to that word's score in both the
  // user's and the item's profile. Empty reviews are a no-op; otherwise the
  // weights must sum to 1 within 1e-9.
  void accumulate(int user, int item, const std::vector<std::string>& tokens,
                  const Vec& attention);

  void clear();

  int user_count() const { return static_cast<int>(users_.size()); }
  int item_count() const { return static_cast<int>(items_.size()); }
  const std::map<std::string, double>& user_scores(int user) const;
  const std::map<std::string, double>& item_scores(int item) const;

 private:
  std::vector<std::map<std::string, double>> users_;
  std::vector<std::map<std::string, double>> items_;
};

// The k highest-scoring words, score descending, ties by word ascending.
// Idempotent: truncating a truncated list again changes nothing.
std::vector<ScoredWord> top_k_profile(const std::map<std::string, double>& scores,
                                      int k = 10);

// Overlap of the two truncated profiles, ordered by summed score. The
// keyword set is symmetric in its arguments; an empty overlap still yields
// an Explanation (callers flag it keyword-free downstream).
Explanation build_explanation(int user, int item,
                              const std::vector<ScoredWord>& user_top,
                              const std::vector<ScoredWord>& item_top,
                              double predicted_rating);

// Structured export of every profile: entity kind, external id, and the
// truncated (word, score) list. Deterministic bytes for fixed inputs.
std::string profiles_json(const ProfileStore& store, const IdMaps& ids, int k = 10);

std::string explanation_json(const Explanation& e, const IdMaps& ids);

}  // namespace drex
