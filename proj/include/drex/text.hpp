#pragma once

#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "drex/common.hpp"
#include "drex/linalg.hpp"

namespace drex {

// Bundled 127-word English stopword list (lowercase).
const std::vector<std::string>& default_stopwords();
std::unordered_set<std::string> stopword_set();
std::unordered_set<std::string> load_stopword_file(const std::string& path);

// One pass of the suffix rules, first match wins, repeated to a fixpoint:
// ies->y, sses->ss, trailing s (len > 3, not after ss), ing (len > 5),
// ed (len > 4). Every rule shortens the token, so iteration terminates.
std::string lemmatize(std::string token);

// lowercase -> split on non-alphanumeric runs -> stopword filter ->
// lemmatize -> stopword filter -> drop tokens shorter than 2 -> keep the
// first 512. Stopwords are filtered on both sides of lemmatization so the
// whole pipeline is idempotent.
std::vector<std::string> normalize(std::string_view text,
                                   const std::unordered_set<std::string>& stopwords);

inline constexpr int kMaxReviewTokens = 512;

// Contiguous token ids; freeze() pins the vocabulary for artifact round-trips.
class Vocab {
 public:
  int add(const std::string& token);
  int find(const std::string& token) const;  // -1 when absent
  const std::string& token(int id) const;
  int size() const { return static_cast<int>(tokens_.size()); }
  void freeze() { frozen_ = true; }
  bool frozen() const { return frozen_; }

 private:
  std::unordered_map<std::string, int> ids_;
  std::vector<std::string> tokens_;
  bool frozen_ = false;
};

enum class EmbedKind { kFileTable, kHashedTrainable };

inline constexpr int kDefaultEmbedDim = 768;
inline constexpr int kDefaultHashBuckets = 1 << 15;

// Per-token embedding source. file_table is a frozen lookup table with
// zero rows for unknown tokens. hashed_trainable maps token -> FNV-1a bucket
// in a trainable table owned by the parameter set, which the caller passes
// to embed().
class EmbeddingProvider {
 public:
  static EmbeddingProvider file_table(std::vector<std::string> tokens, Mat table);
  static EmbeddingProvider hashed(int dimension, int table_size = kDefaultHashBuckets);

  EmbedKind kind() const { return kind_; }
  int dimension() const { return dimension_; }
  // hashed bucket count; file_table vocabulary size
  int table_rows() const;

  static int hash_bucket(std::string_view token, int table_size);

  // file_table: row index or -1 for out-of-vocabulary.
  // hashed_trainable: the bucket (never negative).
  int slot(const std::string& token) const;

  // w x b matrix of token rows. hashed_trainable requires the live table
  // (table_rows() x b); file_table ignores it.
  Mat embed(const std::vector<std::string>& tokens, const Mat* hashed_table = nullptr) const;

  const Mat& table() const;                        // file_table only
  const std::vector<std::string>& tokens() const;  // file_table only

 private:
  EmbeddingProvider() = default;

  EmbedKind kind_ = EmbedKind::kHashedTrainable;
  int dimension_ = kDefaultEmbedDim;
  int table_size_ = kDefaultHashBuckets;
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> rows_;
  Mat table_;
};

EmbeddingProvider load_embedding_file(const std::string& path);
void save_embedding_file(const EmbeddingProvider& provider, const std::string& path);

}  // namespace drex
