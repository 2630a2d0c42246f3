#include "drex/text.hpp"

#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "drex/io.hpp"

namespace drex {

const std::vector<std::string>& default_stopwords() {
  static const std::vector<std::string> words = {
      "a",          "about",   "above",    "after",   "again",      "against", "all",
      "am",         "an",      "and",      "any",     "are",        "as",      "at",
      "be",         "because", "been",     "before",  "being",      "below",   "between",
      "both",       "but",     "by",       "can",     "could",      "did",     "do",
      "does",       "doing",   "down",     "during",  "each",       "few",     "for",
      "from",       "further", "had",      "has",     "have",       "having",  "he",
      "her",        "here",    "hers",     "herself", "him",        "himself", "his",
      "how",        "i",       "if",       "in",      "into",       "is",      "it",
      "its",        "itself",  "just",     "me",      "more",       "most",    "my",
      "myself",     "no",      "nor",      "not",     "now",        "of",      "off",
      "on",         "once",    "only",     "or",      "other",      "our",     "ours",
      "ourselves",  "out",     "over",     "own",     "same",       "she",     "should",
      "so",         "some",    "such",     "than",    "that",       "the",     "their",
      "theirs",     "them",    "themselves", "then",  "there",      "these",   "they",
      "this",       "those",   "through",  "to",      "too",        "under",   "until",
      "up",         "very",    "was",      "we",      "were",       "what",    "when",
      "where",      "which",   "while",    "who",     "whom",       "why",     "will",
      "with",       "would",   "yet",      "you",     "your",       "yours",   "yourself",
      "yourselves",
  };
  return words;
}

std::unordered_set<std::string> stopword_set() {
  const auto& w = default_stopwords();
  return std::unordered_set<std::string>(w.begin(), w.end());
}

std::unordered_set<std::string> load_stopword_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open stopword file: " + path);
  std::unordered_set<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t')) {
      line.pop_back();
    }
    std::size_t start = 0;
    while (start < line.size() && (line[start] == ' ' || line[start] == '\t')) ++start;
    if (start < line.size()) out.insert(line.substr(start));
  }
  return out;
}

namespace {

bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

// One rule application; returns false when nothing matched.
bool lemma_step(std::string& t) {
  if (ends_with(t, "ies")) {
    t.replace(t.size() - 3, 3, "y");
    return true;
  }
  if (ends_with(t, "sses")) {
    t.erase(t.size() - 2);  // sses -> ss
    return true;
  }
  if (t.size() > 3 && t.back() == 's' && !ends_with(t, "ss")) {
    t.pop_back();
    return true;
  }
  if (t.size() > 5 && ends_with(t, "ing")) {
    t.erase(t.size() - 3);
    return true;
  }
  if (t.size() > 4 && ends_with(t, "ed")) {
    t.erase(t.size() - 2);
    return true;
  }
  return false;
}

}  // namespace

std::string lemmatize(std::string token) {
  while (lemma_step(token)) {
  }
  return token;
}

std::vector<std::string> normalize(std::string_view text,
                                   const std::unordered_set<std::string>& stopwords) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (cur.empty()) return;
    std::string tok;
    tok.swap(cur);
    if (static_cast<int>(out.size()) >= kMaxReviewTokens) return;
    if (stopwords.count(tok) != 0) return;
    tok = lemmatize(std::move(tok));
    if (tok.size() < 2) return;
    if (stopwords.count(tok) != 0) return;
    out.push_back(std::move(tok));
  };
  for (char c : text) {
    const auto uc = static_cast<unsigned char>(c);
    if (std::isalnum(uc)) {
      cur.push_back(static_cast<char>(std::tolower(uc)));
    } else {
      flush();
    }
  }
  flush();
  return out;
}

int Vocab::add(const std::string& token) {
  auto it = ids_.find(token);
  if (it != ids_.end()) return it->second;
  if (frozen_) throw ContractError("Vocab: cannot add '" + token + "' to a frozen vocabulary");
  const int id = static_cast<int>(tokens_.size());
  ids_.emplace(token, id);
  tokens_.push_back(token);
  return id;
}

int Vocab::find(const std::string& token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? -1 : it->second;
}

const std::string& Vocab::token(int id) const {
  if (id < 0 || id >= size()) {
    throw ContractError("Vocab: id " + std::to_string(id) + " out of range [0, " +
                        std::to_string(size()) + ")");
  }
  return tokens_[static_cast<std::size_t>(id)];
}

EmbeddingProvider EmbeddingProvider::file_table(std::vector<std::string> tokens, Mat table) {
  if (static_cast<Eigen::Index>(tokens.size()) != table.rows()) {
    throw ContractError("EmbeddingProvider: " + std::to_string(tokens.size()) +
                        " tokens but table has " + std::to_string(table.rows()) + " rows");
  }
  if (table.cols() <= 0) throw ContractError("EmbeddingProvider: dimension must be positive");
  EmbeddingProvider p;
  p.kind_ = EmbedKind::kFileTable;
  p.dimension_ = static_cast<int>(table.cols());
  p.table_size_ = static_cast<int>(table.rows());
  p.table_ = std::move(table);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (!p.rows_.emplace(tokens[i], static_cast<int>(i)).second) {
      throw ContractError("EmbeddingProvider: duplicate token '" + tokens[i] + "'");
    }
  }
  p.tokens_ = std::move(tokens);
  return p;
}

EmbeddingProvider EmbeddingProvider::hashed(int dimension, int table_size) {
  if (dimension <= 0 || table_size <= 0) {
    throw ContractError("EmbeddingProvider: dimension and table_size must be positive");
  }
  EmbeddingProvider p;
  p.kind_ = EmbedKind::kHashedTrainable;
  p.dimension_ = dimension;
  p.table_size_ = table_size;
  return p;
}

int EmbeddingProvider::table_rows() const { return table_size_; }

int EmbeddingProvider::hash_bucket(std::string_view token, int table_size) {
  return static_cast<int>(fnv1a64(token) % static_cast<std::uint64_t>(table_size));
}

int EmbeddingProvider::slot(const std::string& token) const {
  if (kind_ == EmbedKind::kHashedTrainable) return hash_bucket(token, table_size_);
  auto it = rows_.find(token);
  return it == rows_.end() ? -1 : it->second;
}

Mat EmbeddingProvider::embed(const std::vector<std::string>& tokens,
                             const Mat* hashed_table) const {
  Mat out = Mat::Zero(static_cast<Eigen::Index>(tokens.size()), dimension_);
  if (kind_ == EmbedKind::kHashedTrainable) {
    if (hashed_table == nullptr) {
      throw ContractError("embed: hashed provider requires the live table");
    }
    if (hashed_table->rows() != table_size_ || hashed_table->cols() != dimension_) {
      throw DimensionError("embed: hashed table is " + shape_str(*hashed_table) + ", expected " +
                           std::to_string(table_size_) + "x" + std::to_string(dimension_));
    }
    for (std::size_t j = 0; j < tokens.size(); ++j) {
      out.row(static_cast<Eigen::Index>(j)) = hashed_table->row(slot(tokens[j]));
    }
    return out;
  }
  for (std::size_t j = 0; j < tokens.size(); ++j) {
    const int row = slot(tokens[j]);
    if (row >= 0) out.row(static_cast<Eigen::Index>(j)) = table_.row(row);
  }
  return out;
}

const Mat& EmbeddingProvider::table() const {
  if (kind_ != EmbedKind::kFileTable) {
    throw ContractError("EmbeddingProvider::table: not a file table");
  }
  return table_;
}

const std::vector<std::string>& EmbeddingProvider::tokens() const {
  if (kind_ != EmbedKind::kFileTable) {
    throw ContractError("EmbeddingProvider::tokens: not a file table");
  }
  return tokens_;
}

EmbeddingProvider load_embedding_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open embedding file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw FormatError("embedding file is empty: " + path);
  std::istringstream header(line);
  long long count = -1, dim = -1;
  if (!(header >> count >> dim) || count < 0 || dim <= 0) {
    throw FormatError("bad embedding header '" + line + "' in " + path);
  }

  std::vector<std::string> order;
  std::unordered_map<std::string, int> row_of;
  Mat table(count, dim);
  long long rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (rows >= count) {
      throw FormatError("embedding file declares " + std::to_string(count) +
                        " tokens but has extra rows: " + path);
    }
    std::istringstream ls(line);
    std::string token;
    if (!(ls >> token)) throw FormatError("embedding row without a token in " + path);
    Vec v(dim);
    for (long long j = 0; j < dim; ++j) {
      std::string field;
      if (!(ls >> field)) {
        throw FormatError("token '" + token + "' has fewer than " + std::to_string(dim) +
                          " components in " + path);
      }
      double value = 0.0;
      const auto* begin = field.data();
      const auto* end = field.data() + field.size();
      auto [ptr, ec] = std::from_chars(begin, end, value);
      if (ec != std::errc() || ptr != end) {
        throw FormatError("non-numeric component '" + field + "' for token '" + token + "' in " +
                          path);
      }
      v(j) = value;
    }
    std::string extra;
    if (ls >> extra) {
      throw FormatError("token '" + token + "' has more than " + std::to_string(dim) +
                        " components in " + path);
    }
    auto it = row_of.find(token);
    if (it != row_of.end()) {
      std::cerr << "warning: duplicate embedding for '" << token << "', keeping the later row\n";
      table.row(it->second) = v.transpose();
    } else {
      const int r = static_cast<int>(order.size());
      row_of.emplace(token, r);
      order.push_back(token);
      table.row(r) = v.transpose();
    }
    ++rows;
  }
  if (rows != count) {
    throw FormatError("embedding file declares " + std::to_string(count) + " tokens but has " +
                      std::to_string(rows) + ": " + path);
  }
  const auto unique_rows = static_cast<Eigen::Index>(order.size());
  return EmbeddingProvider::file_table(std::move(order), table.topRows(unique_rows));
}

void save_embedding_file(const EmbeddingProvider& provider, const std::string& path) {
  if (provider.kind() != EmbedKind::kFileTable) {
    throw ContractError("save_embedding_file: only file tables are saved");
  }
  std::ostringstream out;
  const auto& tokens = provider.tokens();
  const Mat& table = provider.table();
  out << tokens.size() << ' ' << provider.dimension() << '\n';
  char buf[64];
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    out << tokens[i];
    for (Eigen::Index j = 0; j < table.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", table(static_cast<Eigen::Index>(i), j));
      out << ' ' << buf;
    }
    out << '\n';
  }
  write_file(path, out.str());
}

}  // namespace drex
