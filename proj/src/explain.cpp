#include "drex/explain.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "drex/common.hpp"

namespace drex {

ProfileStore::ProfileStore(int user_count, int item_count) {
  if (user_count < 0 || item_count < 0) {
    throw ContractError("profile store sized with negative entity count");
  }
  users_.resize(static_cast<std::size_t>(user_count));
  items_.resize(static_cast<std::size_t>(item_count));
}

void ProfileStore::accumulate(int user, int item,
                              const std::vector<std::string>& tokens,
                              const Vec& attention) {
  if (user < 0 || user >= user_count() || item < 0 || item >= item_count()) {
    throw ContractError("profile accumulate: entity index out of range");
  }
  if (static_cast<Eigen::Index>(tokens.size()) != attention.size()) {
    throw ContractError("profile accumulate: " + std::to_string(tokens.size()) +
                        " tokens vs " + std::to_string(attention.size()) +
                        " attention weights");
  }
  if (tokens.empty()) return;
  if (std::abs(attention.sum() - 1.0) > 1e-9) {
    throw ContractError("attention weights must sum to 1");
  }
  auto& u = users_[static_cast<std::size_t>(user)];
  auto& i = items_[static_cast<std::size_t>(item)];
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    const double w = attention(static_cast<Eigen::Index>(t));
    u[tokens[t]] += w;
    i[tokens[t]] += w;
  }
}

void ProfileStore::clear() {
  for (auto& m : users_) m.clear();
  for (auto& m : items_) m.clear();
}

const std::map<std::string, double>& ProfileStore::user_scores(int user) const {
  if (user < 0 || user >= user_count()) throw ContractError("user index out of range");
  return users_[static_cast<std::size_t>(user)];
}

const std::map<std::string, double>& ProfileStore::item_scores(int item) const {
  if (item < 0 || item >= item_count()) throw ContractError("item index out of range");
  return items_[static_cast<std::size_t>(item)];
}

std::vector<ScoredWord> top_k_profile(const std::map<std::string, double>& scores,
                                      int k) {
  if (k < 1) throw ContractError("top_k_profile needs k >= 1");
  std::vector<ScoredWord> all;
  all.reserve(scores.size());
  for (const auto& [word, score] : scores) all.push_back({word, score});
  // map iteration is already word-ascending, so a stable sort on score alone
  // leaves ties lexicographic
  std::stable_sort(all.begin(), all.end(),
                   [](const ScoredWord& a, const ScoredWord& b) { return a.score > b.score; });
  if (static_cast<int>(all.size()) > k) all.resize(static_cast<std::size_t>(k));
  return all;
}

Explanation build_explanation(int user, int item,
                              const std::vector<ScoredWord>& user_top,
                              const std::vector<ScoredWord>& item_top,
                              double predicted_rating) {
  Explanation e;
  e.user = user;
  e.item = item;
  e.predicted_rating = predicted_rating;
  std::map<std::string, double> item_score;
  for (const auto& w : item_top) item_score[w.word] = w.score;
  for (const auto& w : user_top) {
    auto it = item_score.find(w.word);
    if (it != item_score.end()) e.shared.push_back({w.word, w.score + it->second});
  }
  std::stable_sort(e.shared.begin(), e.shared.end(), [](const ScoredWord& a, const ScoredWord& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.word < b.word;
  });
  return e;
}

namespace {

nlohmann::ordered_json words_json(const std::vector<ScoredWord>& words) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& w : words) {
    arr.push_back({{"word", w.word}, {"score", w.score}});
  }
  return arr;
}

}  // namespace

std::string profiles_json(const ProfileStore& store, const IdMaps& ids, int k) {
  if (store.user_count() != static_cast<int>(ids.users.size()) ||
      store.item_count() != static_cast<int>(ids.items.size())) {
    throw ContractError("profile store and id maps disagree on entity counts");
  }
  nlohmann::ordered_json doc;
  doc["k"] = k;
  auto users = nlohmann::ordered_json::array();
  for (int u = 0; u < store.user_count(); ++u) {
    users.push_back({{"kind", "user"},
                     {"id", ids.users[static_cast<std::size_t>(u)]},
                     {"keywords", words_json(top_k_profile(store.user_scores(u), k))}});
  }
  doc["users"] = std::move(users);
  auto items = nlohmann::ordered_json::array();
  for (int i = 0; i < store.item_count(); ++i) {
    items.push_back({{"kind", "item"},
                     {"id", ids.items[static_cast<std::size_t>(i)]},
                     {"keywords", words_json(top_k_profile(store.item_scores(i), k))}});
  }
  doc["items"] = std::move(items);
  return doc.dump(2) + "\n";
}

std::string explanation_json(const Explanation& e, const IdMaps& ids) {
  nlohmann::ordered_json doc;
  doc["user"] = ids.users.at(static_cast<std::size_t>(e.user));
  doc["item"] = ids.items.at(static_cast<std::size_t>(e.item));
  doc["predicted_rating"] = e.predicted_rating;
  doc["keyword_free"] = e.shared.empty();
  doc["keywords"] = words_json(e.shared);
  return doc.dump(2) + "\n";
}

}  // namespace drex
