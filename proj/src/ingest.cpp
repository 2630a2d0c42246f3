#include "drex/ingest.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>

#include "drex/io.hpp"

namespace drex {

ParseResult parse_corpus(const std::string& path, int rating_scale) {
  if (rating_scale < 1) throw ContractError("parse_corpus: rating scale must be >= 1");
  std::ifstream in(path);
  if (!in) throw IoError("cannot open corpus: " + path);

  ParseResult result;
  std::string line;
  std::size_t total = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ++total;
    const auto rec = nlohmann::json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (rec.is_discarded() || !rec.is_object()) {
      ++result.skipped;
      continue;
    }
    const auto user = rec.find("user_id");
    const auto item = rec.find("item_id");
    const auto rating = rec.find("rating");
    if (user == rec.end() || !user->is_string() || user->get<std::string>().empty() ||
        item == rec.end() || !item->is_string() || item->get<std::string>().empty() ||
        rating == rec.end() || !rating->is_number()) {
      ++result.skipped;
      continue;
    }
    const double r = rating->get<double>();
    if (!(r >= 1.0 && r <= static_cast<double>(rating_scale))) {
      ++result.skipped;
      continue;
    }
    RawReview out;
    out.user_key = user->get<std::string>();
    out.item_key = item->get<std::string>();
    out.rating = r;
    if (const auto text = rec.find("review_text"); text != rec.end()) {
      if (!text->is_string()) {
        ++result.skipped;
        continue;
      }
      out.review_text = text->get<std::string>();
    }
    if (const auto ts = rec.find("timestamp"); ts != rec.end()) {
      if (!ts->is_number_integer()) {
        ++result.skipped;
        continue;
      }
      out.timestamp = ts->get<std::int64_t>();
    }
    result.reviews.push_back(std::move(out));
  }
  if (in.bad()) throw IoError("read failed: " + path);
  if (total > 0 && result.reviews.empty()) {
    throw FormatError("no well-formed records in " + path + " (" +
                      std::to_string(result.skipped) + " skipped)");
  }
  return result;
}

std::vector<RawReview> dedupe_latest(std::vector<RawReview> raws) {
  std::map<std::pair<std::string, std::string>, std::size_t> slot_of;  // pair -> order position
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < raws.size(); ++i) {
    const auto key = std::make_pair(raws[i].user_key, raws[i].item_key);
    auto it = slot_of.find(key);
    if (it == slot_of.end()) {
      slot_of.emplace(key, order.size());
      order.push_back(i);
      continue;
    }
    const auto& held = raws[order[it->second]];
    const auto& cand = raws[i];
    bool replace = true;
    if (held.timestamp && cand.timestamp) {
      // strictly newer wins; equal timestamps fall back to the later record
      replace = *cand.timestamp >= *held.timestamp;
    } else if (held.timestamp && !cand.timestamp) {
      replace = false;
    }
    if (replace) order[it->second] = i;
  }
  std::vector<RawReview> out;
  out.reserve(order.size());
  for (std::size_t i : order) out.push_back(std::move(raws[i]));
  return out;
}

std::vector<RawReview> filter_density(std::vector<RawReview> raws, int min_user_ratings,
                                      int min_item_raters, bool iterate) {
  if (min_user_ratings < 1 || min_item_raters < 1) {
    throw ContractError("filter_density: thresholds must be >= 1");
  }
  while (true) {
    std::unordered_map<std::string, int> per_user;
    for (const auto& r : raws) ++per_user[r.user_key];
    std::vector<RawReview> kept_users;
    kept_users.reserve(raws.size());
    for (auto& r : raws) {
      if (per_user[r.user_key] >= min_user_ratings) kept_users.push_back(std::move(r));
    }

    std::unordered_map<std::string, int> per_item;
    for (const auto& r : kept_users) ++per_item[r.item_key];
    std::vector<RawReview> kept;
    kept.reserve(kept_users.size());
    for (auto& r : kept_users) {
      if (per_item[r.item_key] >= min_item_raters) kept.push_back(std::move(r));
    }

    const bool stable = kept.size() == raws.size();
    raws = std::move(kept);
    if (!iterate || stable) return raws;
  }
}

int IdMaps::add_user(const std::string& key) {
  auto it = user_idx.find(key);
  if (it != user_idx.end()) return it->second;
  const int idx = static_cast<int>(users.size());
  user_idx.emplace(key, idx);
  users.push_back(key);
  return idx;
}

int IdMaps::add_item(const std::string& key) {
  auto it = item_idx.find(key);
  if (it != item_idx.end()) return it->second;
  const int idx = static_cast<int>(items.size());
  item_idx.emplace(key, idx);
  items.push_back(key);
  return idx;
}

IndexedCorpus build_indexed(const std::vector<RawReview>& filtered,
                            const std::unordered_set<std::string>& stopwords) {
  IndexedCorpus out;
  out.interactions.reserve(filtered.size());
  for (const auto& r : filtered) {
    Interaction x;
    x.user_idx = out.ids.add_user(r.user_key);
    x.item_idx = out.ids.add_item(r.item_key);
    x.rating = static_cast<int>(std::floor(r.rating + 0.5));  // ties round up
    x.timestamp = r.timestamp;
    for (const auto& tok : normalize(r.review_text, stopwords)) {
      x.tokens.push_back(out.vocab.add(tok));
    }
    out.interactions.push_back(std::move(x));
  }
  return out;
}

SplitCounts largest_remainder_70_20_10(int n) {
  if (n < 0) throw ContractError("largest_remainder_70_20_10: n must be >= 0");
  // exact in tenths to avoid floating-point remainders
  const long long shares[3] = {7LL * n, 2LL * n, 1LL * n};  // out of 10n
  int counts[3];
  long long rems[3];
  int assigned = 0;
  for (int i = 0; i < 3; ++i) {
    counts[i] = static_cast<int>(shares[i] / 10);
    rems[i] = shares[i] % 10;
    assigned += counts[i];
  }
  int leftover = n - assigned;
  // ties resolve train, then test, then validation: stable max scan
  while (leftover > 0) {
    int best = 0;
    for (int i = 1; i < 3; ++i) {
      if (rems[i] > rems[best]) best = i;
    }
    ++counts[best];
    rems[best] = -1;
    --leftover;
  }
  return SplitCounts{counts[0], counts[1], counts[2]};
}

SplitBundle split_70_20_10(IndexedCorpus corpus, std::uint64_t seed, int rating_scale,
                           int* understratified) {
  SplitBundle bundle;
  bundle.ids = std::move(corpus.ids);
  bundle.vocab = std::move(corpus.vocab);
  bundle.split_seed = seed;
  bundle.rating_scale = rating_scale;

  const int m = bundle.user_count();
  std::vector<std::vector<std::size_t>> per_user(static_cast<std::size_t>(m));
  for (std::size_t i = 0; i < corpus.interactions.size(); ++i) {
    per_user[static_cast<std::size_t>(corpus.interactions[i].user_idx)].push_back(i);
  }

  Rng rng = substream(seed, "split");
  int warned = 0;
  for (int u = 0; u < m; ++u) {
    auto& idxs = per_user[static_cast<std::size_t>(u)];
    const int n = static_cast<int>(idxs.size());
    if (n < 3) {
      ++warned;
      for (std::size_t i : idxs) bundle.train.push_back(std::move(corpus.interactions[i]));
      continue;
    }
    rng.shuffle(idxs);
    const SplitCounts c = largest_remainder_70_20_10(n);
    for (int k = 0; k < n; ++k) {
      Interaction& x = corpus.interactions[idxs[static_cast<std::size_t>(k)]];
      if (k < c.train) {
        bundle.train.push_back(std::move(x));
      } else if (k < c.train + c.test) {
        bundle.test.push_back(std::move(x));
      } else {
        bundle.validation.push_back(std::move(x));
      }
    }
  }
  if (warned > 0) {
    std::cerr << "warning: " << warned
              << " user(s) had fewer than 3 interactions; assigned wholly to train\n";
  }
  if (understratified != nullptr) *understratified = warned;
  return bundle;
}

namespace {

constexpr char kBundleMagic[4] = {'D', 'R', 'X', 'B'};
constexpr std::uint16_t kBundleVersion = 1;

void write_interactions(ByteWriter& w, const std::vector<Interaction>& xs) {
  w.u64(xs.size());
  for (const auto& x : xs) {
    w.u32(static_cast<std::uint32_t>(x.user_idx));
    w.u32(static_cast<std::uint32_t>(x.item_idx));
    w.u16(static_cast<std::uint16_t>(x.rating));
    w.u8(x.timestamp ? 1 : 0);
    if (x.timestamp) w.i64(*x.timestamp);
    w.u32(static_cast<std::uint32_t>(x.tokens.size()));
    for (int t : x.tokens) w.u32(static_cast<std::uint32_t>(t));
  }
}

std::vector<Interaction> read_interactions(ByteReader& r, int m, int n, int scale,
                                           int vocab_size) {
  const std::uint64_t count = r.u64();
  std::vector<Interaction> xs;
  xs.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    Interaction x;
    x.user_idx = static_cast<int>(r.u32());
    x.item_idx = static_cast<int>(r.u32());
    x.rating = r.u16();
    if (x.user_idx >= m || x.item_idx >= n || x.rating < 1 || x.rating > scale) {
      throw FormatError("bundle interaction out of range");
    }
    if (r.u8() != 0) x.timestamp = r.i64();
    const std::uint32_t ntok = r.u32();
    x.tokens.reserve(ntok);
    for (std::uint32_t t = 0; t < ntok; ++t) {
      const int tok = static_cast<int>(r.u32());
      if (tok < 0 || tok >= vocab_size) throw FormatError("bundle token id out of range");
      x.tokens.push_back(tok);
    }
    xs.push_back(std::move(x));
  }
  return xs;
}

}  // namespace

void save_bundle(const SplitBundle& bundle, const std::string& path) {
  ByteWriter w;
  w.u64(bundle.split_seed);
  w.u16(static_cast<std::uint16_t>(bundle.rating_scale));
  w.u32(static_cast<std::uint32_t>(bundle.user_count()));
  for (const auto& u : bundle.ids.users) w.str(u);
  w.u32(static_cast<std::uint32_t>(bundle.item_count()));
  for (const auto& i : bundle.ids.items) w.str(i);
  w.u32(static_cast<std::uint32_t>(bundle.vocab.size()));
  for (int t = 0; t < bundle.vocab.size(); ++t) w.str(bundle.vocab.token(t));
  write_interactions(w, bundle.train);
  write_interactions(w, bundle.test);
  write_interactions(w, bundle.validation);
  write_framed_file(path, kBundleMagic, kBundleVersion, w.buffer());
}

SplitBundle load_bundle(const std::string& path) {
  const std::string payload = read_framed_file(path, kBundleMagic, kBundleVersion);
  ByteReader r(payload);
  SplitBundle bundle;
  bundle.split_seed = r.u64();
  bundle.rating_scale = r.u16();
  const std::uint32_t m = r.u32();
  for (std::uint32_t i = 0; i < m; ++i) bundle.ids.add_user(r.str());
  const std::uint32_t n = r.u32();
  for (std::uint32_t i = 0; i < n; ++i) bundle.ids.add_item(r.str());
  const std::uint32_t v = r.u32();
  for (std::uint32_t i = 0; i < v; ++i) bundle.vocab.add(r.str());
  bundle.vocab.freeze();
  const int vs = bundle.vocab.size();
  bundle.train = read_interactions(r, static_cast<int>(m), static_cast<int>(n),
                                   bundle.rating_scale, vs);
  bundle.test = read_interactions(r, static_cast<int>(m), static_cast<int>(n),
                                  bundle.rating_scale, vs);
  bundle.validation = read_interactions(r, static_cast<int>(m), static_cast<int>(n),
                                        bundle.rating_scale, vs);
  if (!r.done()) throw FormatError("bundle has trailing bytes: " + path);
  return bundle;
}

}  // namespace drex
