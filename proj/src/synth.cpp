#include "drex/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <json.hpp>

#include "drex/common.hpp"

namespace drex {

void SynthConfig::validate() const {
  if (users < 1 || items < 1) throw ConfigError("synth needs at least one user and item");
  if (interactions_per_user < 1) throw ConfigError("interactions_per_user must be >= 1");
  if (interactions_per_user > items) {
    throw ConfigError("interactions_per_user cannot exceed the item count");
  }
  if (latent_dim < 1) throw ConfigError("latent_dim must be >= 1");
  if (keywords_per_item < 1) throw ConfigError("keywords_per_item must be >= 1");
  if (noise_per_review < 0) throw ConfigError("noise_per_review must be >= 0");
  if (noise_per_review > noise_pool) {
    throw ConfigError("noise_per_review cannot exceed the noise pool");
  }
  if (review_dropout < 0.0 || review_dropout >= 1.0) {
    throw ConfigError("review_dropout must lie in [0, 1)");
  }
  if (rating_scale < 2) throw ConfigError("rating_scale must be >= 2");
  if (signal_gain < 0.0) throw ConfigError("signal_gain must be non-negative");
}

namespace {

// Tokens are chosen to pass normalization untouched: lowercase alphanumerics,
// no stopwords, and suffixes no lemma rule rewrites.
std::string keyword_name(int item, int k) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "kwq%03d%c", item, static_cast<char>('a' + k));
  return buf;
}

std::string noise_name(int n) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "noise%03dq", n);
  return buf;
}

}  // namespace

SynthDataset make_synth(const SynthConfig& config) {
  config.validate();
  SynthDataset data;
  data.config = config;

  // Independent substreams keep the interaction structure fixed when only
  // the dropout rate changes.
  Rng latent_rng = substream(config.seed, "synth/latents");
  Rng class_rng = substream(config.seed, "synth/classes");
  Rng pick_rng = substream(config.seed, "synth/picks");
  Rng noise_rng = substream(config.seed, "synth/noise");
  Rng drop_rng = substream(config.seed, "synth/dropout");

  std::vector<std::vector<double>> user_latent(static_cast<std::size_t>(config.users));
  for (auto& z : user_latent) {
    z.resize(static_cast<std::size_t>(config.latent_dim));
    for (auto& v : z) v = latent_rng.uniform(-1.0, 1.0);
  }
  std::vector<std::vector<double>> item_latent(static_cast<std::size_t>(config.items));
  for (auto& w : item_latent) {
    w.resize(static_cast<std::size_t>(config.latent_dim));
    for (auto& v : w) v = latent_rng.uniform(-1.0, 1.0);
  }

  data.items.reserve(static_cast<std::size_t>(config.items));
  // Quality tiers carry most of the predictable rating variance; the latent
  // dot product adds pair-level texture on top.
  const double bonuses[5] = {-1.5, -0.75, 0.0, 0.75, 1.5};
  for (int i = 0; i < config.items; ++i) {
    SynthItem item;
    char id[16];
    std::snprintf(id, sizeof id, "it%04d", i);
    item.id = id;
    for (int k = 0; k < config.keywords_per_item; ++k) {
      item.keywords.push_back(keyword_name(i, k));
    }
    item.bonus = bonuses[class_rng.below(5)];
    data.items.push_back(std::move(item));
  }

  std::vector<int> item_order(static_cast<std::size_t>(config.items));
  std::int64_t ts = 1'500'000'000;
  for (int u = 0; u < config.users; ++u) {
    char uid[16];
    std::snprintf(uid, sizeof uid, "u%04d", u);
    for (int i = 0; i < config.items; ++i) item_order[static_cast<std::size_t>(i)] = i;
    pick_rng.shuffle(item_order);
    for (int n = 0; n < config.interactions_per_user; ++n) {
      const int item = item_order[static_cast<std::size_t>(n)];
      double dot = 0.0;
      for (int k = 0; k < config.latent_dim; ++k) {
        dot += user_latent[static_cast<std::size_t>(u)][static_cast<std::size_t>(k)] *
               item_latent[static_cast<std::size_t>(item)][static_cast<std::size_t>(k)];
      }
      const double raw =
          config.base_rating + config.signal_gain * dot + data.items[item].bonus;
      const double rounded = std::floor(raw + 0.5);  // ties round up
      const double rating =
          std::clamp(rounded, 1.0, static_cast<double>(config.rating_scale));

      RawReview r;
      r.user_key = uid;
      r.item_key = data.items[static_cast<std::size_t>(item)].id;
      r.rating = rating;
      r.timestamp = ts++;
      const bool keep_review =
          config.review_dropout == 0.0 || drop_rng.uniform() >= config.review_dropout;
      if (keep_review) {
        std::vector<std::string> words = data.items[static_cast<std::size_t>(item)].keywords;
        std::vector<int> pool(static_cast<std::size_t>(config.noise_pool));
        for (int p = 0; p < config.noise_pool; ++p) pool[static_cast<std::size_t>(p)] = p;
        noise_rng.shuffle(pool);
        for (int p = 0; p < config.noise_per_review; ++p) {
          words.push_back(noise_name(pool[static_cast<std::size_t>(p)]));
        }
        noise_rng.shuffle(words);
        std::string text;
        for (std::size_t w = 0; w < words.size(); ++w) {
          if (w > 0) text += ' ';
          text += words[w];
        }
        r.review_text = std::move(text);
      }
      data.reviews.push_back(std::move(r));
    }
  }
  return data;
}

std::string synth_jsonl(const SynthDataset& data) {
  std::string out;
  for (const auto& r : data.reviews) {
    nlohmann::ordered_json rec;
    rec["user_id"] = r.user_key;
    rec["item_id"] = r.item_key;
    rec["rating"] = r.rating;
    if (!r.review_text.empty()) rec["review_text"] = r.review_text;
    if (r.timestamp) rec["timestamp"] = *r.timestamp;
    out += rec.dump();
    out += '\n';
  }
  return out;
}

std::string synth_manifest_json(const SynthDataset& data) {
  nlohmann::ordered_json doc;
  doc["users"] = data.config.users;
  doc["items"] = data.config.items;
  doc["interactions"] = data.reviews.size();
  doc["latent_dim"] = data.config.latent_dim;
  doc["rating_rule"] = "clamp(round(base + gain * dot(z_u, w_i) + bonus_i), 1, scale)";
  doc["base_rating"] = data.config.base_rating;
  doc["signal_gain"] = data.config.signal_gain;
  doc["review_dropout"] = data.config.review_dropout;
  doc["noise_pool"] = data.config.noise_pool;
  doc["seed"] = data.config.seed;
  auto items = nlohmann::ordered_json::array();
  for (const auto& item : data.items) {
    items.push_back({{"id", item.id}, {"keywords", item.keywords}, {"bonus", item.bonus}});
  }
  doc["planted"] = std::move(items);
  return doc.dump(2) + "\n";
}

}  // namespace drex
