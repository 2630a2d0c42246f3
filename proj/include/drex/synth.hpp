#pragma once

#include <string>
#include <vector>

#include "drex/ingest.hpp"

namespace drex {

// Synthetic corpus with a recoverable structure: ratings follow a low-rank
// latent score plus a per-item keyword bonus, and every review carries the
// item's planted keywords among noise words. The generator is a pure
// function of the config.
struct SynthConfig {
  int users = 200;
  int items = 300;
  int interactions_per_user = 40;  // ~users * this interactions total
  int latent_dim = 8;
  int keywords_per_item = 5;
  int noise_per_review = 5;
  int noise_pool = 500;
  double base_rating = 3.0;
  double signal_gain = 0.3;       // scales the latent dot product
  double review_dropout = 0.0;    // chance a review is omitted entirely
  int rating_scale = 5;
  std::uint64_t seed = 7;

  void validate() const;
};

struct SynthItem {
  std::string id;
  std::vector<std::string> keywords;
  double bonus = 0.0;  // the keyword class's rating shift
};

struct SynthDataset {
  SynthConfig config;
  std::vector<RawReview> reviews;  // feed straight into the ingest pipeline
  std::vector<SynthItem> items;
};

SynthDataset make_synth(const SynthConfig& config);

// One record per line, same schema parse_corpus reads.
std::string synth_jsonl(const SynthDataset& data);

// Planted-signal manifest: per-item keywords and bonus, plus the generator
// settings, for downstream recoverability checks.
std::string synth_manifest_json(const SynthDataset& data);

}  // namespace drex
