#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "drex/common.hpp"
#include "drex/eval.hpp"
#include "drex/train.hpp"

namespace drex {

// Flat key = value store. Later assignments win, so a file layers under
// --set overrides, which layer under dedicated flags.
class Config {
 public:
  static Config from_file(const std::string& path);
  // source labels diagnostics ("--set", a file path, ...).
  static Config from_text(std::string_view text, const std::string& source);

  void set(const std::string& key, std::string value);
  // "key=value"; splits on the first '=', trims both sides.
  void apply_override(const std::string& assignment, const std::string& source);

  bool has(const std::string& key) const;

  std::string get_string(const std::string& key, const std::string& fallback) const;
  std::string require_string(const std::string& key) const;
  int get_int(const std::string& key, int fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  // accepts true/false/1/0/yes/no/on/off, case-insensitive
  bool get_bool(const std::string& key, bool fallback) const;

  // Comma-separated values; an empty list is a ConfigError.
  std::vector<double> get_double_list(const std::string& key,
                                      std::vector<double> fallback) const;
  std::vector<int> get_int_list(const std::string& key, std::vector<int> fallback) const;

  // Sorted by key; the run manifest echoes this verbatim.
  const std::map<std::string, std::string>& entries() const { return entries_; }

 private:
  std::map<std::string, std::string> entries_;
};

Variant parse_variant(const std::string& value);
StateMode parse_state_mode(const std::string& value);
ProfileWindow parse_profile_window(const std::string& value);
RankingScope parse_ranking_scope(const std::string& value);
NdcgNorm parse_ndcg_norm(const std::string& value);

const char* variant_name(Variant v);
const char* state_mode_name(StateMode m);
const char* profile_window_name(ProfileWindow w);
const char* ranking_scope_name(RankingScope s);
const char* ndcg_norm_name(NdcgNorm n);

// Keys: lr, lambda, d, batch_size, max_epochs, patience, variant, state_mode,
// seed, shuffle, threads, profile_window. Absent keys keep TrainConfig
// defaults; the result is validated before return.
TrainConfig train_config_from(const Config& cfg);

// Keys: scope, ndcg_norm, theta, threads.
EvalOptions eval_options_from(const Config& cfg);

// Keys: embedder.kind (hashed | file), embedder.b, embedder.buckets,
// embedder.path. A file embedder requires embedder.path.
EmbeddingProvider embedder_from(const Config& cfg);

}  // namespace drex
