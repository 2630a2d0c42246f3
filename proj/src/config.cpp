#include "drex/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>

#include "drex/io.hpp"
#include "drex/text.hpp"

namespace drex {
namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value,
                            const std::string& expected) {
  throw ConfigError("config key '" + key + "': cannot parse '" + value + "' as " + expected);
}

}  // namespace

Config Config::from_file(const std::string& path) {
  return from_text(read_file(path), path);
}

Config Config::from_text(std::string_view text, const std::string& source) {
  Config cfg;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? nl : nl - pos);
    ++line_no;
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;

    std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    std::size_t eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(source + ":" + std::to_string(line_no) + ": expected key = value, got '" +
                        stripped + "'");
    }
    std::string key = trim(std::string_view(stripped).substr(0, eq));
    std::string value = trim(std::string_view(stripped).substr(eq + 1));
    if (key.empty()) {
      throw ConfigError(source + ":" + std::to_string(line_no) + ": empty key");
    }
    cfg.set(key, std::move(value));
  }
  return cfg;
}

void Config::set(const std::string& key, std::string value) {
  entries_[key] = std::move(value);
}

void Config::apply_override(const std::string& assignment, const std::string& source) {
  std::size_t eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw ConfigError(source + ": expected key=value, got '" + assignment + "'");
  }
  std::string key = trim(std::string_view(assignment).substr(0, eq));
  if (key.empty()) {
    throw ConfigError(source + ": empty key in '" + assignment + "'");
  }
  set(key, trim(std::string_view(assignment).substr(eq + 1)));
}

bool Config::has(const std::string& key) const { return entries_.count(key) != 0; }

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
  auto it = entries_.find(key);
  return it == entries_.end() ? fallback : it->second;
}

std::string Config::require_string(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end() || it->second.empty()) {
    throw ConfigError("config key '" + key + "' is required");
  }
  return it->second;
}

int Config::get_int(const std::string& key, int fallback) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  const std::string& v = it->second;
  int out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) bad_value(key, v, "an integer");
  return out;
}

std::uint64_t Config::get_u64(const std::string& key, std::uint64_t fallback) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  const std::string& v = it->second;
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    bad_value(key, v, "an unsigned integer");
  }
  return out;
}

double Config::get_double(const std::string& key, double fallback) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  const std::string& v = it->second;
  try {
    std::size_t consumed = 0;
    double out = std::stod(v, &consumed);
    if (consumed != v.size()) bad_value(key, v, "a number");
    return out;
  } catch (const std::logic_error&) {
    bad_value(key, v, "a number");
  }
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  std::string v = lower(it->second);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  bad_value(key, it->second, "a boolean (true/false/1/0/yes/no/on/off)");
}

namespace {

std::vector<std::string> split_commas(const std::string& raw) {
  std::vector<std::string> pieces;
  std::size_t pos = 0;
  while (pos <= raw.size()) {
    std::size_t comma = raw.find(',', pos);
    std::size_t end = comma == std::string::npos ? raw.size() : comma;
    pieces.push_back(trim(std::string_view(raw).substr(pos, end - pos)));
    pos = end + 1;
  }
  return pieces;
}

}  // namespace

std::vector<double> Config::get_double_list(const std::string& key,
                                            std::vector<double> fallback) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  std::vector<double> out;
  for (const std::string& piece : split_commas(it->second)) {
    if (piece.empty()) bad_value(key, it->second, "a comma-separated number list");
    try {
      std::size_t consumed = 0;
      out.push_back(std::stod(piece, &consumed));
      if (consumed != piece.size()) bad_value(key, it->second, "a comma-separated number list");
    } catch (const std::logic_error&) {
      bad_value(key, it->second, "a comma-separated number list");
    }
  }
  return out;
}

std::vector<int> Config::get_int_list(const std::string& key, std::vector<int> fallback) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  std::vector<int> out;
  for (const std::string& piece : split_commas(it->second)) {
    int v = 0;
    auto [ptr, ec] = std::from_chars(piece.data(), piece.data() + piece.size(), v);
    if (piece.empty() || ec != std::errc() || ptr != piece.data() + piece.size()) {
      bad_value(key, it->second, "a comma-separated integer list");
    }
    out.push_back(v);
  }
  return out;
}

Variant parse_variant(const std::string& value) {
  if (value == "drex") return Variant::kDrex;
  if (value == "drex_mlp") return Variant::kDrexMlp;
  throw ConfigError("variant must be drex or drex_mlp, got '" + value + "'");
}

StateMode parse_state_mode(const std::string& value) {
  if (value == "state") return StateMode::kState;
  if (value == "leaf") return StateMode::kLeaf;
  throw ConfigError("state_mode must be state or leaf, got '" + value + "'");
}

ProfileWindow parse_profile_window(const std::string& value) {
  if (value == "final_epoch") return ProfileWindow::kFinalEpoch;
  if (value == "final_batch") return ProfileWindow::kFinalBatch;
  throw ConfigError("profile_window must be final_epoch or final_batch, got '" + value + "'");
}

RankingScope parse_ranking_scope(const std::string& value) {
  if (value == "test_items") return RankingScope::kTestItems;
  if (value == "full_catalog") return RankingScope::kFullCatalog;
  throw ConfigError("scope must be test_items or full_catalog, got '" + value + "'");
}

NdcgNorm parse_ndcg_norm(const std::string& value) {
  if (value == "capped") return NdcgNorm::kCapped;
  if (value == "full_relevant") return NdcgNorm::kFullRelevant;
  throw ConfigError("ndcg_norm must be capped or full_relevant, got '" + value + "'");
}

const char* variant_name(Variant v) { return v == Variant::kDrex ? "drex" : "drex_mlp"; }

const char* state_mode_name(StateMode m) { return m == StateMode::kState ? "state" : "leaf"; }

const char* profile_window_name(ProfileWindow w) {
  return w == ProfileWindow::kFinalEpoch ? "final_epoch" : "final_batch";
}

const char* ranking_scope_name(RankingScope s) {
  return s == RankingScope::kTestItems ? "test_items" : "full_catalog";
}

const char* ndcg_norm_name(NdcgNorm n) {
  return n == NdcgNorm::kCapped ? "capped" : "full_relevant";
}

TrainConfig train_config_from(const Config& cfg) {
  TrainConfig tc;
  tc.lr = cfg.get_double("lr", tc.lr);
  tc.lambda = cfg.get_double("lambda", tc.lambda);
  tc.d = cfg.get_int("d", tc.d);
  tc.batch_size = cfg.get_int("batch_size", tc.batch_size);
  tc.max_epochs = cfg.get_int("max_epochs", tc.max_epochs);
  tc.patience = cfg.get_int("patience", tc.patience);
  tc.seed = cfg.get_u64("seed", tc.seed);
  tc.shuffle = cfg.get_bool("shuffle", tc.shuffle);
  tc.threads = cfg.get_int("threads", tc.threads);
  if (cfg.has("variant")) tc.variant = parse_variant(cfg.get_string("variant", ""));
  if (cfg.has("state_mode")) tc.state_mode = parse_state_mode(cfg.get_string("state_mode", ""));
  if (cfg.has("profile_window")) {
    tc.profile_window = parse_profile_window(cfg.get_string("profile_window", ""));
  }
  tc.validate();
  return tc;
}

EvalOptions eval_options_from(const Config& cfg) {
  EvalOptions opts;
  if (cfg.has("scope")) opts.scope = parse_ranking_scope(cfg.get_string("scope", ""));
  if (cfg.has("ndcg_norm")) opts.norm = parse_ndcg_norm(cfg.get_string("ndcg_norm", ""));
  opts.theta = cfg.get_int("theta", opts.theta);
  opts.threads = cfg.get_int("threads", opts.threads);
  if (opts.theta < 1) throw ConfigError("theta must be >= 1");
  return opts;
}

EmbeddingProvider embedder_from(const Config& cfg) {
  std::string kind = cfg.get_string("embedder.kind", "hashed");
  if (kind == "hashed") {
    int b = cfg.get_int("embedder.b", kDefaultEmbedDim);
    int buckets = cfg.get_int("embedder.buckets", kDefaultHashBuckets);
    if (b < 1 || buckets < 1) throw ConfigError("embedder.b and embedder.buckets must be >= 1");
    return EmbeddingProvider::hashed(b, buckets);
  }
  if (kind == "file") {
    return load_embedding_file(cfg.require_string("embedder.path"));
  }
  throw ConfigError("embedder.kind must be hashed or file, got '" + kind + "'");
}

}  // namespace drex
