#pragma once

#include <string>
#include <vector>

#include "drex/ingest.hpp"
#include "drex/model.hpp"

namespace drex {

struct RankedCandidate {
  int item = -1;
  double score = 0.0;
  int true_rating = 0;  // 0 = unknown, treated as irrelevant
};

struct UserRanking {
  int user = -1;
  int theta = 4;  // relevance threshold: true_rating >= theta
  std::vector<RankedCandidate> candidates;
};

// Candidate indices sorted by score descending, item id ascending on ties.
std::vector<std::size_t> ranked_order(const UserRanking& r);

int relevant_count(const UserRanking& r);

// Mean absolute error with predictions clamped to [1, rating_scale].
double mae(const std::vector<double>& predictions, const std::vector<double>& truths,
           int rating_scale);

struct TopKScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  int users_counted = 0;
  int users_excluded = 0;  // users with no relevant candidates
};

// Averages over users with at least one relevant candidate; F1 is the
// harmonic mean of the averaged precision and recall.
TopKScores f1_at_k(const std::vector<UserRanking>& rankings, int k);

// full_relevant: ideal gain summed over all |rel_u| positions (can exceed
// what any length-k ranking can reach). capped: min(k, |rel_u|) positions.
enum class NdcgNorm { kCapped, kFullRelevant };

double ndcg_at_k(const std::vector<UserRanking>& rankings, int k, NdcgNorm norm);

struct FriedmanResult {
  std::vector<double> mean_ranks;  // one per model (row)
  double chi2 = 0.0;
  double f_f = 0.0;  // Iman-Davenport statistic
};

// scores: models x datasets. Ranks are assigned per dataset (1 = best under
// the chosen orientation), ties averaged.
FriedmanResult friedman_ranks(const Mat& scores, bool higher_is_better = true);

double nemenyi_cd(int k_models, int n_datasets, double q_alpha);

enum class RankingScope { kTestItems, kFullCatalog };

// Which held-out split supplies candidates and relevance labels. Training-time
// model selection ranks against validation; reported metrics use test.
enum class EvalSplit { kTest, kValidation };

struct RankingsResult {
  std::vector<UserRanking> rankings;
  int excluded_users = 0;  // users with no interactions in the chosen split
};

RankingsResult build_rankings(const NamedTensors& params, const EntityState& states,
                              const SplitBundle& bundle, RankingScope scope, int theta,
                              int threads = 1, EvalSplit split = EvalSplit::kTest);

inline const std::vector<int>& report_k_values() {
  static const std::vector<int> ks = {1, 2, 3, 4, 5, 10, 15, 20};
  return ks;
}

struct MetricReport {
  double mae = 0.0;
  std::vector<int> k_values;
  std::vector<double> precision, recall, f1, ndcg;
  int users_counted = 0;
  int users_excluded = 0;
  int theta = 4;
  NdcgNorm norm = NdcgNorm::kCapped;
  RankingScope scope = RankingScope::kTestItems;
};

struct EvalOptions {
  RankingScope scope = RankingScope::kTestItems;
  NdcgNorm norm = NdcgNorm::kCapped;
  int theta = 4;
  int threads = 1;
  EvalSplit split = EvalSplit::kTest;
};

MetricReport evaluate_model(const NamedTensors& params, const EntityState& states,
                            const SplitBundle& bundle, const EvalOptions& opts);

double metric_at_k(const MetricReport& r, const std::vector<double>& column, int k);

std::string metric_csv(const MetricReport& r);
std::string metric_json(const MetricReport& r);

}  // namespace drex
