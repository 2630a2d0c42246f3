#include "drex/eval.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace drex {

std::vector<std::size_t> ranked_order(const UserRanking& r) {
  std::vector<std::size_t> idx(r.candidates.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    const auto& ca = r.candidates[a];
    const auto& cb = r.candidates[b];
    if (ca.score != cb.score) return ca.score > cb.score;
    return ca.item < cb.item;
  });
  return idx;
}

int relevant_count(const UserRanking& r) {
  int n = 0;
  for (const auto& c : r.candidates) n += c.true_rating >= r.theta;
  return n;
}

double mae(const std::vector<double>& predictions, const std::vector<double>& truths,
           int rating_scale) {
  if (predictions.empty() || predictions.size() != truths.size()) {
    throw DomainError("mae: need equal-length, non-empty prediction and truth lists");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    total += std::abs(clamp_rating(predictions[i], rating_scale) - truths[i]);
  }
  return total / static_cast<double>(predictions.size());
}

TopKScores f1_at_k(const std::vector<UserRanking>& rankings, int k) {
  if (k < 1) throw DomainError("f1_at_k: k must be >= 1");
  TopKScores out;
  double psum = 0.0, rsum = 0.0;
  for (const auto& r : rankings) {
    const int rel = relevant_count(r);
    if (rel == 0) {
      ++out.users_excluded;
      continue;
    }
    const auto order = ranked_order(r);
    int hits = 0;
    const std::size_t depth = std::min<std::size_t>(order.size(), static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < depth; ++i) {
      hits += r.candidates[order[i]].true_rating >= r.theta;
    }
    psum += static_cast<double>(hits) / static_cast<double>(k);
    rsum += static_cast<double>(hits) / static_cast<double>(rel);
    ++out.users_counted;
  }
  if (out.users_counted > 0) {
    out.precision = psum / out.users_counted;
    out.recall = rsum / out.users_counted;
    const double denom = out.precision + out.recall;
    out.f1 = denom > 0.0 ? 2.0 * out.precision * out.recall / denom : 0.0;
  }
  return out;
}

double ndcg_at_k(const std::vector<UserRanking>& rankings, int k, NdcgNorm norm) {
  if (k < 1) throw DomainError("ndcg_at_k: k must be >= 1");
  double sum = 0.0;
  int counted = 0;
  for (const auto& r : rankings) {
    const int rel = relevant_count(r);
    if (rel == 0) continue;
    const auto order = ranked_order(r);
    double dcg = 0.0;
    const std::size_t depth = std::min<std::size_t>(order.size(), static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < depth; ++i) {
      if (r.candidates[order[i]].true_rating >= r.theta) {
        dcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
      }
    }
    const int bound = norm == NdcgNorm::kCapped ? std::min(k, rel) : rel;
    double ideal = 0.0;
    for (int i = 0; i < bound; ++i) ideal += 1.0 / std::log2(static_cast<double>(i) + 2.0);
    sum += dcg / ideal;
    ++counted;
  }
  return counted > 0 ? sum / counted : 0.0;
}

FriedmanResult friedman_ranks(const Mat& scores, bool higher_is_better) {
  const int k = static_cast<int>(scores.rows());
  const int n = static_cast<int>(scores.cols());
  if (k < 2 || n < 2) {
    throw DomainError("friedman_ranks: need at least 2 models and 2 datasets, got " +
                      std::to_string(k) + "x" + std::to_string(n));
  }
  if (!scores.allFinite()) throw NumericError("friedman_ranks: non-finite scores");

  FriedmanResult out;
  out.mean_ranks.assign(static_cast<std::size_t>(k), 0.0);
  for (int j = 0; j < n; ++j) {
    // rank 1 = best; ties share the average of the positions they span
    std::vector<int> order(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) order[static_cast<std::size_t>(i)] = i;
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      return higher_is_better ? scores(a, j) > scores(b, j) : scores(a, j) < scores(b, j);
    });
    int pos = 0;
    while (pos < k) {
      int end = pos;
      while (end + 1 < k &&
             scores(order[static_cast<std::size_t>(end + 1)], j) ==
                 scores(order[static_cast<std::size_t>(pos)], j)) {
        ++end;
      }
      const double avg_rank = (static_cast<double>(pos) + static_cast<double>(end)) / 2.0 + 1.0;
      for (int t = pos; t <= end; ++t) {
        out.mean_ranks[static_cast<std::size_t>(order[static_cast<std::size_t>(t)])] += avg_rank;
      }
      pos = end + 1;
    }
  }
  for (double& r : out.mean_ranks) r /= static_cast<double>(n);

  double sum_sq = 0.0;
  for (double r : out.mean_ranks) sum_sq += r * r;
  const double kk = static_cast<double>(k);
  const double nn = static_cast<double>(n);
  out.chi2 = 12.0 * nn / (kk * (kk + 1.0)) * (sum_sq - kk * (kk + 1.0) * (kk + 1.0) / 4.0);
  // chi2 tops out at n(k-1) when rankings agree perfectly; F_F diverges there
  const double denom = nn * (kk - 1.0) - out.chi2;
  out.f_f = denom <= 0.0 ? std::numeric_limits<double>::infinity()
                         : (nn - 1.0) * out.chi2 / denom;
  return out;
}

double nemenyi_cd(int k_models, int n_datasets, double q_alpha) {
  if (k_models < 2) throw DomainError("nemenyi_cd: need at least 2 models");
  if (n_datasets < 1) throw DomainError("nemenyi_cd: need at least 1 dataset");
  if (q_alpha < 0.0) throw DomainError("nemenyi_cd: q_alpha must be non-negative");
  const double k = static_cast<double>(k_models);
  const double n = static_cast<double>(n_datasets);
  return q_alpha * std::sqrt(k * (k + 1.0) / (6.0 * n));
}

RankingsResult build_rankings(const NamedTensors& params, const EntityState& states,
                              const SplitBundle& bundle, RankingScope scope, int theta,
                              int threads, EvalSplit split) {
  const int m = bundle.user_count();
  const int n = bundle.item_count();

  const auto& held_out = split == EvalSplit::kTest ? bundle.test : bundle.validation;
  std::vector<std::vector<std::pair<int, int>>> test_by_user(static_cast<std::size_t>(m));
  for (const auto& x : held_out) {
    test_by_user[static_cast<std::size_t>(x.user_idx)].emplace_back(x.item_idx, x.rating);
  }
  std::vector<std::vector<int>> train_by_user(static_cast<std::size_t>(m));
  if (scope == RankingScope::kFullCatalog) {
    for (const auto& x : bundle.train) {
      train_by_user[static_cast<std::size_t>(x.user_idx)].push_back(x.item_idx);
    }
  }

  std::vector<UserRanking> slots(static_cast<std::size_t>(m));
  parallel_chunks(static_cast<std::size_t>(m), threads,
                  [&](int, std::size_t begin, std::size_t end) {
    for (std::size_t ui = begin; ui < end; ++ui) {
      const int u = static_cast<int>(ui);
      const auto& tests = test_by_user[ui];
      if (tests.empty()) continue;  // flagged as excluded below
      UserRanking r;
      r.user = u;
      r.theta = theta;
      const Vec ustate = states.users.row(u).transpose();
      auto score_item = [&](int item) {
        return predict(params, ustate, states.items.row(item).transpose());
      };
      if (scope == RankingScope::kTestItems) {
        r.candidates.reserve(tests.size());
        for (const auto& [item, rating] : tests) {
          r.candidates.push_back(RankedCandidate{item, score_item(item), rating});
        }
      } else {
        std::vector<char> in_train(static_cast<std::size_t>(n), 0);
        for (int item : train_by_user[ui]) in_train[static_cast<std::size_t>(item)] = 1;
        std::vector<int> truth(static_cast<std::size_t>(n), 0);
        for (const auto& [item, rating] : tests) truth[static_cast<std::size_t>(item)] = rating;
        r.candidates.reserve(static_cast<std::size_t>(n));
        for (int item = 0; item < n; ++item) {
          if (in_train[static_cast<std::size_t>(item)]) continue;
          r.candidates.push_back(
              RankedCandidate{item, score_item(item), truth[static_cast<std::size_t>(item)]});
        }
      }
      slots[ui] = std::move(r);
    }
  });

  RankingsResult out;
  for (int u = 0; u < m; ++u) {
    auto& slot = slots[static_cast<std::size_t>(u)];
    if (slot.user < 0) {
      ++out.excluded_users;
    } else {
      out.rankings.push_back(std::move(slot));
    }
  }
  return out;
}

MetricReport evaluate_model(const NamedTensors& params, const EntityState& states,
                            const SplitBundle& bundle, const EvalOptions& opts) {
  MetricReport report;
  report.theta = opts.theta;
  report.norm = opts.norm;
  report.scope = opts.scope;
  report.k_values = report_k_values();

  const auto& held_out = opts.split == EvalSplit::kTest ? bundle.test : bundle.validation;
  std::vector<double> preds, truths;
  preds.reserve(held_out.size());
  truths.reserve(held_out.size());
  for (const auto& x : held_out) {
    preds.push_back(predict(params, states.users.row(x.user_idx).transpose(),
                            states.items.row(x.item_idx).transpose()));
    truths.push_back(static_cast<double>(x.rating));
  }
  if (!preds.empty()) report.mae = mae(preds, truths, bundle.rating_scale);

  const auto built = build_rankings(params, states, bundle, opts.scope, opts.theta,
                                    opts.threads, opts.split);
  report.users_excluded = built.excluded_users;
  for (int k : report.k_values) {
    const auto topk = f1_at_k(built.rankings, k);
    report.precision.push_back(topk.precision);
    report.recall.push_back(topk.recall);
    report.f1.push_back(topk.f1);
    report.ndcg.push_back(ndcg_at_k(built.rankings, k, opts.norm));
    report.users_counted = topk.users_counted;
    report.users_excluded = built.excluded_users + topk.users_excluded;
  }
  return report;
}

double metric_at_k(const MetricReport& r, const std::vector<double>& column, int k) {
  for (std::size_t i = 0; i < r.k_values.size(); ++i) {
    if (r.k_values[i] == k) return column[i];
  }
  throw ContractError("metric_at_k: k=" + std::to_string(k) + " not in the report");
}

namespace {

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(10);
  s << v;
  return s.str();
}

const char* norm_name(NdcgNorm n) {
  return n == NdcgNorm::kCapped ? "capped" : "full_relevant";
}

const char* scope_name(RankingScope s) {
  return s == RankingScope::kTestItems ? "test_items" : "full_catalog";
}

}  // namespace

std::string metric_csv(const MetricReport& r) {
  std::ostringstream out;
  out << "mae";
  for (int k : r.k_values) {
    out << ",p_at_" << k << ",r_at_" << k << ",f1_at_" << k << ",ndcg_at_" << k;
  }
  out << ",users_counted,users_excluded,theta,normalization,scope\n";
  out << fmt(r.mae);
  for (std::size_t i = 0; i < r.k_values.size(); ++i) {
    out << ',' << fmt(r.precision[i]) << ',' << fmt(r.recall[i]) << ',' << fmt(r.f1[i]) << ','
        << fmt(r.ndcg[i]);
  }
  out << ',' << r.users_counted << ',' << r.users_excluded << ',' << r.theta << ','
      << norm_name(r.norm) << ',' << scope_name(r.scope) << "\n";
  return out.str();
}

std::string metric_json(const MetricReport& r) {
  nlohmann::ordered_json j;
  j["mae"] = r.mae;
  j["k"] = r.k_values;
  j["precision"] = r.precision;
  j["recall"] = r.recall;
  j["f1"] = r.f1;
  j["ndcg"] = r.ndcg;
  j["users_counted"] = r.users_counted;
  j["users_excluded"] = r.users_excluded;
  j["theta"] = r.theta;
  j["normalization"] = norm_name(r.norm);
  j["scope"] = scope_name(r.scope);
  return j.dump(2) + "\n";
}

}  // namespace drex
