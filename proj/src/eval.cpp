#include "cofirec/eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include <json.hpp>

#include "cofirec/generator.hpp"
#include "cofirec/io.hpp"
#include "cofirec/tokenizer.hpp"

namespace cofirec::eval {

namespace {

std::size_t rank_of(const std::vector<std::string>& ranked, const std::string& target,
                    std::size_t k) {
  if (k == 0) {
    throw std::invalid_argument("metric cutoff k must be >= 1");
  }
  const std::size_t limit = std::min(k, ranked.size());
  for (std::size_t i = 0; i < limit; ++i) {
    if (ranked[i] == target) {
      return i + 1;
    }
  }
  return 0;
}

}  // namespace

double recall_at_k(const std::vector<std::string>& ranked, const std::string& target,
                   std::size_t k) {
  return rank_of(ranked, target, k) != 0 ? 1.0 : 0.0;
}

double ndcg_at_k(const std::vector<std::string>& ranked, const std::string& target,
                 std::size_t k) {
  const std::size_t rank = rank_of(ranked, target, k);
  return rank == 0 ? 0.0 : 1.0 / std::log2(1.0 + static_cast<double>(rank));
}

MetricReport report_from_rankings(const std::vector<std::vector<std::string>>& rankings,
                                  const std::vector<std::string>& targets) {
  if (rankings.size() != targets.size()) {
    throw std::invalid_argument("report_from_rankings: one target per ranking required");
  }
  MetricReport r;
  r.users = targets.size();
  if (r.users == 0) {
    return r;
  }
  for (std::size_t u = 0; u < targets.size(); ++u) {
    r.recall5 += recall_at_k(rankings[u], targets[u], 5);
    r.recall10 += recall_at_k(rankings[u], targets[u], 10);
    r.ndcg5 += ndcg_at_k(rankings[u], targets[u], 5);
    r.ndcg10 += ndcg_at_k(rankings[u], targets[u], 10);
  }
  const double n = static_cast<double>(r.users);
  r.recall5 /= n;
  r.recall10 /= n;
  r.ndcg5 /= n;
  r.ndcg10 /= n;
  return r;
}

MetricReport evaluate(const generator::GeneratorModel& model, const tokenizer::TokenIndex& index,
                      const std::vector<corpus::HistoryTarget>& test, std::size_t beam_width,
                      std::vector<UserRecommendations>* recommendations) {
  const std::size_t window = model.max_items() - 1;
  for (const auto& ht : test) {
    if (!index.contains(ht.target)) {
      throw std::runtime_error("evaluate: test item " + ht.target + " of user " + ht.user_id +
                               " has no tokens");
    }
    for (const auto& id : ht.history) {
      if (!index.contains(id)) {
        throw std::runtime_error("evaluate: history item " + id + " of user " + ht.user_id +
                                 " has no tokens");
      }
    }
  }
  std::vector<std::vector<std::string>> rankings(test.size());
  std::vector<UserRecommendations> recs(test.size());
  const long n = static_cast<long>(test.size());
#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < n; ++i) {
    const auto& ht = test[static_cast<std::size_t>(i)];
    const auto history = generator::flatten(corpus::recent(ht.history, window), index);
    const auto ranked = generator::sequences_to_items(
        generator::beam_search(model, history, beam_width), index, 10);
    auto& rec = recs[static_cast<std::size_t>(i)];
    rec.user_id = ht.user_id;
    for (const auto& r : ranked) {
      rec.item_ids.push_back(r.item_id);
      rec.log_probs.push_back(r.log_prob);
    }
    rankings[static_cast<std::size_t>(i)] = rec.item_ids;
  }
  std::vector<std::string> targets;
  targets.reserve(test.size());
  for (const auto& ht : test) {
    targets.push_back(ht.target);
  }
  if (recommendations != nullptr) {
    *recommendations = std::move(recs);
  }
  return report_from_rankings(rankings, targets);
}

ColdSplit make_cold_split(const corpus::Corpus& corpus,
                          const std::vector<corpus::HistoryTarget>& test, double percentile) {
  if (!(percentile > 0.0 && percentile <= 100.0)) {
    throw std::invalid_argument("make_cold_split: percentile must be in (0, 100]");
  }
  std::map<std::string, std::size_t> freq;
  for (const auto& item : corpus.items) {
    freq[item.item_id] = 0;
  }
  for (const auto& log : corpus.logs) {
    if (!log.item_ids.empty()) {
      ++freq[log.item_ids.back()];
    }
  }
  ColdSplit split;
  if (freq.empty()) {
    for (const auto& ht : test) {
      split.warm_users.insert(ht.user_id);
    }
    return split;
  }
  std::vector<std::size_t> values;
  values.reserve(freq.size());
  for (const auto& [id, f] : freq) {
    values.push_back(f);
  }
  std::sort(values.begin(), values.end());
  const auto rank = static_cast<std::size_t>(
      std::ceil(percentile / 100.0 * static_cast<double>(values.size())));
  split.threshold = static_cast<double>(values[std::max<std::size_t>(rank, 1) - 1]);
  for (const auto& [id, f] : freq) {
    if (static_cast<double>(f) <= split.threshold) {
      split.cold_items.insert(id);
    }
  }
  for (const auto& ht : test) {
    if (split.cold_items.count(ht.target) != 0) {
      split.cold_users.insert(ht.user_id);
    } else {
      split.warm_users.insert(ht.user_id);
    }
  }
  return split;
}

std::vector<corpus::HistoryTarget> select_users(const std::vector<corpus::HistoryTarget>& test,
                                                const std::set<std::string>& users) {
  std::vector<corpus::HistoryTarget> out;
  for (const auto& ht : test) {
    if (users.count(ht.user_id) != 0) {
      out.push_back(ht);
    }
  }
  return out;
}

namespace {

std::vector<std::pair<std::string, double>> metric_values(const MetricReport& r) {
  return {{"recall@5", r.recall5}, {"recall@10", r.recall10}, {"ndcg@5", r.ndcg5},
          {"ndcg@10", r.ndcg10}};
}

}  // namespace

std::string reports_csv(const std::vector<ReportRow>& rows) {
  std::string out = "variant,seed,metric,value\n";
  for (const auto& row : rows) {
    for (const auto& [name, v] : metric_values(row.report)) {
      out += row.variant + "," + std::to_string(row.report.seed) + "," + name + "," +
             io::format_double(v) + "\n";
    }
  }
  return out;
}

std::string reports_json(const std::vector<ReportRow>& rows) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& row : rows) {
    nlohmann::json metrics = nlohmann::json::object();
    for (const auto& [name, v] : metric_values(row.report)) {
      metrics[name] = v;
    }
    arr.push_back({{"variant", row.variant},
                   {"seed", row.report.seed},
                   {"users", row.report.users},
                   {"fingerprint", row.report.fingerprint},
                   {"metrics", metrics}});
  }
  return arr.dump(2) + "\n";
}

std::string recommendations_csv(const std::vector<UserRecommendations>& recs) {
  std::string out = "user_id,rank,item_id,log_prob\n";
  for (const auto& r : recs) {
    for (std::size_t i = 0; i < r.item_ids.size(); ++i) {
      out += r.user_id + "," + std::to_string(i + 1) + "," + r.item_ids[i] + "," +
             io::format_double(r.log_probs[i]) + "\n";
    }
  }
  return out;
}

}  // namespace cofirec::eval
