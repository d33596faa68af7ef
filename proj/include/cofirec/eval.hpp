#pragma once

#include <cstddef>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "cofirec/corpus.hpp"

namespace cofirec::generator {
class GeneratorModel;
struct RankedItem;
}  // namespace cofirec::generator

namespace cofirec::tokenizer {
struct TokenIndex;
}

namespace cofirec::eval {

// 1 iff target is within the first k entries.
double recall_at_k(const std::vector<std::string>& ranked, const std::string& target,
                   std::size_t k);
// 1 / log2(1 + rank) for a single relevant item ranked within k, else 0.
double ndcg_at_k(const std::vector<std::string>& ranked, const std::string& target,
                 std::size_t k);

struct MetricReport {
  double recall5 = 0.0;
  double recall10 = 0.0;
  double ndcg5 = 0.0;
  double ndcg10 = 0.0;
  std::size_t users = 0;
  std::string fingerprint;
  std::uint64_t seed = 0;

  friend bool operator==(const MetricReport&, const MetricReport&) = default;
};

MetricReport report_from_rankings(const std::vector<std::vector<std::string>>& rankings,
                                  const std::vector<std::string>& targets);

struct UserRecommendations {
  std::string user_id;
  std::vector<std::string> item_ids;
  std::vector<double> log_probs;
};

// Beam search + grounding for every test user; histories are cut to the
// model's window. Throws if a history or target item has no tokens.
MetricReport evaluate(const generator::GeneratorModel& model, const tokenizer::TokenIndex& index,
                      const std::vector<corpus::HistoryTarget>& test, std::size_t beam_width,
                      std::vector<UserRecommendations>* recommendations = nullptr);

struct ColdSplit {
  std::set<std::string> warm_users;
  std::set<std::string> cold_users;
  std::set<std::string> cold_items;
  double threshold = 0.0;
};

// Item frequency = number of sequences the item ends. Items at or below the
// nearest-rank 2nd percentile of that frequency (over the whole catalog) are
// cold; a test user is cold when their target is.
ColdSplit make_cold_split(const corpus::Corpus& corpus,
                          const std::vector<corpus::HistoryTarget>& test,
                          double percentile = 2.0);

std::vector<corpus::HistoryTarget> select_users(const std::vector<corpus::HistoryTarget>& test,
                                                const std::set<std::string>& users);

struct ReportRow {
  std::string variant;
  MetricReport report;
};

// Header variant,seed,metric,value; four metric rows per report.
std::string reports_csv(const std::vector<ReportRow>& rows);
std::string reports_json(const std::vector<ReportRow>& rows);
std::string recommendations_csv(const std::vector<UserRecommendations>& recs);

}  // namespace cofirec::eval
