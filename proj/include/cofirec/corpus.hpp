#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace cofirec::corpus {

inline constexpr int kDefaultLevels = 4;  // three semantic levels + CF
inline constexpr std::size_t kMaxHistory = 20;
inline constexpr std::size_t kMinInteractions = 5;

struct ItemRecord {
  std::string item_id;
  std::optional<std::string> category;
  std::string title;
  std::optional<std::string> description;

  friend bool operator==(const ItemRecord&, const ItemRecord&) = default;
};

// Coarse-to-fine text for the K-1 semantic levels of one item.
struct ItemHierarchy {
  std::string item_id;
  std::vector<std::string> levels;
};

struct InteractionLog {
  std::string user_id;
  std::vector<std::string> item_ids;  // chronological

  friend bool operator==(const InteractionLog&, const InteractionLog&) = default;
};

struct Corpus {
  std::vector<ItemRecord> items;
  std::vector<InteractionLog> logs;

  friend bool operator==(const Corpus&, const Corpus&) = default;
};

struct HistoryTarget {
  std::string user_id;
  std::vector<std::string> history;  // at most kMaxHistory, most recent last
  std::string target;
};

struct DatasetSplit {
  std::vector<InteractionLog> train;  // full remainder, untruncated
  std::vector<HistoryTarget> valid;
  std::vector<HistoryTarget> test;
};

struct SynthConfig {
  std::size_t n_users = 300;
  std::size_t n_items = 200;
  std::size_t n_categories = 5;
  std::size_t n_types_per_category = 4;
  std::uint64_t seed = 1;
  std::size_t min_session_length = 5;
  std::size_t max_session_length = 12;
  double intent_drift_probability = 0.1;
  // Exponent of the within-type popularity law (0 = uniform).
  double popularity_skew = 0.6;
};

// Line-delimited JSON: items carry item_id/category/title/description,
// interactions carry user_id and an item_ids array.
Corpus load_corpus(const std::filesystem::path& items_path,
                   const std::filesystem::path& interactions_path);
void save_corpus(const Corpus& corpus, const std::filesystem::path& items_path,
                 const std::filesystem::path& interactions_path);
std::string items_to_jsonl(const std::vector<ItemRecord>& items);
std::string interactions_to_jsonl(const std::vector<InteractionLog>& logs);

// Only K = 4 is supported: category / title / description.
ItemHierarchy build_hierarchy(const ItemRecord& item, int levels = kDefaultLevels);

// Iterative k-core filtering on users and items until nothing changes.
Corpus filter_min_interactions(Corpus corpus, std::size_t min_count = kMinInteractions);

DatasetSplit split_leave_one_out(const Corpus& corpus, std::size_t max_history = kMaxHistory);

Corpus synth_generate(const SynthConfig& config);

// Planted (category, type) labels of synthetic item ids; empty for foreign ids.
struct PlantedLabel {
  std::size_t category = 0;
  std::size_t type = 0;
};
std::optional<PlantedLabel> planted_label(const SynthConfig& config, const std::string& item_id);

// Truncates to the most recent `max_history` entries.
std::vector<std::string> recent(const std::vector<std::string>& seq, std::size_t max_history);

}  // namespace cofirec::corpus
