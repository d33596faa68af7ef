#include "cofirec/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "cofirec/io.hpp"

namespace cofirec::corpus {
namespace {

using nlohmann::json;

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) {
    return {};
  }
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::optional<std::string> optional_text(const json& obj, const char* key) {
  if (!obj.contains(key) || obj[key].is_null()) {
    return std::nullopt;
  }
  if (!obj[key].is_string()) {
    throw std::runtime_error(std::string("field '") + key + "' must be a string");
  }
  std::string v = trim(obj[key].get<std::string>());
  if (v.empty()) {
    return std::nullopt;
  }
  return v;
}

template <typename F>
void for_each_line(const std::string& content, const std::string& what, F&& handle) {
  std::istringstream in(content);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) {
      continue;
    }
    try {
      handle(json::parse(line));
    } catch (const std::exception& e) {
      throw std::runtime_error(what + " line " + std::to_string(lineno) + ": " + e.what());
    }
  }
}

// Syllable-built pseudo words so the synthetic text has real n-gram overlap
// inside a group and little across groups.
class WordMaker {
 public:
  explicit WordMaker(std::mt19937_64& rng) : rng_(rng) {}

  std::string make(std::size_t min_syllables, std::size_t max_syllables) {
    static constexpr const char* kSyl[] = {
        "ka", "lo", "mi", "ren", "tas", "vor", "bel", "qui", "dra", "nox", "pel", "sut",
        "gar", "fen", "zil", "tro", "mav", "cur", "hes", "lyn", "oba", "rik", "sal", "tem",
        "ung", "wex", "yor", "bri", "cal", "dun", "eph", "fol", "gri", "hak", "ish", "jun"};
    constexpr std::size_t n = sizeof(kSyl) / sizeof(kSyl[0]);
    for (;;) {
      std::uniform_int_distribution<std::size_t> len(min_syllables, max_syllables);
      std::uniform_int_distribution<std::size_t> pick(0, n - 1);
      std::string w;
      const std::size_t k = len(rng_);
      for (std::size_t i = 0; i < k; ++i) {
        w += kSyl[pick(rng_)];
      }
      if (used_.insert(w).second) {
        return w;
      }
    }
  }

  std::vector<std::string> make_many(std::size_t count, std::size_t lo, std::size_t hi) {
    std::vector<std::string> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
      out.push_back(make(lo, hi));
    }
    return out;
  }

 private:
  std::mt19937_64& rng_;
  std::set<std::string> used_;
};

std::string capitalize(std::string w) {
  if (!w.empty()) {
    w[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(w[0])));
  }
  return w;
}

std::string synth_item_id(std::size_t j) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "i%05zu", j);
  return buf;
}

std::string synth_user_id(std::size_t u) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "u%05zu", u);
  return buf;
}

void validate(const SynthConfig& c) {
  if (c.n_users == 0 || c.n_items == 0 || c.n_categories == 0 || c.n_types_per_category == 0) {
    throw std::invalid_argument("synth: all counts must be >= 1");
  }
  if (c.n_items < c.n_categories * c.n_types_per_category) {
    throw std::invalid_argument("synth: n_items " + std::to_string(c.n_items) +
                                " < n_categories * n_types_per_category = " +
                                std::to_string(c.n_categories * c.n_types_per_category));
  }
  if (c.min_session_length == 0 || c.min_session_length > c.max_session_length) {
    throw std::invalid_argument("synth: bad session length range");
  }
  if (!(c.intent_drift_probability >= 0.0 && c.intent_drift_probability <= 1.0)) {
    throw std::invalid_argument("synth: intent_drift_probability must lie in [0, 1]");
  }
}

}  // namespace

Corpus load_corpus(const std::filesystem::path& items_path,
                   const std::filesystem::path& interactions_path) {
  Corpus corpus;
  std::unordered_set<std::string> ids;
  for_each_line(io::read_file(items_path), items_path.string(), [&](const json& obj) {
    ItemRecord item;
    if (!obj.contains("item_id") || !obj["item_id"].is_string()) {
      throw std::runtime_error("missing string field 'item_id'");
    }
    item.item_id = obj["item_id"].get<std::string>();
    if (item.item_id.empty()) {
      throw std::runtime_error("empty item_id");
    }
    item.category = optional_text(obj, "category");
    item.description = optional_text(obj, "description");
    const auto title = optional_text(obj, "title");
    if (!title) {
      throw std::runtime_error("item " + item.item_id + " has an empty title");
    }
    item.title = *title;
    if (!ids.insert(item.item_id).second) {
      throw std::runtime_error("duplicate item_id " + item.item_id);
    }
    corpus.items.push_back(std::move(item));
  });
  for_each_line(io::read_file(interactions_path), interactions_path.string(), [&](const json& obj) {
    InteractionLog log;
    if (!obj.contains("user_id") || !obj["user_id"].is_string()) {
      throw std::runtime_error("missing string field 'user_id'");
    }
    log.user_id = obj["user_id"].get<std::string>();
    if (!obj.contains("item_ids") || !obj["item_ids"].is_array()) {
      throw std::runtime_error("missing array field 'item_ids'");
    }
    for (const auto& v : obj["item_ids"]) {
      const auto id = v.get<std::string>();
      if (!ids.contains(id)) {
        throw std::runtime_error("user " + log.user_id + " references unknown item \"" + id + "\"");
      }
      log.item_ids.push_back(id);
    }
    corpus.logs.push_back(std::move(log));
  });
  return corpus;
}

std::string items_to_jsonl(const std::vector<ItemRecord>& items) {
  std::string out;
  for (const auto& item : items) {
    json obj = json::object();
    obj["item_id"] = item.item_id;
    obj["category"] = item.category.value_or("");
    obj["title"] = item.title;
    obj["description"] = item.description.value_or("");
    out += obj.dump();
    out.push_back('\n');
  }
  return out;
}

std::string interactions_to_jsonl(const std::vector<InteractionLog>& logs) {
  std::string out;
  for (const auto& log : logs) {
    json obj = json::object();
    obj["user_id"] = log.user_id;
    obj["item_ids"] = log.item_ids;
    out += obj.dump();
    out.push_back('\n');
  }
  return out;
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& items_path,
                 const std::filesystem::path& interactions_path) {
  io::write_file(items_path, items_to_jsonl(corpus.items));
  io::write_file(interactions_path, interactions_to_jsonl(corpus.logs));
}

ItemHierarchy build_hierarchy(const ItemRecord& item, int levels) {
  if (levels != kDefaultLevels) {
    throw std::invalid_argument("build_hierarchy: only K = 4 (category/title/description + CF) "
                                "is supported, got K = " +
                                std::to_string(levels));
  }
  const std::string title = trim(item.title);
  if (title.empty()) {
    throw std::invalid_argument("build_hierarchy: item " + item.item_id + " has an empty title");
  }
  ItemHierarchy h;
  h.item_id = item.item_id;
  if (item.category && !trim(*item.category).empty()) {
    h.levels.push_back(trim(*item.category));
  } else {
    std::string first = title.substr(0, title.find_first_of(" \t"));
    std::transform(first.begin(), first.end(), first.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    h.levels.push_back(first);
  }
  h.levels.push_back(title);
  if (item.description && !trim(*item.description).empty()) {
    h.levels.push_back(trim(*item.description));
  } else {
    h.levels.push_back(title);
  }
  return h;
}

Corpus filter_min_interactions(Corpus corpus, std::size_t min_count) {
  for (;;) {
    std::unordered_map<std::string, std::size_t> counts;
    for (const auto& log : corpus.logs) {
      for (const auto& id : log.item_ids) {
        ++counts[id];
      }
    }
    bool changed = false;
    std::erase_if(corpus.items, [&](const ItemRecord& item) {
      const auto it = counts.find(item.item_id);
      const bool drop = it == counts.end() || it->second < min_count;
      changed = changed || drop;
      return drop;
    });
    for (auto& log : corpus.logs) {
      const std::size_t before = log.item_ids.size();
      std::erase_if(log.item_ids, [&](const std::string& id) { return counts[id] < min_count; });
      changed = changed || log.item_ids.size() != before;
    }
    const std::size_t users_before = corpus.logs.size();
    std::erase_if(corpus.logs,
                  [&](const InteractionLog& log) { return log.item_ids.size() < min_count; });
    changed = changed || corpus.logs.size() != users_before;
    if (!changed) {
      return corpus;
    }
  }
}

std::vector<std::string> recent(const std::vector<std::string>& seq, std::size_t max_history) {
  if (seq.size() <= max_history) {
    return seq;
  }
  return {seq.end() - static_cast<std::ptrdiff_t>(max_history), seq.end()};
}

DatasetSplit split_leave_one_out(const Corpus& corpus, std::size_t max_history) {
  DatasetSplit split;
  for (const auto& log : corpus.logs) {
    const auto& seq = log.item_ids;
    if (seq.size() < 3) {
      throw std::invalid_argument("split_leave_one_out: user " + log.user_id + " has only " +
                                  std::to_string(seq.size()) + " interactions (need >= 3)");
    }
    const std::size_t n = seq.size();
    InteractionLog train{log.user_id, {seq.begin(), seq.end() - 2}};
    std::vector<std::string> test_history(seq.begin(), seq.end() - 1);
    split.valid.push_back({log.user_id, recent(train.item_ids, max_history), seq[n - 2]});
    split.test.push_back({log.user_id, recent(test_history, max_history), seq[n - 1]});
    split.train.push_back(std::move(train));
  }
  return split;
}

Corpus synth_generate(const SynthConfig& config) {
  validate(config);
  std::mt19937_64 rng(config.seed);
  WordMaker words(rng);
  const std::size_t n_cat = config.n_categories;
  const std::size_t n_type = config.n_types_per_category;
  const std::size_t n_groups = n_cat * n_type;

  const auto cat_words = words.make_many(n_cat * 2, 2, 3);
  const auto type_words = words.make_many(n_groups, 2, 3);
  const auto brands = words.make_many(std::max<std::size_t>(8, n_groups / 2), 2, 2);
  const auto adjectives = words.make_many(48, 2, 3);
  const auto features = words.make_many(64, 2, 3);
  // Each category owns a few descriptive words shared by its types.
  const auto cat_themes = words.make_many(n_cat * 3, 2, 3);

  auto pick = [&](const std::vector<std::string>& pool) -> const std::string& {
    std::uniform_int_distribution<std::size_t> d(0, pool.size() - 1);
    return pool[d(rng)];
  };

  Corpus corpus;
  std::vector<std::vector<std::size_t>> members(n_groups);
  for (std::size_t j = 0; j < config.n_items; ++j) {
    const std::size_t group = j % n_groups;
    const std::size_t cat = group / n_type;
    members[group].push_back(j);
    ItemRecord item;
    item.item_id = synth_item_id(j);
    item.category = capitalize(cat_words[2 * cat]) + " " + capitalize(cat_words[2 * cat + 1]);
    std::uniform_int_distribution<int> letter(0, 25);
    std::uniform_int_distribution<int> number(100, 999);
    std::string model;
    model.push_back(static_cast<char>('A' + letter(rng)));
    model.push_back(static_cast<char>('A' + letter(rng)));
    model += "-" + std::to_string(number(rng));
    item.title = capitalize(pick(brands)) + " " + capitalize(type_words[group]) + " " + model;
    std::uniform_int_distribution<std::size_t> theme(0, 2);
    item.description = capitalize(pick(adjectives)) + " " + type_words[group] + " with " +
                       pick(features) + " " + pick(features) + " for " +
                       cat_themes[3 * cat + theme(rng)] + " use, " + pick(adjectives) + " " +
                       pick(features) + " finish";
    corpus.items.push_back(std::move(item));
  }

  // Within-type popularity: weight 1/(rank+1)^skew over a shuffled rank.
  std::vector<std::discrete_distribution<std::size_t>> within(n_groups);
  for (std::size_t g = 0; g < n_groups; ++g) {
    std::vector<std::size_t> rank(members[g].size());
    for (std::size_t r = 0; r < rank.size(); ++r) {
      rank[r] = r;
    }
    std::shuffle(rank.begin(), rank.end(), rng);
    std::vector<double> w(rank.size());
    for (std::size_t r = 0; r < rank.size(); ++r) {
      w[r] = 1.0 / std::pow(static_cast<double>(rank[r] + 1), config.popularity_skew);
    }
    within[g] = std::discrete_distribution<std::size_t>(w.begin(), w.end());
  }

  std::uniform_int_distribution<std::size_t> cat_dist(0, n_cat - 1);
  std::uniform_int_distribution<std::size_t> type_dist(0, n_type - 1);
  std::uniform_int_distribution<std::size_t> len_dist(config.min_session_length,
                                                      config.max_session_length);
  std::bernoulli_distribution drift(config.intent_drift_probability);
  for (std::size_t u = 0; u < config.n_users; ++u) {
    InteractionLog log;
    log.user_id = synth_user_id(u);
    const std::size_t len = len_dist(rng);
    std::size_t cat = cat_dist(rng);
    std::size_t type = type_dist(rng);
    for (std::size_t step = 0; step < len; ++step) {
      if (step > 0 && drift(rng)) {
        cat = cat_dist(rng);
        type = type_dist(rng);
      }
      const std::size_t g = cat * n_type + type;
      log.item_ids.push_back(synth_item_id(members[g][within[g](rng)]));
    }
    corpus.logs.push_back(std::move(log));
  }
  return corpus;
}

std::optional<PlantedLabel> planted_label(const SynthConfig& config, const std::string& item_id) {
  if (item_id.size() < 2 || item_id[0] != 'i') {
    return std::nullopt;
  }
  std::size_t j = 0;
  try {
    j = static_cast<std::size_t>(io::parse_int(std::string_view(item_id).substr(1)));
  } catch (const std::exception&) {
    return std::nullopt;
  }
  if (j >= config.n_items) {
    return std::nullopt;
  }
  const std::size_t group = j % (config.n_categories * config.n_types_per_category);
  return PlantedLabel{group / config.n_types_per_category, group % config.n_types_per_category};
}

}  // namespace cofirec::corpus
