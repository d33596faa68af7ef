#include "cofirec/run_config.hpp"

#include <algorithm>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <sstream>

#include "cofirec/io.hpp"

namespace cofirec {

namespace {

const std::vector<std::string> kVariants = {"full", "reverse", "random", "no_level_pos", "no_cf"};

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) {
    return {};
  }
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(v);
  while (std::getline(in, cur, ',')) {
    const std::string t = trim(cur);
    if (!t.empty()) {
      out.push_back(t);
    }
  }
  return out;
}

std::uint64_t to_u64(const std::string& v) {
  const long long x = io::parse_int(trim(v));
  if (x < 0) {
    throw std::runtime_error("must be non-negative");
  }
  return static_cast<std::uint64_t>(x);
}

std::size_t to_size(const std::string& v) { return static_cast<std::size_t>(to_u64(v)); }

int to_int(const std::string& v) { return static_cast<int>(io::parse_int(trim(v))); }

double to_real(const std::string& v) {
  const double x = io::parse_double(trim(v));
  if (!std::isfinite(x)) {
    throw std::runtime_error("must be finite");
  }
  return x;
}

bool to_bool(const std::string& v) {
  std::string t = trim(v);
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
  if (t == "true" || t == "1" || t == "yes" || t == "on") {
    return true;
  }
  if (t == "false" || t == "0" || t == "no" || t == "off") {
    return false;
  }
  throw std::runtime_error("expected true or false");
}

template <typename T, typename Conv>
std::vector<T> to_list(const std::string& v, Conv conv) {
  std::vector<T> out;
  for (const auto& s : split_list(v)) {
    out.push_back(conv(s));
  }
  return out;
}

template <typename T>
std::string join(const std::vector<T>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i > 0) {
      out += ",";
    }
    if constexpr (std::is_same_v<T, double>) {
      out += io::format_double(xs[i]);
    } else if constexpr (std::is_same_v<T, std::string>) {
      out += xs[i];
    } else {
      out += std::to_string(xs[i]);
    }
  }
  return out;
}

struct Field {
  std::string section;
  std::string key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename Access>
Field size_field(std::string sec, std::string key, Access a) {
  return {std::move(sec), std::move(key), [a](RunConfig& c, const std::string& v) { a(c) = to_size(v); },
          [a](const RunConfig& c) { return std::to_string(a(const_cast<RunConfig&>(c))); }};
}

template <typename Access>
Field u64_field(std::string sec, std::string key, Access a) {
  return {std::move(sec), std::move(key), [a](RunConfig& c, const std::string& v) { a(c) = to_u64(v); },
          [a](const RunConfig& c) { return std::to_string(a(const_cast<RunConfig&>(c))); }};
}

template <typename Access>
Field real_field(std::string sec, std::string key, Access a) {
  return {std::move(sec), std::move(key), [a](RunConfig& c, const std::string& v) { a(c) = to_real(v); },
          [a](const RunConfig& c) { return io::format_double(a(const_cast<RunConfig&>(c))); }};
}

template <typename Access>
Field bool_field(std::string sec, std::string key, Access a) {
  return {std::move(sec), std::move(key), [a](RunConfig& c, const std::string& v) { a(c) = to_bool(v); },
          [a](const RunConfig& c) {
            return std::string(a(const_cast<RunConfig&>(c)) ? "true" : "false");
          }};
}

template <typename Access>
Field string_field(std::string sec, std::string key, Access a) {
  return {std::move(sec), std::move(key), [a](RunConfig& c, const std::string& v) { a(c) = trim(v); },
          [a](const RunConfig& c) { return a(const_cast<RunConfig&>(c)); }};
}

template <typename T, typename Conv, typename Access>
Field list_field(std::string sec, std::string key, Conv conv, Access a) {
  return {std::move(sec), std::move(key),
          [a, conv](RunConfig& c, const std::string& v) { a(c) = to_list<T>(v, conv); },
          [a](const RunConfig& c) { return join(a(const_cast<RunConfig&>(c))); }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> all = [] {
    std::vector<Field> f;
    f.push_back(u64_field("run", "seed", [](RunConfig& c) -> auto& { return c.seed; }));
    f.push_back(string_field("run", "out", [](RunConfig& c) -> auto& { return c.out; }));
    f.push_back(size_field("run", "workers", [](RunConfig& c) -> auto& { return c.workers; }));

    f.push_back(string_field("corpus", "source", [](RunConfig& c) -> auto& { return c.corpus.source; }));
    f.push_back(string_field("corpus", "items", [](RunConfig& c) -> auto& { return c.corpus.items; }));
    f.push_back(string_field("corpus", "interactions",
                             [](RunConfig& c) -> auto& { return c.corpus.interactions; }));
    f.push_back(size_field("corpus", "min_interactions",
                           [](RunConfig& c) -> auto& { return c.corpus.min_interactions; }));
    f.push_back(size_field("corpus", "n_users", [](RunConfig& c) -> auto& { return c.corpus.synth.n_users; }));
    f.push_back(size_field("corpus", "n_items", [](RunConfig& c) -> auto& { return c.corpus.synth.n_items; }));
    f.push_back(size_field("corpus", "n_categories",
                           [](RunConfig& c) -> auto& { return c.corpus.synth.n_categories; }));
    f.push_back(size_field("corpus", "n_types_per_category",
                           [](RunConfig& c) -> auto& { return c.corpus.synth.n_types_per_category; }));
    f.push_back(size_field("corpus", "min_session_length",
                           [](RunConfig& c) -> auto& { return c.corpus.synth.min_session_length; }));
    f.push_back(size_field("corpus", "max_session_length",
                           [](RunConfig& c) -> auto& { return c.corpus.synth.max_session_length; }));
    f.push_back(real_field("corpus", "intent_drift_probability",
                           [](RunConfig& c) -> auto& { return c.corpus.synth.intent_drift_probability; }));
    f.push_back(real_field("corpus", "popularity_skew",
                           [](RunConfig& c) -> auto& { return c.corpus.synth.popularity_skew; }));

    f.push_back(size_field("featurizer", "d_text", [](RunConfig& c) -> auto& { return c.featurizer.d_text; }));
    f.push_back(size_field("featurizer", "d_cf", [](RunConfig& c) -> auto& { return c.featurizer.d_cf; }));
    f.push_back(list_field<std::size_t>("featurizer", "ngram_sizes", to_size,
                                        [](RunConfig& c) -> auto& { return c.featurizer.ngram_sizes; }));
    f.push_back(size_field("featurizer", "hash_buckets",
                           [](RunConfig& c) -> auto& { return c.featurizer.hash_buckets; }));
    f.push_back(u64_field("featurizer", "projection_seed",
                          [](RunConfig& c) -> auto& { return c.featurizer.projection_seed; }));
    f.push_back(size_field("featurizer", "cooccurrence_window",
                           [](RunConfig& c) -> auto& { return c.featurizer.cooccurrence_window; }));
    f.push_back(size_field("featurizer", "svd_iterations",
                           [](RunConfig& c) -> auto& { return c.featurizer.svd_iterations; }));
    f.push_back(u64_field("featurizer", "svd_seed", [](RunConfig& c) -> auto& { return c.featurizer.svd_seed; }));

    f.push_back(list_field<std::size_t>("tokenizer", "codebook_sizes", to_size,
                                        [](RunConfig& c) -> auto& { return c.tokenizer.codebook_sizes; }));
    f.push_back(size_field("tokenizer", "code_dim", [](RunConfig& c) -> auto& { return c.tokenizer.code_dim; }));
    f.push_back(list_field<std::size_t>("tokenizer", "hidden", to_size,
                                        [](RunConfig& c) -> auto& { return c.tokenizer.hidden; }));
    f.push_back(real_field("tokenizer", "mu", [](RunConfig& c) -> auto& { return c.tokenizer.mu; }));
    f.push_back(size_field("tokenizer", "epochs", [](RunConfig& c) -> auto& { return c.tokenizer.epochs; }));
    f.push_back(real_field("tokenizer", "learning_rate",
                           [](RunConfig& c) -> auto& { return c.tokenizer.learning_rate; }));
    f.push_back(size_field("tokenizer", "full_batch_limit",
                           [](RunConfig& c) -> auto& { return c.tokenizer.full_batch_limit; }));
    f.push_back(size_field("tokenizer", "batch_size", [](RunConfig& c) -> auto& { return c.tokenizer.batch_size; }));
    f.push_back(bool_field("tokenizer", "reseed_dead_codes",
                           [](RunConfig& c) -> auto& { return c.tokenizer.reseed_dead_codes; }));
    f.push_back(real_field("tokenizer", "init_noise", [](RunConfig& c) -> auto& { return c.tokenizer.init_noise; }));
    f.push_back(bool_field("tokenizer", "replace_cf_with_text",
                           [](RunConfig& c) -> auto& { return c.tokenizer.replace_cf_with_text; }));

    f.push_back(size_field("generator", "d_model", [](RunConfig& c) -> auto& { return c.generator.d_model; }));
    f.push_back(size_field("generator", "n_layers", [](RunConfig& c) -> auto& { return c.generator.n_layers; }));
    f.push_back(size_field("generator", "n_heads", [](RunConfig& c) -> auto& { return c.generator.n_heads; }));
    f.push_back(size_field("generator", "d_ff", [](RunConfig& c) -> auto& { return c.generator.d_ff; }));
    f.push_back(size_field("generator", "max_history",
                           [](RunConfig& c) -> auto& { return c.generator.max_history; }));
    f.push_back(real_field("generator", "temperature",
                           [](RunConfig& c) -> auto& { return c.generator.temperature; }));
    f.push_back(real_field("generator", "learning_rate",
                           [](RunConfig& c) -> auto& { return c.generator.learning_rate; }));
    f.push_back(size_field("generator", "epochs", [](RunConfig& c) -> auto& { return c.generator.epochs; }));
    f.push_back(size_field("generator", "batch_size", [](RunConfig& c) -> auto& { return c.generator.batch_size; }));
    f.push_back(size_field("generator", "beam_width", [](RunConfig& c) -> auto& { return c.generator.beam_width; }));
    f.push_back(bool_field("generator", "use_level_embedding",
                           [](RunConfig& c) -> auto& { return c.generator.use_level_embedding; }));
    f.push_back(bool_field("generator", "use_position_embedding",
                           [](RunConfig& c) -> auto& { return c.generator.use_position_embedding; }));
    f.push_back(Field{"generator", "selection",
                      [](RunConfig& c, const std::string& v) {
                        const std::string t = trim(v);
                        if (t == "rank_loss") {
                          c.generator.selection = generator::SelectionMetric::rank_loss;
                        } else if (t == "ndcg10") {
                          c.generator.selection = generator::SelectionMetric::ndcg10;
                        } else {
                          throw std::runtime_error("expected rank_loss or ndcg10");
                        }
                      },
                      [](const RunConfig& c) {
                        return std::string(c.generator.selection == generator::SelectionMetric::ndcg10
                                               ? "ndcg10"
                                               : "rank_loss");
                      }});
    f.push_back(size_field("generator", "validation_users",
                           [](RunConfig& c) -> auto& { return c.generator.validation_users; }));

    f.push_back(size_field("eval", "beam_width", [](RunConfig& c) -> auto& { return c.eval.beam_width; }));
    f.push_back(real_field("eval", "cold_percentile",
                           [](RunConfig& c) -> auto& { return c.eval.cold_percentile; }));
    f.push_back(bool_field("eval", "exclude_cold_from_training",
                           [](RunConfig& c) -> auto& { return c.eval.exclude_cold_from_training; }));
    f.push_back(list_field<std::string>("eval", "ablation_variants", [](const std::string& s) { return s; },
                                        [](RunConfig& c) -> auto& { return c.eval.ablation_variants; }));
    f.push_back(list_field<std::uint64_t>("eval", "ablation_seeds", to_u64,
                                          [](RunConfig& c) -> auto& { return c.eval.ablation_seeds; }));

    f.push_back(list_field<double>("theory", "p", to_real, [](RunConfig& c) -> auto& { return c.theory.p; }));
    f.push_back(list_field<int>("theory", "V", to_int, [](RunConfig& c) -> auto& { return c.theory.V; }));
    f.push_back(list_field<int>("theory", "K", to_int, [](RunConfig& c) -> auto& { return c.theory.K; }));
    f.push_back(size_field("theory", "trials", [](RunConfig& c) -> auto& { return c.theory.trials; }));
    f.push_back(size_field("theory", "shards", [](RunConfig& c) -> auto& { return c.theory.shards; }));
    return f;
  }();
  return all;
}

}  // namespace

void RunConfig::apply_seed(std::uint64_t s) {
  seed = s;
  corpus.synth.seed = s;
  tokenizer.seed = s;
  generator.seed = s;
  theory.seed = s;
}

void RunConfig::validate() const {
  try {
    featurizer.validate();
    tokenizer.validate();
    generator.validate();
  } catch (const std::invalid_argument& err) {
    throw ConfigError(err.what());
  }
  if (corpus.source != "files" && corpus.source != "synth") {
    throw ConfigError("corpus.source must be 'files' or 'synth', got '" + corpus.source + "'");
  }
  if (corpus.synth.n_items == 0 || corpus.synth.n_users == 0 || corpus.synth.n_categories == 0 ||
      corpus.synth.n_types_per_category == 0) {
    throw ConfigError("corpus: synthetic sizes must be positive");
  }
  if (corpus.synth.min_session_length < 3 ||
      corpus.synth.max_session_length < corpus.synth.min_session_length) {
    throw ConfigError("corpus: need 3 <= min_session_length <= max_session_length");
  }
  if (corpus.synth.intent_drift_probability < 0.0 || corpus.synth.intent_drift_probability > 1.0) {
    throw ConfigError("corpus.intent_drift_probability must lie in [0, 1]");
  }
  if (tokenizer.codebook_sizes.size() != static_cast<std::size_t>(corpus::kDefaultLevels)) {
    throw ConfigError("tokenizer.codebook_sizes needs exactly " +
                      std::to_string(corpus::kDefaultLevels) + " entries");
  }
  if (eval.beam_width == 0) {
    throw ConfigError("eval.beam_width must be >= 1");
  }
  if (!(eval.cold_percentile > 0.0 && eval.cold_percentile <= 100.0)) {
    throw ConfigError("eval.cold_percentile must lie in (0, 100]");
  }
  for (const auto& v : eval.ablation_variants) {
    if (std::find(kVariants.begin(), kVariants.end(), v) == kVariants.end()) {
      throw ConfigError("eval.ablation_variants: unknown variant '" + v + "'");
    }
  }
  if (eval.ablation_seeds.empty()) {
    throw ConfigError("eval.ablation_seeds must not be empty");
  }
  if (theory.p.empty() || theory.V.empty() || theory.K.empty() || theory.trials == 0 ||
      theory.shards == 0) {
    throw ConfigError("theory: p, V, K, trials and shards must be non-empty / positive");
  }
}

std::filesystem::path RunConfig::items_path() const {
  return corpus.items.empty() ? std::filesystem::path(out) / "items.jsonl"
                              : std::filesystem::path(corpus.items);
}

std::filesystem::path RunConfig::interactions_path() const {
  return corpus.interactions.empty() ? std::filesystem::path(out) / "interactions.jsonl"
                                     : std::filesystem::path(corpus.interactions);
}

std::string RunConfig::canonical() const {
  std::string out_text;
  for (const auto& f : fields()) {
    out_text += f.section + "." + f.key + " = " + f.get(*this) + "\n";
  }
  return out_text;
}

std::string RunConfig::hash() const { return io::crc32_hex(canonical()); }

RunConfig parse_config(std::string_view text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    std::istringstream in{std::string(text)};
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& err) {
    throw ConfigError("config: " + err.message() + " at line " + std::to_string(err.line()));
  }
  RunConfig config;
  for (const auto& [section, sub] : tree) {
    if (sub.empty()) {
      throw ConfigError("config key '" + section + "' must live inside a [section]");
    }
    for (const auto& [key, value] : sub) {
      const auto& all = fields();
      const auto it = std::find_if(all.begin(), all.end(), [&](const Field& f) {
        return f.section == section && f.key == key;
      });
      if (it == all.end()) {
        throw ConfigError("unknown config key '" + section + "." + key + "'");
      }
      try {
        it->set(config, value.data());
      } catch (const std::exception& err) {
        throw ConfigError("invalid value '" + value.data() + "' for " + section + "." + key +
                          ": " + err.what());
      }
    }
  }
  config.apply_seed(config.seed);
  config.validate();
  return config;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = io::read_file(path);
  } catch (const std::exception& err) {
    throw ConfigError(err.what());
  }
  return parse_config(text);
}

void resolve_seed(RunConfig& config, const std::string& cli_seed) {
  std::string raw = cli_seed;
  std::string origin = "--seed";
  if (raw.empty()) {
    if (const char* env = std::getenv("COFIREC_SEED"); env != nullptr && *env != '\0') {
      raw = env;
      origin = "COFIREC_SEED";
    }
  }
  if (raw.empty()) {
    return;
  }
  try {
    config.apply_seed(to_u64(raw));
  } catch (const std::exception&) {
    throw ConfigError("invalid seed '" + raw + "' from " + origin);
  }
}

}  // namespace cofirec
