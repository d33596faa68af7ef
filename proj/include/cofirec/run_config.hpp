#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "cofirec/corpus.hpp"
#include "cofirec/featurize.hpp"
#include "cofirec/generator.hpp"
#include "cofirec/theory.hpp"
#include "cofirec/tokenizer.hpp"

namespace cofirec {

// Anything wrong with the configuration itself (exit status 1).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CorpusSection {
  std::string source = "files";  // "files" or "synth"
  std::string items;             // default <out>/items.jsonl
  std::string interactions;      // default <out>/interactions.jsonl
  std::size_t min_interactions = corpus::kMinInteractions;
  corpus::SynthConfig synth;
};

struct EvalSection {
  std::size_t beam_width = 20;
  double cold_percentile = 2.0;
  bool exclude_cold_from_training = false;
  std::vector<std::string> ablation_variants = {"full", "reverse", "random", "no_level_pos",
                                                "no_cf"};
  std::vector<std::uint64_t> ablation_seeds = {1, 2, 3, 4, 5};
};

struct RunConfig {
  std::uint64_t seed = 1;
  std::string out = "out";
  std::size_t workers = 0;  // 0 = OpenMP default
  CorpusSection corpus;
  featurize::FeaturizerConfig featurizer;
  tokenizer::TokenizerConfig tokenizer;
  generator::GeneratorConfig generator;
  EvalSection eval;
  theory::GridConfig theory;

  // Propagates the run seed to every stochastic stage.
  void apply_seed(std::uint64_t s);
  void validate() const;

  std::filesystem::path items_path() const;
  std::filesystem::path interactions_path() const;

  // One "section.key = value" line per field, in a fixed order.
  std::string canonical() const;
  std::string hash() const;
};

// INI text with [run], [corpus], [featurizer], [tokenizer], [generator],
// [eval] and [theory] sections. Unknown sections or keys raise ConfigError.
RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::filesystem::path& path);

// Seed precedence: explicit override, then COFIREC_SEED, then the file.
void resolve_seed(RunConfig& config, const std::string& cli_seed);

}  // namespace cofirec
