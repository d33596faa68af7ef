#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cofirec/corpus.hpp"
#include "cofirec/eval.hpp"
#include "cofirec/featurize.hpp"
#include "cofirec/generator.hpp"
#include "cofirec/run_config.hpp"
#include "cofirec/tokenizer.hpp"

// Stage plumbing shared by the command-line tool and the acceptance suite.
namespace cofirec::pipeline {

corpus::Corpus obtain_corpus(const RunConfig& config);

struct PreparedData {
  corpus::Corpus corpus;  // after k-core filtering
  corpus::DatasetSplit split;
  std::vector<corpus::ItemHierarchy> hierarchies;
  std::map<std::string, std::string> categories;  // item_id -> level-1 text
  eval::ColdSplit cold;
};

// Filters, splits, builds hierarchies and the cold split. With
// eval.exclude_cold_from_training, cold items are dropped from the train
// sequences too.
PreparedData prepare(const corpus::Corpus& raw, const RunConfig& config);

struct Features {
  // category, title, description, title + description
  std::vector<featurize::EmbeddingTable> text;
  featurize::EmbeddingTable cf;
};

Features featurize_items(const PreparedData& data, const featurize::FeaturizerConfig& config);

// Items appearing in the train sequences, sorted.
std::vector<std::string> train_items(const PreparedData& data);
std::vector<std::string> all_items(const PreparedData& data);

// Rows for `item_ids`; the last level is the CF embedding (zeros for items
// without one) or, with replace_cf, the title + description embedding.
tokenizer::TokenizerInputs tokenizer_inputs(const Features& features,
                                            const std::vector<std::string>& item_ids,
                                            bool replace_cf);

struct TokenizerRun {
  tokenizer::TrainedTokenizer trained;
  tokenizer::TokenIndex index;
};

// Trains on the train-split items and tokenizes the whole catalog.
TokenizerRun run_tokenizer(const PreparedData& data, const Features& features,
                           const tokenizer::TokenizerConfig& config, std::size_t d_text,
                           std::size_t d_cf);

struct GeneratorRun {
  generator::GeneratorModel model;
  generator::TrainReport report;
};

GeneratorRun run_generator(const PreparedData& data, const tokenizer::TokenIndex& index,
                           const generator::GeneratorConfig& config);

struct SeedInfo {
  std::uint64_t seed = 0;
  std::size_t items = 0;  // after filtering
  std::size_t users = 0;
  tokenizer::TokenIndex base_index;  // empty when only no_cf ran
};

// Variants: full, reverse, random, no_level_pos, no_cf. Every seed rebuilds
// the corpus (when synthetic) and all models with that seed.
std::vector<eval::ReportRow> run_ablation_matrix(const RunConfig& config,
                                                 const std::vector<std::string>& variants,
                                                 const std::vector<std::uint64_t>& seeds,
                                                 const corpus::Corpus* fixed_corpus = nullptr,
                                                 std::vector<SeedInfo>* info = nullptr);

}  // namespace cofirec::pipeline
