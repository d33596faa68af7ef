#include "cofirec/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <optional>
#include <set>
#include <stdexcept>

namespace cofirec::pipeline {

corpus::Corpus obtain_corpus(const RunConfig& config) {
  if (config.corpus.source == "synth") {
    return corpus::synth_generate(config.corpus.synth);
  }
  for (const auto& path : {config.items_path(), config.interactions_path()}) {
    if (!std::filesystem::exists(path)) {
      throw std::runtime_error("missing corpus file: " + path.string() +
                               " (run `cofirec synth` first or set corpus.items/interactions)");
    }
  }
  return corpus::load_corpus(config.items_path(), config.interactions_path());
}

PreparedData prepare(const corpus::Corpus& raw, const RunConfig& config) {
  PreparedData data;
  data.corpus = corpus::filter_min_interactions(raw, config.corpus.min_interactions);
  if (data.corpus.logs.empty()) {
    throw std::runtime_error("no user survives filtering at min_interactions = " +
                             std::to_string(config.corpus.min_interactions));
  }
  data.split = corpus::split_leave_one_out(data.corpus);
  for (const auto& item : data.corpus.items) {
    data.hierarchies.push_back(corpus::build_hierarchy(item));
    data.categories[item.item_id] = data.hierarchies.back().levels.front();
  }
  data.cold = eval::make_cold_split(data.corpus, data.split.test, config.eval.cold_percentile);
  if (config.eval.exclude_cold_from_training) {
    for (auto& log : data.split.train) {
      auto& ids = log.item_ids;
      ids.erase(std::remove_if(ids.begin(), ids.end(),
                               [&](const std::string& id) {
                                 return data.cold.cold_items.count(id) != 0;
                               }),
                ids.end());
    }
  }
  return data;
}

Features featurize_items(const PreparedData& data, const featurize::FeaturizerConfig& config) {
  Features f;
  const featurize::TextEmbedder embedder(config);
  f.text = featurize::embed_hierarchies(data.hierarchies, embedder);
  featurize::EmbeddingTable joint;
  joint.dim = config.d_text;
  for (const auto& h : data.hierarchies) {
    joint.rows.emplace(h.item_id, embedder.embed(h.levels[1] + " " + h.levels[2],
                                                 static_cast<int>(h.levels.size()) + 1));
  }
  f.text.push_back(std::move(joint));
  f.cf = featurize::train_cf_embeddings(data.split.train, config);
  return f;
}

std::vector<std::string> train_items(const PreparedData& data) {
  std::set<std::string> ids;
  for (const auto& log : data.split.train) {
    ids.insert(log.item_ids.begin(), log.item_ids.end());
  }
  return {ids.begin(), ids.end()};
}

std::vector<std::string> all_items(const PreparedData& data) {
  std::vector<std::string> ids;
  for (const auto& item : data.corpus.items) {
    ids.push_back(item.item_id);
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

tokenizer::TokenizerInputs tokenizer_inputs(const Features& features,
                                            const std::vector<std::string>& item_ids,
                                            bool replace_cf) {
  tokenizer::TokenizerInputs in;
  in.item_ids = item_ids;
  const std::size_t semantic = features.text.size() - 1;
  for (std::size_t k = 0; k <= semantic; ++k) {
    const bool last = k == semantic;
    const featurize::EmbeddingTable& table =
        last ? (replace_cf ? features.text[semantic] : features.cf) : features.text[k];
    numerics::Matrix m(item_ids.size(), table.dim);
    for (std::size_t i = 0; i < item_ids.size(); ++i) {
      const auto it = table.rows.find(item_ids[i]);
      if (it == table.rows.end()) {
        if (last && !replace_cf) {
          continue;  // never co-occurred in training: zero CF vector
        }
        throw std::runtime_error("no level-" + std::to_string(k + 1) + " embedding for item " +
                                 item_ids[i]);
      }
      std::copy(it->second.begin(), it->second.end(), m.row(i).begin());
    }
    in.levels.push_back(std::move(m));
  }
  return in;
}

TokenizerRun run_tokenizer(const PreparedData& data, const Features& features,
                           const tokenizer::TokenizerConfig& config, std::size_t d_text,
                           std::size_t d_cf) {
  TokenizerRun run;
  const auto train = tokenizer_inputs(features, train_items(data), config.replace_cf_with_text);
  run.trained = tokenizer::train_tokenizer(train, config, d_text, d_cf);
  run.index = tokenizer::tokenize_corpus(
      run.trained.model, tokenizer_inputs(features, all_items(data), config.replace_cf_with_text));
  return run;
}

GeneratorRun run_generator(const PreparedData& data, const tokenizer::TokenIndex& index,
                           const generator::GeneratorConfig& config) {
  GeneratorRun run;
  run.model = generator::make_model(config, index.vocab_sizes);
  run.report = generator::train_generator(run.model, data.split, index);
  return run;
}

std::vector<eval::ReportRow> run_ablation_matrix(const RunConfig& config,
                                                 const std::vector<std::string>& variants,
                                                 const std::vector<std::uint64_t>& seeds,
                                                 const corpus::Corpus* fixed_corpus,
                                                 std::vector<SeedInfo>* info) {
  std::vector<eval::ReportRow> rows;
  for (std::uint64_t seed : seeds) {
    RunConfig c = config;
    c.apply_seed(seed);
    const corpus::Corpus raw = fixed_corpus != nullptr ? *fixed_corpus : obtain_corpus(c);
    const PreparedData data = prepare(raw, c);
    const Features features = featurize_items(data, c.featurizer);
    std::optional<TokenizerRun> base;
    for (const auto& variant : variants) {
      std::clog << "ablation seed " << seed << " variant " << variant << "\n";
      generator::GeneratorConfig gcfg = c.generator;
      tokenizer::TokenIndex index;
      if (variant == "no_cf") {
        tokenizer::TokenizerConfig tcfg = c.tokenizer;
        tcfg.replace_cf_with_text = true;
        index = run_tokenizer(data, features, tcfg, c.featurizer.d_text, c.featurizer.d_cf).index;
      } else {
        if (!base) {
          base = run_tokenizer(data, features, c.tokenizer, c.featurizer.d_text, c.featurizer.d_cf);
        }
        if (variant == "full" || variant == "no_level_pos") {
          index = base->index;
        } else if (variant == "reverse") {
          index = generator::apply_order_ablation(base->index, generator::OrderMode::reverse, seed);
        } else if (variant == "random") {
          index = generator::apply_order_ablation(base->index, generator::OrderMode::random, seed);
        } else {
          throw std::invalid_argument("unknown ablation variant '" + variant + "'");
        }
        if (variant == "no_level_pos") {
          gcfg.use_level_embedding = false;
          gcfg.use_position_embedding = false;
        }
      }
      const GeneratorRun gen = run_generator(data, index, gcfg);
      eval::ReportRow row;
      row.variant = variant;
      row.report = eval::evaluate(gen.model, index, data.split.test, c.eval.beam_width);
      row.report.seed = seed;
      row.report.fingerprint = c.hash();
      rows.push_back(std::move(row));
    }
    if (info != nullptr) {
      info->push_back({seed, data.corpus.items.size(), data.corpus.logs.size(),
                       base ? base->index : tokenizer::TokenIndex{}});
    }
  }
  return rows;
}

}  // namespace cofirec::pipeline
