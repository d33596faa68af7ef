#include "cofirec/commands.hpp"

#include <omp.h>

#include <iostream>
#include <optional>
#include <sstream>

#include <json.hpp>

#include "cofirec/eval.hpp"
#include "cofirec/io.hpp"
#include "cofirec/numerics/checkpoint.hpp"
#include "cofirec/pipeline.hpp"
#include "cofirec/theory.hpp"

namespace cofirec::commands {

namespace fs = std::filesystem;

namespace {

fs::path out_file(const RunConfig& config, const std::string& name) {
  return fs::path(config.out) / name;
}

void require(const fs::path& path) {
  if (!fs::exists(path)) {
    throw std::runtime_error("missing upstream artifact: " + path.string());
  }
}

std::vector<fs::path> corpus_inputs(const RunConfig& config) {
  if (config.corpus.source == "synth") {
    return {};
  }
  return {config.items_path(), config.interactions_path()};
}

std::string display_name(const RunConfig& config, const fs::path& p) {
  const auto rel = p.lexically_relative(config.out);
  if (!rel.empty() && *rel.begin() != "..") {
    return rel.generic_string();
  }
  return p.generic_string();
}

void save_params(const fs::path& path, const std::vector<const numerics::Param*>& params) {
  std::ostringstream out;
  numerics::write_checkpoint(out, params);
  io::write_file(path, out.str());
}

tokenizer::TokenizerModel load_tokenizer(const RunConfig& config) {
  const fs::path ckpt = out_file(config, "tokenizer.ckpt");
  require(ckpt);
  tokenizer::TokenizerModel model(config.tokenizer, config.featurizer.d_text,
                                  config.featurizer.d_cf);
  numerics::load_checkpoint(ckpt.string(), model.parameters());
  return model;
}

tokenizer::TokenIndex load_tokens(const RunConfig& config) {
  const fs::path path = out_file(config, "tokens.txt");
  require(path);
  return tokenizer::load_index(path);
}

}  // namespace

RunConfig resolve(const Options& options) {
  RunConfig config = load_config(options.config_path);
  if (!options.out.empty()) {
    config.out = options.out;
  }
  if (options.workers != 0) {
    config.workers = options.workers;
  }
  resolve_seed(config, options.seed);
  config.validate();
  return config;
}

void write_manifest(const RunConfig& config, const std::string& command,
                    const std::vector<fs::path>& inputs, const std::vector<fs::path>& outputs) {
  nlohmann::json doc;
  doc["command"] = command;
  doc["config_hash"] = config.hash();
  doc["config"] = config.canonical();
  doc["seed"] = config.seed;
  nlohmann::json in = nlohmann::json::object();
  for (const auto& p : inputs) {
    in[display_name(config, p)] = io::file_checksum(p);
  }
  nlohmann::json out = nlohmann::json::object();
  for (const auto& p : outputs) {
    out[display_name(config, p)] = io::file_checksum(p);
  }
  doc["inputs"] = in;
  doc["outputs"] = out;
  io::write_file(out_file(config, "manifest-" + command + ".json"), doc.dump(2) + "\n");
}

void cmd_synth(const RunConfig& config) {
  const corpus::Corpus c = corpus::synth_generate(config.corpus.synth);
  corpus::save_corpus(c, config.items_path(), config.interactions_path());
  std::clog << "synth: " << c.items.size() << " items, " << c.logs.size() << " users\n";
  write_manifest(config, "synth", {}, {config.items_path(), config.interactions_path()});
}

void cmd_train_tokenizer(const RunConfig& config) {
  const auto data = pipeline::prepare(pipeline::obtain_corpus(config), config);
  const auto features = pipeline::featurize_items(data, config.featurizer);
  const auto inputs =
      pipeline::tokenizer_inputs(features, pipeline::train_items(data),
                                 config.tokenizer.replace_cf_with_text);
  const auto trained = tokenizer::train_tokenizer(inputs, config.tokenizer,
                                                  config.featurizer.d_text, config.featurizer.d_cf);
  const fs::path ckpt = out_file(config, "tokenizer.ckpt");
  const fs::path curve = out_file(config, "tokenizer_curve.csv");
  save_params(ckpt, trained.model.parameters());
  std::string csv = "epoch,loss\n";
  for (const auto& [epoch, loss] : trained.curve) {
    csv += std::to_string(epoch) + "," + io::format_double(loss) + "\n";
  }
  io::write_file(curve, csv);
  std::clog << "train-tokenizer: " << inputs.size() << " items, final loss "
            << (trained.curve.empty() ? 0.0 : trained.curve.back().second) << "\n";
  write_manifest(config, "train-tokenizer", corpus_inputs(config), {ckpt, curve});
}

void cmd_tokenize(const RunConfig& config) {
  const auto model = load_tokenizer(config);
  const auto data = pipeline::prepare(pipeline::obtain_corpus(config), config);
  const auto features = pipeline::featurize_items(data, config.featurizer);
  const auto index = tokenizer::tokenize_corpus(
      model, pipeline::tokenizer_inputs(features, pipeline::all_items(data),
                                        config.tokenizer.replace_cf_with_text));
  const fs::path tokens = out_file(config, "tokens.txt");
  const fs::path analytics = out_file(config, "tokenizer_analytics.csv");
  tokenizer::save_index(tokens, index);
  io::write_file(analytics, tokenizer::analytics_csv(index, data.categories));
  std::clog << "tokenize: " << index.forward.size() << " items, collision rate "
            << tokenizer::collision_rate(index) << "\n";
  auto inputs = corpus_inputs(config);
  inputs.push_back(out_file(config, "tokenizer.ckpt"));
  write_manifest(config, "tokenize", inputs, {tokens, analytics});
}

void cmd_train_generator(const RunConfig& config) {
  const auto index = load_tokens(config);
  const auto data = pipeline::prepare(pipeline::obtain_corpus(config), config);
  const auto run = pipeline::run_generator(data, index, config.generator);
  const fs::path ckpt = out_file(config, "generator.ckpt");
  const fs::path curve = out_file(config, "generator_curve.csv");
  save_params(ckpt, run.model.parameters());
  io::write_file(curve, generator::curve_csv(run.report));
  std::clog << "train-generator: best epoch " << run.report.best_epoch << "\n";
  auto inputs = corpus_inputs(config);
  inputs.push_back(out_file(config, "tokens.txt"));
  write_manifest(config, "train-generator", inputs, {ckpt, curve});
}

void cmd_evaluate(const RunConfig& config) {
  const auto index = load_tokens(config);
  const fs::path ckpt = out_file(config, "generator.ckpt");
  require(ckpt);
  generator::GeneratorModel model(config.generator, index.vocab_sizes);
  numerics::load_checkpoint(ckpt.string(), model.parameters());
  const auto data = pipeline::prepare(pipeline::obtain_corpus(config), config);

  std::vector<eval::UserRecommendations> recs;
  std::vector<eval::ReportRow> rows;
  rows.push_back({"all", eval::evaluate(model, index, data.split.test, config.eval.beam_width,
                                        &recs)});
  rows.push_back({"warm", eval::evaluate(model, index,
                                         eval::select_users(data.split.test, data.cold.warm_users),
                                         config.eval.beam_width)});
  rows.push_back({"cold", eval::evaluate(model, index,
                                         eval::select_users(data.split.test, data.cold.cold_users),
                                         config.eval.beam_width)});
  for (auto& row : rows) {
    row.report.seed = config.seed;
    row.report.fingerprint = config.hash();
  }
  const fs::path csv = out_file(config, "metrics.csv");
  const fs::path json = out_file(config, "metrics.json");
  const fs::path rec_csv = out_file(config, "recommendations.csv");
  io::write_file(csv, eval::reports_csv(rows));
  io::write_file(json, eval::reports_json(rows));
  io::write_file(rec_csv, eval::recommendations_csv(recs));
  const auto& all = rows.front().report;
  std::clog << "evaluate: " << all.users << " users, R@10 " << all.recall10 << ", N@10 "
            << all.ndcg10 << " (cold users: " << rows.back().report.users << ")\n";
  auto inputs = corpus_inputs(config);
  inputs.push_back(out_file(config, "tokens.txt"));
  inputs.push_back(ckpt);
  write_manifest(config, "evaluate", inputs, {csv, json, rec_csv});
}

void cmd_ablate(const RunConfig& config) {
  std::optional<corpus::Corpus> fixed;
  if (config.corpus.source == "files") {
    fixed = pipeline::obtain_corpus(config);
  }
  const auto rows = pipeline::run_ablation_matrix(config, config.eval.ablation_variants,
                                                  config.eval.ablation_seeds,
                                                  fixed ? &*fixed : nullptr);
  const fs::path csv = out_file(config, "ablation.csv");
  const fs::path json = out_file(config, "ablation.json");
  io::write_file(csv, eval::reports_csv(rows));
  io::write_file(json, eval::reports_json(rows));
  write_manifest(config, "ablate", corpus_inputs(config), {csv, json});
}

bool cmd_theory(const RunConfig& config) {
  const auto report = theory::verify_proposition(config.theory);
  const fs::path csv = out_file(config, "theory.csv");
  io::write_file(csv, theory::report_csv(report));
  for (const auto& f : report.failures) {
    std::cerr << "theory: " << f << "\n";
  }
  write_manifest(config, "theory", {}, {csv});
  return report.failures.empty();
}

int run(const std::string& command, const Options& options) {
  try {
    const RunConfig config = resolve(options);
    if (config.workers != 0) {
      omp_set_num_threads(static_cast<int>(config.workers));
    }
    if (command == "synth") {
      cmd_synth(config);
    } else if (command == "train-tokenizer") {
      cmd_train_tokenizer(config);
    } else if (command == "tokenize") {
      cmd_tokenize(config);
    } else if (command == "train-generator") {
      cmd_train_generator(config);
    } else if (command == "evaluate") {
      cmd_evaluate(config);
    } else if (command == "ablate") {
      cmd_ablate(config);
    } else if (command == "theory") {
      if (!cmd_theory(config)) {
        return 2;
      }
    } else {
      std::cerr << "error: unknown command '" << command << "'\n";
      return 1;
    }
  } catch (const ConfigError& err) {
    std::cerr << "config error: " << err.what() << "\n";
    return 1;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace cofirec::commands
