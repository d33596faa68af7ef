#include <CLI11.hpp>
#include <iostream>
#include <string>
#include <vector>

#include "cofirec/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"cofirec: coarse-to-fine item tokenization and generative recommendation"};
  app.require_subcommand(1);

  cofirec::commands::Options options;
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"synth", "write a synthetic planted-taxonomy corpus"},
      {"train-tokenizer", "train the per-level codebook tokenizer"},
      {"tokenize", "assign token tuples to every item"},
      {"train-generator", "train the autoregressive generator"},
      {"evaluate", "beam-search recommendations and Recall/NDCG"},
      {"ablate", "run the ablation matrix over the configured seeds"},
      {"theory", "closed forms vs Monte Carlo for the tree model"},
  };
  std::string chosen;
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", options.config_path, "INI run configuration")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--out", options.out, "output directory (overrides run.out)");
    sub->add_option("--seed", options.seed, "seed override");
    sub->add_option("--workers", options.workers, "OpenMP threads (0 = default)");
    sub->callback([&chosen, n = name] { chosen = n; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : 1;
  }
  return cofirec::commands::run(chosen, options);
}
