#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "cofirec/run_config.hpp"

namespace cofirec::commands {

struct Options {
  std::string config_path;
  std::string out;   // overrides run.out when set
  std::string seed;  // overrides run.seed when set
  std::size_t workers = 0;
};

// Loads, overrides and validates; throws ConfigError.
RunConfig resolve(const Options& options);

void cmd_synth(const RunConfig& config);
void cmd_train_tokenizer(const RunConfig& config);
void cmd_tokenize(const RunConfig& config);
void cmd_train_generator(const RunConfig& config);
void cmd_evaluate(const RunConfig& config);
void cmd_ablate(const RunConfig& config);
// Returns false when some grid point fails.
bool cmd_theory(const RunConfig& config);

// manifest-<command>.json in the output directory: config hash and text,
// seed, and CRC-32 of every input and output file.
void write_manifest(const RunConfig& config, const std::string& command,
                    const std::vector<std::filesystem::path>& inputs,
                    const std::vector<std::filesystem::path>& outputs);

// Dispatches one subcommand; returns the process exit status
// (0 success, 1 configuration error, 2 runtime error).
int run(const std::string& command, const Options& options);

}  // namespace cofirec::commands
