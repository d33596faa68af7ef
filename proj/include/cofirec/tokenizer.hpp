#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cofirec/numerics/matrix.hpp"
#include "cofirec/numerics/mlp.hpp"

namespace cofirec::tokenizer {

using numerics::Matrix;
using numerics::Param;

// Which encoder/decoder pair a level runs through.
enum class LevelKind { semantic, cf };

struct TokenizerConfig {
  std::vector<std::size_t> codebook_sizes = {256, 256, 512, 512};
  std::size_t code_dim = 32;
  std::vector<std::size_t> hidden = {64};
  double mu = 0.25;
  std::size_t epochs = 300;
  double learning_rate = 1e-3;
  std::size_t full_batch_limit = 4096;
  std::size_t batch_size = 1024;
  bool reseed_dead_codes = true;
  double init_noise = 1e-3;
  // Last level is a fourth semantic level instead of the CF level.
  bool replace_cf_with_text = false;
  std::uint64_t seed = 1;

  void validate() const;
  std::size_t levels() const { return codebook_sizes.size(); }
};

struct Codebook {
  int level = 0;  // 1-based
  Param codes;    // V_k x code_dim

  std::size_t size() const { return codes.value.rows(); }
  std::size_t dim() const { return codes.value.cols(); }
};

class TokenizerModel {
 public:
  TokenizerModel() = default;
  TokenizerModel(const TokenizerConfig& config, std::size_t d_text, std::size_t d_cf);

  // MLP init only; codebooks are seeded from data by train_tokenizer.
  void init(std::mt19937_64& rng);

  std::size_t levels() const { return codebooks.size(); }
  std::size_t input_dim(std::size_t level) const;
  const numerics::Mlp& encoder(std::size_t level) const;
  const numerics::Mlp& decoder(std::size_t level) const;
  numerics::Mlp& encoder(std::size_t level);
  numerics::Mlp& decoder(std::size_t level);

  Matrix encode(std::size_t level, const Matrix& e) const;

  std::vector<Param*> parameters();
  std::vector<const Param*> parameters() const;

  numerics::Mlp f_sem, g_sem, f_cf, g_cf;
  std::vector<Codebook> codebooks;
  std::vector<LevelKind> kinds;
  double mu = 0.25;
};

// Row-aligned inputs: levels[k] is n x input_dim(k).
struct TokenizerInputs {
  std::vector<std::string> item_ids;
  std::vector<Matrix> levels;

  std::size_t size() const { return item_ids.size(); }
  TokenizerInputs subset(const std::vector<std::size_t>& rows) const;
};

struct Quantized {
  int index = 0;
  double distance2 = 0.0;
  std::vector<double> code;
};

// Nearest code under squared Euclidean distance; ties go to the lowest index.
Quantized quantize(std::span<const double> h, const Codebook& codebook);

using Assignments = std::vector<std::vector<int>>;  // [level][row]

struct LossParts {
  double reconstruction = 0.0;
  double codebook_commitment = 0.0;  // ||sg[h] - c||^2
  double encoder_commitment = 0.0;   // mu ||h - sg[c]||^2
  double total() const { return reconstruction + codebook_commitment + encoder_commitment; }
};

struct LossResult {
  LossParts parts;
  Assignments assignments;
};

// Batch-averaged loss. With `compute_gradients`, gradients are accumulated
// into every Param::grad (straight-through to the encoders). `fixed` pins
// code assignments instead of taking the argmin.
LossResult tokenizer_loss(TokenizerModel& model, const TokenizerInputs& batch,
                          bool compute_gradients, const Assignments* fixed = nullptr);

struct TrainedTokenizer {
  TokenizerModel model;
  std::vector<std::pair<std::size_t, double>> curve;  // (epoch, mean loss)
  std::size_t reseeded_codes = 0;
};

TrainedTokenizer train_tokenizer(const TokenizerInputs& inputs, const TokenizerConfig& config,
                                 std::size_t d_text, std::size_t d_cf);

using TokenTuple = std::vector<int>;

struct TokenIndex {
  std::vector<std::size_t> vocab_sizes;
  std::map<std::string, TokenTuple> forward;
  std::map<TokenTuple, std::vector<std::string>> reverse;  // ids ascending

  std::size_t levels() const { return vocab_sizes.size(); }
  void add(const std::string& item_id, TokenTuple tokens);
  const TokenTuple& at(const std::string& item_id) const;
  bool contains(const std::string& item_id) const { return forward.count(item_id) != 0; }

  friend bool operator==(const TokenIndex&, const TokenIndex&) = default;
};

TokenIndex tokenize_corpus(const TokenizerModel& model, const TokenizerInputs& inputs);

double collision_rate(const TokenIndex& index);
std::vector<double> utilization(const TokenIndex& index);
// Mean over prefix groups of the majority-category share, for prefix
// lengths 1..max_prefix. Items without a label are ignored.
std::vector<double> prefix_purity(const TokenIndex& index,
                                  const std::map<std::string, std::string>& labels,
                                  std::size_t max_prefix = 2);

// "#vocab V1 ... VK" then "item_id t1 ... tK" per item.
std::string index_to_text(const TokenIndex& index);
TokenIndex index_from_text(std::string_view text);
void save_index(const std::filesystem::path& path, const TokenIndex& index);
TokenIndex load_index(const std::filesystem::path& path);

// CSV with header level,metric,value.
std::string analytics_csv(const TokenIndex& index,
                          const std::map<std::string, std::string>& labels);

}  // namespace cofirec::tokenizer
