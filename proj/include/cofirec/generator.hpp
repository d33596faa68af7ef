#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "cofirec/corpus.hpp"
#include "cofirec/numerics/layers.hpp"
#include "cofirec/numerics/matrix.hpp"
#include "cofirec/numerics/transformer.hpp"
#include "cofirec/tokenizer.hpp"

namespace cofirec::generator {

using numerics::Matrix;
using numerics::Param;
using tokenizer::TokenIndex;
using tokenizer::TokenTuple;

enum class SelectionMetric { rank_loss, ndcg10 };

struct GeneratorConfig {
  std::size_t d_model = 64;
  std::size_t n_layers = 2;
  std::size_t n_heads = 2;
  std::size_t d_ff = 0;  // 0 means 4 * d_model
  std::size_t max_history = corpus::kMaxHistory;
  double temperature = 1.0;
  double learning_rate = 1e-3;
  std::size_t epochs = 20;
  std::size_t batch_size = 32;
  std::size_t beam_width = 20;
  std::uint64_t seed = 1;
  bool use_level_embedding = true;
  bool use_position_embedding = true;
  SelectionMetric selection = SelectionMetric::rank_loss;
  std::size_t validation_users = 0;  // 0 = all

  void validate() const;
  std::size_t ffn_dim() const { return d_ff == 0 ? 4 * d_model : d_ff; }
};

class GeneratorModel {
 public:
  GeneratorModel() = default;
  GeneratorModel(const GeneratorConfig& config, std::vector<std::size_t> vocab_sizes);

  void init(std::mt19937_64& rng);

  std::size_t levels() const { return vocab_sizes.size(); }
  std::size_t d_model() const { return config.d_model; }
  // Item positions available to E_pos (history plus the item being generated).
  std::size_t max_items() const { return pos_table.value.rows(); }

  std::vector<Param*> parameters();
  std::vector<const Param*> parameters() const;

  GeneratorConfig config;
  std::vector<std::size_t> vocab_sizes;
  std::vector<Param> id_tables;  // V_k x d
  Param level_table;             // K x d
  Param pos_table;               // (max_history + 1) x d
  std::vector<numerics::TransformerBlock> blocks;
  Param final_gamma, final_beta;
  std::vector<Param> head_w;  // d x V_k
  std::vector<Param> head_b;  // 1 x V_k
};

GeneratorModel make_model(const GeneratorConfig& config, std::vector<std::size_t> vocab_sizes);

// Level predicted by the slot at flat position i.
inline std::size_t next_level(std::size_t i, std::size_t levels) { return (i + 1) % levels; }

// Row i = E_id[k][s_i] + E_level[k] + E_pos[t] with t = i / K, k = i % K.
Matrix build_input(const GeneratorModel& model, std::span<const int> tokens);

struct ForwardCache {
  Matrix input;
  std::vector<numerics::BlockCache> blocks;
  Matrix final_in;
  numerics::LayerNormCache final_ln;
};

// Final-normalized hidden states, one row per input slot (causal).
Matrix forward_hidden(const GeneratorModel& model, std::span<const int> tokens,
                      ForwardCache* cache = nullptr);

// Raw logits per slot over the next slot's level vocabulary.
std::vector<std::vector<double>> forward(const GeneratorModel& model,
                                         std::span<const int> tokens);

// Sum over levels of temperature-scaled cross-entropy for one target tuple.
double rank_loss(const std::vector<std::vector<double>>& level_logits,
                 std::span<const int> targets, double tau);
// Mean of the above over a batch.
double rank_loss(const std::vector<std::vector<std::vector<double>>>& batch_logits,
                 const std::vector<TokenTuple>& targets, double tau);

struct SequenceLoss {
  double loss = 0.0;        // summed over target items
  std::size_t targets = 0;  // number of target items
};

// Teacher-forced loss of the items at positions >= first_target in a flat
// item sequence. With weight > 0 gradients of weight * loss are accumulated.
SequenceLoss sequence_loss(GeneratorModel& model, std::span<const int> items_flat,
                           std::size_t first_target, double weight);
SequenceLoss sequence_loss(const GeneratorModel& model, std::span<const int> items_flat,
                           std::size_t first_target);

std::vector<int> flatten(const std::vector<std::string>& items, const TokenIndex& index);

struct EpochStats {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double valid_loss = 0.0;
  double valid_ndcg10 = std::numeric_limits<double>::quiet_NaN();
};

struct TrainReport {
  std::vector<EpochStats> curve;
  std::size_t best_epoch = 0;  // 0 = initialization kept
};

// Trains on the most recent max_history + 1 items of every train sequence,
// keeps the parameters of the best validation epoch.
TrainReport train_generator(GeneratorModel& model, const corpus::DatasetSplit& split,
                            const TokenIndex& index);

struct BeamHypothesis {
  TokenTuple tokens;
  double log_prob = 0.0;
};

// Incremental decoding state: one key/value cache per block.
struct DecodeState {
  std::vector<numerics::KvCache> kv;
  Matrix hidden;  // 1 x d, final-normalized output of the last fed slot
  std::size_t position = 0;
};

DecodeState start_decoding(const GeneratorModel& model, std::span<const int> history_flat);
void advance(const GeneratorModel& model, DecodeState& state, int token);
// log softmax(logits / tau) for the level the next slot predicts.
std::vector<double> next_log_probs(const GeneratorModel& model, const DecodeState& state);

// Level-constrained beam search over the next item's K tokens. Ties are
// broken by lexicographic token order; output sorted by log-prob descending.
std::vector<BeamHypothesis> beam_search(const GeneratorModel& model,
                                        std::span<const int> history_flat,
                                        std::size_t beam_width);

struct RankedItem {
  std::string item_id;
  double log_prob = 0.0;
};

std::vector<RankedItem> sequences_to_items(const std::vector<BeamHypothesis>& ranked,
                                           const TokenIndex& index, std::size_t cutoff);

enum class OrderMode { identity, reverse, random };

OrderMode parse_order_mode(const std::string& s);
std::vector<std::size_t> order_permutation(OrderMode mode, std::size_t levels,
                                           std::uint64_t seed);
// new[j] = old[perm[j]] for every item, vocabularies permuted alike.
TokenIndex apply_order_ablation(const TokenIndex& index, OrderMode mode, std::uint64_t seed);

std::string curve_csv(const TrainReport& report);

}  // namespace cofirec::generator
