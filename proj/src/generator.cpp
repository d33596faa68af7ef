#include "cofirec/generator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "cofirec/eval.hpp"
#include "cofirec/io.hpp"
#include "cofirec/numerics/adam.hpp"
#include "cofirec/numerics/kernels.hpp"

namespace cofirec::generator {

void GeneratorConfig::validate() const {
  if (d_model == 0 || n_heads == 0 || d_model % n_heads != 0) {
    throw std::invalid_argument("generator: d_model must be a positive multiple of n_heads");
  }
  if (n_layers == 0) {
    throw std::invalid_argument("generator: n_layers must be >= 1");
  }
  if (max_history == 0) {
    throw std::invalid_argument("generator: max_history must be >= 1");
  }
  if (!(temperature > 0.0)) {
    throw std::invalid_argument("generator: temperature must be > 0");
  }
  if (!(learning_rate > 0.0)) {
    throw std::invalid_argument("generator: learning_rate must be > 0");
  }
  if (batch_size == 0) {
    throw std::invalid_argument("generator: batch_size must be >= 1");
  }
  if (beam_width == 0) {
    throw std::invalid_argument("generator: beam_width must be >= 1");
  }
}

GeneratorModel::GeneratorModel(const GeneratorConfig& cfg, std::vector<std::size_t> vocab)
    : config(cfg), vocab_sizes(std::move(vocab)) {
  config.validate();
  if (vocab_sizes.size() < 2) {
    throw std::invalid_argument("generator: need at least two token levels");
  }
  const std::size_t d = config.d_model;
  for (std::size_t k = 0; k < vocab_sizes.size(); ++k) {
    if (vocab_sizes[k] < 1) {
      throw std::invalid_argument("generator: empty vocabulary at level " + std::to_string(k + 1));
    }
    id_tables.emplace_back("E_id" + std::to_string(k + 1), vocab_sizes[k], d);
    head_w.emplace_back("head" + std::to_string(k + 1) + ".w", d, vocab_sizes[k]);
    head_b.emplace_back("head" + std::to_string(k + 1) + ".b", 1, vocab_sizes[k]);
  }
  level_table = Param("E_level", vocab_sizes.size(), d);
  pos_table = Param("E_pos", config.max_history + 1, d);
  for (std::size_t l = 0; l < config.n_layers; ++l) {
    blocks.emplace_back("block" + std::to_string(l), d, config.n_heads, config.ffn_dim());
  }
  final_gamma = Param("final_ln.g", 1, d);
  final_beta = Param("final_ln.b", 1, d);
}

void GeneratorModel::init(std::mt19937_64& rng) {
  std::normal_distribution<double> emb(0.0, 0.1);
  for (auto& t : id_tables) {
    for (double& v : t.value.values()) {
      v = emb(rng);
    }
  }
  for (Param* p : {&level_table, &pos_table}) {
    for (double& v : p->value.values()) {
      v = emb(rng);
    }
  }
  if (!config.use_level_embedding) {
    level_table.value.set_zero();
  }
  if (!config.use_position_embedding) {
    pos_table.value.set_zero();
  }
  for (auto& b : blocks) {
    b.init(rng);
  }
  final_gamma.value.fill(1.0);
  final_beta.value.set_zero();
  const double bound = std::sqrt(1.0 / static_cast<double>(config.d_model));
  std::uniform_real_distribution<double> head(-bound, bound);
  for (auto& w : head_w) {
    for (double& v : w.value.values()) {
      v = head(rng);
    }
  }
  for (auto& b : head_b) {
    b.value.set_zero();
  }
}

std::vector<Param*> GeneratorModel::parameters() {
  std::vector<Param*> out;
  for (auto& t : id_tables) {
    out.push_back(&t);
  }
  out.push_back(&level_table);
  out.push_back(&pos_table);
  for (auto& b : blocks) {
    const auto p = b.parameters();
    out.insert(out.end(), p.begin(), p.end());
  }
  out.push_back(&final_gamma);
  out.push_back(&final_beta);
  for (std::size_t k = 0; k < head_w.size(); ++k) {
    out.push_back(&head_w[k]);
    out.push_back(&head_b[k]);
  }
  return out;
}

std::vector<const Param*> GeneratorModel::parameters() const {
  const auto ps = const_cast<GeneratorModel*>(this)->parameters();
  return {ps.begin(), ps.end()};
}

GeneratorModel make_model(const GeneratorConfig& config, std::vector<std::size_t> vocab_sizes) {
  GeneratorModel model(config, std::move(vocab_sizes));
  std::mt19937_64 rng(config.seed);
  model.init(rng);
  return model;
}

namespace {

void check_token(const GeneratorModel& model, std::size_t slot, int token) {
  const std::size_t k = slot % model.levels();
  if (token < 0 || static_cast<std::size_t>(token) >= model.vocab_sizes[k]) {
    throw std::invalid_argument("token " + std::to_string(token) + " at slot " +
                                std::to_string(slot) + " is outside level " +
                                std::to_string(k + 1) + " vocabulary of size " +
                                std::to_string(model.vocab_sizes[k]));
  }
}

void embed_slot(const GeneratorModel& model, std::size_t slot, int token, std::span<double> out) {
  check_token(model, slot, token);
  const std::size_t k_levels = model.levels();
  const std::size_t t = slot / k_levels;
  const std::size_t k = slot % k_levels;
  if (t >= model.max_items()) {
    throw std::invalid_argument("sequence has more than " + std::to_string(model.max_items()) +
                                " items");
  }
  const auto id = model.id_tables[k].value.row(static_cast<std::size_t>(token));
  std::copy(id.begin(), id.end(), out.begin());
  if (model.config.use_level_embedding) {
    const auto lv = model.level_table.value.row(k);
    for (std::size_t c = 0; c < out.size(); ++c) {
      out[c] += lv[c];
    }
  }
  if (model.config.use_position_embedding) {
    const auto pv = model.pos_table.value.row(t);
    for (std::size_t c = 0; c < out.size(); ++c) {
      out[c] += pv[c];
    }
  }
}

Matrix head_logits(const GeneratorModel& model, std::size_t level, const Matrix& h) {
  Matrix z;
  numerics::kernels::gemm(h, model.head_w[level].value, z);
  const auto b = model.head_b[level].value.row(0);
  for (std::size_t r = 0; r < z.rows(); ++r) {
    auto zr = z.row(r);
    for (std::size_t c = 0; c < zr.size(); ++c) {
      zr[c] += b[c];
    }
  }
  return z;
}

// -log softmax(z / tau)[target]; optionally writes d/dz into `dz` scaled by weight.
double scaled_ce(std::span<const double> z, int target, double tau, double weight,
                 std::span<double> dz) {
  std::vector<double> s(z.begin(), z.end());
  for (double& v : s) {
    v /= tau;
  }
  const double mx = *std::max_element(s.begin(), s.end());
  double sum = 0.0;
  for (double v : s) {
    sum += std::exp(v - mx);
  }
  const double lse = mx + std::log(sum);
  const double loss = lse - s[static_cast<std::size_t>(target)];
  if (!dz.empty()) {
    for (std::size_t c = 0; c < s.size(); ++c) {
      const double p = std::exp(s[c] - lse);
      dz[c] = weight * (p - (static_cast<int>(c) == target ? 1.0 : 0.0)) / tau;
    }
  }
  return loss;
}

SequenceLoss sequence_loss_impl(GeneratorModel& model, std::span<const int> items_flat,
                                std::size_t first_target, double weight, bool grads) {
  const std::size_t k_levels = model.levels();
  if (items_flat.size() % k_levels != 0) {
    throw std::invalid_argument("sequence_loss: length " + std::to_string(items_flat.size()) +
                                " is not a multiple of " + std::to_string(k_levels));
  }
  if (first_target == 0) {
    throw std::invalid_argument("sequence_loss: the first item has no history to predict from");
  }
  const std::size_t n_items = items_flat.size() / k_levels;
  SequenceLoss result;
  if (first_target >= n_items) {
    return result;
  }
  for (std::size_t i = 0; i < items_flat.size(); ++i) {
    check_token(model, i, items_flat[i]);
  }
  const std::size_t len = n_items * k_levels - 1;
  ForwardCache cache;
  const Matrix h = forward_hidden(model, items_flat.first(len), grads ? &cache : nullptr);
  Matrix dh;
  if (grads) {
    dh = Matrix(h.rows(), h.cols());
  }
  const double tau = model.config.temperature;
  for (std::size_t k = 0; k < k_levels; ++k) {
    std::vector<std::size_t> slots;
    for (std::size_t t = first_target; t < n_items; ++t) {
      slots.push_back(t * k_levels + k - 1);
    }
    Matrix hk(slots.size(), h.cols());
    for (std::size_t r = 0; r < slots.size(); ++r) {
      const auto src = h.row(slots[r]);
      std::copy(src.begin(), src.end(), hk.row(r).begin());
    }
    const Matrix z = head_logits(model, k, hk);
    Matrix dz;
    if (grads) {
      dz = Matrix(z.rows(), z.cols());
    }
    for (std::size_t r = 0; r < slots.size(); ++r) {
      const int target = items_flat[slots[r] + 1];
      result.loss += scaled_ce(z.row(r), target, tau, weight,
                               grads ? dz.row(r) : std::span<double>{});
    }
    if (grads) {
      numerics::kernels::gemm_tn(hk, dz, model.head_w[k].grad, true);
      auto gb = model.head_b[k].grad.row(0);
      for (std::size_t r = 0; r < dz.rows(); ++r) {
        const auto dzr = dz.row(r);
        for (std::size_t c = 0; c < gb.size(); ++c) {
          gb[c] += dzr[c];
        }
      }
      Matrix dhk;
      numerics::kernels::gemm_nt(dz, model.head_w[k].value, dhk);
      for (std::size_t r = 0; r < slots.size(); ++r) {
        auto dst = dh.row(slots[r]);
        const auto src = dhk.row(r);
        for (std::size_t c = 0; c < dst.size(); ++c) {
          dst[c] += src[c];
        }
      }
    }
  }
  result.targets = n_items - first_target;
  if (!std::isfinite(result.loss)) {
    throw std::runtime_error("generator: non-finite loss");
  }
  if (grads) {
    Matrix dx = numerics::layer_norm_backward(cache.final_ln, dh, model.final_gamma,
                                              model.final_beta);
    for (std::size_t l = model.blocks.size(); l-- > 0;) {
      dx = model.blocks[l].backward(cache.blocks[l], dx);
    }
    for (std::size_t i = 0; i < len; ++i) {
      const std::size_t t = i / k_levels;
      const std::size_t k = i % k_levels;
      const auto src = dx.row(i);
      auto id = model.id_tables[k].grad.row(static_cast<std::size_t>(items_flat[i]));
      for (std::size_t c = 0; c < src.size(); ++c) {
        id[c] += src[c];
      }
      if (model.config.use_level_embedding) {
        auto lv = model.level_table.grad.row(k);
        for (std::size_t c = 0; c < src.size(); ++c) {
          lv[c] += src[c];
        }
      }
      if (model.config.use_position_embedding) {
        auto pv = model.pos_table.grad.row(t);
        for (std::size_t c = 0; c < src.size(); ++c) {
          pv[c] += src[c];
        }
      }
    }
  }
  return result;
}

}  // namespace

Matrix build_input(const GeneratorModel& model, std::span<const int> tokens) {
  Matrix x(tokens.size(), model.d_model());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    embed_slot(model, i, tokens[i], x.row(i));
  }
  return x;
}

Matrix forward_hidden(const GeneratorModel& model, std::span<const int> tokens,
                      ForwardCache* cache) {
  if (tokens.empty()) {
    throw std::invalid_argument("forward: empty token sequence");
  }
  Matrix x = build_input(model, tokens);
  if (cache != nullptr) {
    cache->input = x;
    cache->blocks.assign(model.blocks.size(), {});
  }
  for (std::size_t l = 0; l < model.blocks.size(); ++l) {
    x = model.blocks[l].forward(x, true, cache != nullptr ? &cache->blocks[l] : nullptr);
  }
  if (cache != nullptr) {
    cache->final_in = x;
  }
  return numerics::layer_norm_forward(x, model.final_gamma, model.final_beta,
                                      cache != nullptr ? &cache->final_ln : nullptr);
}

std::vector<std::vector<double>> forward(const GeneratorModel& model,
                                         std::span<const int> tokens) {
  const Matrix h = forward_hidden(model, tokens);
  std::vector<std::vector<double>> out;
  out.reserve(h.rows());
  for (std::size_t i = 0; i < h.rows(); ++i) {
    Matrix row(1, h.cols());
    std::copy(h.row(i).begin(), h.row(i).end(), row.row(0).begin());
    const Matrix z = head_logits(model, next_level(i, model.levels()), row);
    out.emplace_back(z.row(0).begin(), z.row(0).end());
  }
  return out;
}

double rank_loss(const std::vector<std::vector<double>>& level_logits,
                 std::span<const int> targets, double tau) {
  if (!(tau > 0.0)) {
    throw std::invalid_argument("rank_loss: temperature must be > 0");
  }
  if (level_logits.size() != targets.size()) {
    throw std::invalid_argument("rank_loss: one target per level required");
  }
  double loss = 0.0;
  for (std::size_t k = 0; k < targets.size(); ++k) {
    if (targets[k] < 0 || static_cast<std::size_t>(targets[k]) >= level_logits[k].size()) {
      throw std::invalid_argument("rank_loss: target out of range at level " +
                                  std::to_string(k + 1));
    }
    loss += scaled_ce(level_logits[k], targets[k], tau, 0.0, {});
  }
  return loss;
}

double rank_loss(const std::vector<std::vector<std::vector<double>>>& batch_logits,
                 const std::vector<TokenTuple>& targets, double tau) {
  if (batch_logits.empty() || batch_logits.size() != targets.size()) {
    throw std::invalid_argument("rank_loss: batch and targets must be non-empty and aligned");
  }
  double sum = 0.0;
  for (std::size_t b = 0; b < targets.size(); ++b) {
    sum += rank_loss(batch_logits[b], targets[b], tau);
  }
  return sum / static_cast<double>(targets.size());
}

SequenceLoss sequence_loss(GeneratorModel& model, std::span<const int> items_flat,
                           std::size_t first_target, double weight) {
  return sequence_loss_impl(model, items_flat, first_target, weight, weight > 0.0);
}

SequenceLoss sequence_loss(const GeneratorModel& model, std::span<const int> items_flat,
                           std::size_t first_target) {
  // No gradients are written on this path.
  return sequence_loss_impl(const_cast<GeneratorModel&>(model), items_flat, first_target, 0.0,
                            false);
}

std::vector<int> flatten(const std::vector<std::string>& items, const TokenIndex& index) {
  std::vector<int> out;
  out.reserve(items.size() * index.levels());
  for (const auto& id : items) {
    const auto& t = index.at(id);
    out.insert(out.end(), t.begin(), t.end());
  }
  return out;
}

namespace {

struct ValidationCase {
  std::vector<int> history;
  std::vector<int> sequence;  // history + target
  std::string target;
};

double mean_valid_loss(const GeneratorModel& model, const std::vector<ValidationCase>& cases) {
  double sum = 0.0;
  for (const auto& c : cases) {
    sum += sequence_loss(model, c.sequence, c.sequence.size() / model.levels() - 1).loss;
  }
  return sum / static_cast<double>(cases.size());
}

double mean_valid_ndcg(const GeneratorModel& model, const TokenIndex& index,
                       const std::vector<ValidationCase>& cases) {
  std::vector<double> scores(cases.size());
  const long n = static_cast<long>(cases.size());
#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < n; ++i) {
    const auto& c = cases[static_cast<std::size_t>(i)];
    const auto ranked =
        sequences_to_items(beam_search(model, c.history, model.config.beam_width), index, 10);
    std::vector<std::string> ids;
    for (const auto& r : ranked) {
      ids.push_back(r.item_id);
    }
    scores[static_cast<std::size_t>(i)] = eval::ndcg_at_k(ids, c.target, 10);
  }
  return std::accumulate(scores.begin(), scores.end(), 0.0) / static_cast<double>(cases.size());
}

}  // namespace

TrainReport train_generator(GeneratorModel& model, const corpus::DatasetSplit& split,
                            const TokenIndex& index) {
  const GeneratorConfig& config = model.config;
  config.validate();
  if (index.vocab_sizes != model.vocab_sizes) {
    throw std::invalid_argument("train_generator: token index vocabularies do not match the model");
  }
  const std::size_t window = model.max_items();
  std::vector<std::vector<int>> train;
  for (const auto& log : split.train) {
    const auto items = corpus::recent(log.item_ids, window);
    if (items.size() >= 2) {
      train.push_back(flatten(items, index));
    }
  }
  std::vector<ValidationCase> valid;
  for (const auto& ht : split.valid) {
    if (config.validation_users != 0 && valid.size() >= config.validation_users) {
      break;
    }
    ValidationCase c;
    c.history = flatten(corpus::recent(ht.history, window - 1), index);
    if (c.history.empty()) {
      continue;
    }
    c.sequence = c.history;
    const auto& t = index.at(ht.target);
    c.sequence.insert(c.sequence.end(), t.begin(), t.end());
    c.target = ht.target;
    valid.push_back(std::move(c));
  }

  TrainReport report;
  if (config.epochs == 0 || train.empty()) {
    return report;
  }
  auto params = model.parameters();
  numerics::AdamConfig adam_config;
  adam_config.learning_rate = config.learning_rate;
  numerics::Adam adam(params, adam_config);
  std::mt19937_64 rng(config.seed + 1);

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  double best_score = -std::numeric_limits<double>::infinity();
  std::vector<Matrix> best_values;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t target_count = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      std::size_t batch_targets = 0;
      for (std::size_t i = start; i < end; ++i) {
        batch_targets += train[order[i]].size() / model.levels() - 1;
      }
      const double weight = 1.0 / static_cast<double>(batch_targets);
      numerics::zero_grads(params);
      for (std::size_t i = start; i < end; ++i) {
        const auto res = sequence_loss(model, train[order[i]], 1, weight);
        loss_sum += res.loss;
        target_count += res.targets;
      }
      adam.step();
    }
    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = loss_sum / static_cast<double>(target_count);
    if (!std::isfinite(stats.train_loss)) {
      throw std::runtime_error("generator training diverged at epoch " + std::to_string(epoch));
    }
    double score = static_cast<double>(epoch);  // no validation data: keep the last epoch
    if (!valid.empty()) {
      stats.valid_loss = mean_valid_loss(model, valid);
      score = -stats.valid_loss;
      if (config.selection == SelectionMetric::ndcg10) {
        stats.valid_ndcg10 = mean_valid_ndcg(model, index, valid);
        score = stats.valid_ndcg10;
      }
    }
    report.curve.push_back(stats);
    if (score > best_score) {
      best_score = score;
      report.best_epoch = epoch;
      best_values.clear();
      for (const Param* p : params) {
        best_values.push_back(p->value);
      }
    }
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    params[i]->value = best_values[i];
  }
  return report;
}

DecodeState start_decoding(const GeneratorModel& model, std::span<const int> history_flat) {
  if (history_flat.empty() || history_flat.size() % model.levels() != 0) {
    throw std::invalid_argument("decoding needs a non-empty history of whole items");
  }
  DecodeState state;
  state.kv.resize(model.blocks.size());
  for (int token : history_flat) {
    advance(model, state, token);
  }
  return state;
}

void advance(const GeneratorModel& model, DecodeState& state, int token) {
  Matrix x(1, model.d_model());
  embed_slot(model, state.position, token, x.row(0));
  for (std::size_t l = 0; l < model.blocks.size(); ++l) {
    x = model.blocks[l].step(x, state.kv[l]);
  }
  state.hidden = numerics::layer_norm_forward(x, model.final_gamma, model.final_beta);
  ++state.position;
}

std::vector<double> next_log_probs(const GeneratorModel& model, const DecodeState& state) {
  if (state.position == 0) {
    throw std::invalid_argument("next_log_probs: nothing has been decoded yet");
  }
  const std::size_t level = state.position % model.levels();
  const Matrix z = head_logits(model, level, state.hidden);
  std::vector<double> lp(z.row(0).begin(), z.row(0).end());
  for (double& v : lp) {
    v /= model.config.temperature;
  }
  numerics::log_softmax_inplace(lp);
  return lp;
}

std::vector<BeamHypothesis> beam_search(const GeneratorModel& model,
                                        std::span<const int> history_flat,
                                        std::size_t beam_width) {
  if (beam_width == 0) {
    throw std::invalid_argument("beam_search: beam width must be >= 1");
  }
  if (history_flat.size() / model.levels() >= model.max_items()) {
    throw std::invalid_argument("beam_search: history longer than " +
                                std::to_string(model.max_items() - 1) + " items");
  }
  struct Beam {
    TokenTuple tokens;
    double log_prob = 0.0;
    DecodeState state;
  };
  struct Candidate {
    std::size_t parent;
    int token;
    double log_prob;
  };
  std::vector<Beam> beams(1);
  beams[0].state = start_decoding(model, history_flat);
  const std::size_t k_levels = model.levels();
  for (std::size_t k = 0; k < k_levels; ++k) {
    std::vector<Candidate> cands;
    cands.reserve(beams.size() * model.vocab_sizes[k]);
    for (std::size_t b = 0; b < beams.size(); ++b) {
      const auto lp = next_log_probs(model, beams[b].state);
      for (std::size_t v = 0; v < lp.size(); ++v) {
        cands.push_back({b, static_cast<int>(v), beams[b].log_prob + lp[v]});
      }
    }
    const auto better = [&](const Candidate& a, const Candidate& b) {
      if (a.log_prob != b.log_prob) {
        return a.log_prob > b.log_prob;
      }
      if (a.parent != b.parent) {
        return beams[a.parent].tokens < beams[b.parent].tokens;
      }
      return a.token < b.token;
    };
    const std::size_t keep = std::min(beam_width, cands.size());
    std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(keep),
                      cands.end(), better);
    std::vector<Beam> next;
    next.reserve(keep);
    for (std::size_t i = 0; i < keep; ++i) {
      const auto& c = cands[i];
      Beam nb;
      nb.tokens = beams[c.parent].tokens;
      nb.tokens.push_back(c.token);
      nb.log_prob = c.log_prob;
      if (k + 1 < k_levels) {
        nb.state = beams[c.parent].state;
        advance(model, nb.state, c.token);
      }
      next.push_back(std::move(nb));
    }
    beams = std::move(next);
  }
  std::vector<BeamHypothesis> out;
  out.reserve(beams.size());
  for (auto& b : beams) {
    out.push_back({std::move(b.tokens), b.log_prob});
  }
  return out;
}

std::vector<RankedItem> sequences_to_items(const std::vector<BeamHypothesis>& ranked,
                                           const TokenIndex& index, std::size_t cutoff) {
  std::vector<RankedItem> out;
  for (const auto& hyp : ranked) {
    if (out.size() >= cutoff) {
      break;
    }
    const auto it = index.reverse.find(hyp.tokens);
    if (it == index.reverse.end()) {
      continue;
    }
    for (const auto& id : it->second) {
      if (out.size() >= cutoff) {
        break;
      }
      out.push_back({id, hyp.log_prob});
    }
  }
  return out;
}

OrderMode parse_order_mode(const std::string& s) {
  if (s == "identity") {
    return OrderMode::identity;
  }
  if (s == "reverse") {
    return OrderMode::reverse;
  }
  if (s == "random") {
    return OrderMode::random;
  }
  throw std::invalid_argument("unknown order mode '" + s + "' (identity, reverse, random)");
}

std::vector<std::size_t> order_permutation(OrderMode mode, std::size_t levels,
                                           std::uint64_t seed) {
  std::vector<std::size_t> perm(levels);
  std::iota(perm.begin(), perm.end(), 0);
  if (mode == OrderMode::reverse) {
    std::reverse(perm.begin(), perm.end());
  } else if (mode == OrderMode::random) {
    std::mt19937_64 rng(seed);
    std::shuffle(perm.begin(), perm.end(), rng);
  }
  return perm;
}

TokenIndex apply_order_ablation(const TokenIndex& index, OrderMode mode, std::uint64_t seed) {
  const auto perm = order_permutation(mode, index.levels(), seed);
  TokenIndex out;
  for (std::size_t j = 0; j < perm.size(); ++j) {
    out.vocab_sizes.push_back(index.vocab_sizes[perm[j]]);
  }
  for (const auto& [id, tuple] : index.forward) {
    TokenTuple t(perm.size());
    for (std::size_t j = 0; j < perm.size(); ++j) {
      t[j] = tuple[perm[j]];
    }
    out.add(id, std::move(t));
  }
  return out;
}

std::string curve_csv(const TrainReport& report) {
  std::string out = "epoch,train_loss,valid_loss,valid_ndcg10\n";
  for (const auto& s : report.curve) {
    out += std::to_string(s.epoch) + "," + io::format_double(s.train_loss) + "," +
           io::format_double(s.valid_loss) + "," + io::format_double(s.valid_ndcg10) + "\n";
  }
  return out;
}

}  // namespace cofirec::generator
