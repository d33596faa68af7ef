#include "cofirec/tokenizer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

#include "cofirec/io.hpp"
#include "cofirec/numerics/adam.hpp"
#include "cofirec/numerics/kernels.hpp"

namespace cofirec::tokenizer {

void TokenizerConfig::validate() const {
  if (codebook_sizes.size() < 2) {
    throw std::invalid_argument("tokenizer: need at least two levels");
  }
  for (std::size_t v : codebook_sizes) {
    if (v < 2) {
      throw std::invalid_argument("tokenizer: every codebook needs at least 2 codes");
    }
  }
  if (code_dim == 0) {
    throw std::invalid_argument("tokenizer: code_dim must be positive");
  }
  if (!(mu > 0.0)) {
    throw std::invalid_argument("tokenizer: mu must be > 0");
  }
  if (!(learning_rate > 0.0)) {
    throw std::invalid_argument("tokenizer: learning_rate must be > 0");
  }
  if (batch_size == 0) {
    throw std::invalid_argument("tokenizer: batch_size must be positive");
  }
  if (init_noise < 0.0) {
    throw std::invalid_argument("tokenizer: init_noise must be >= 0");
  }
}

namespace {

std::vector<std::size_t> encoder_dims(std::size_t in, const TokenizerConfig& config) {
  std::vector<std::size_t> dims{in};
  dims.insert(dims.end(), config.hidden.begin(), config.hidden.end());
  dims.push_back(config.code_dim);
  return dims;
}

std::vector<std::size_t> decoder_dims(std::size_t out, const TokenizerConfig& config) {
  std::vector<std::size_t> dims{config.code_dim};
  dims.insert(dims.end(), config.hidden.rbegin(), config.hidden.rend());
  dims.push_back(out);
  return dims;
}

Matrix gather_rows(const Matrix& m, const std::vector<int>& rows) {
  Matrix out(rows.size(), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto src = m.row(static_cast<std::size_t>(rows[i]));
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

std::vector<int> assign(const Matrix& h, const Codebook& book) {
  std::vector<int> idx(h.rows());
  std::vector<double> dist(h.rows());
  numerics::kernels::nearest_rows(h, book.codes.value, idx, dist);
  return idx;
}

}  // namespace

TokenizerModel::TokenizerModel(const TokenizerConfig& config, std::size_t d_text,
                               std::size_t d_cf)
    : mu(config.mu) {
  config.validate();
  const std::size_t k_levels = config.levels();
  kinds.assign(k_levels, LevelKind::semantic);
  if (!config.replace_cf_with_text) {
    kinds.back() = LevelKind::cf;
  }
  f_sem = numerics::Mlp("f_sem", encoder_dims(d_text, config));
  g_sem = numerics::Mlp("g_sem", decoder_dims(d_text, config));
  if (kinds.back() == LevelKind::cf) {
    f_cf = numerics::Mlp("f_cf", encoder_dims(d_cf, config));
    g_cf = numerics::Mlp("g_cf", decoder_dims(d_cf, config));
  }
  for (std::size_t k = 0; k < k_levels; ++k) {
    Codebook book;
    book.level = static_cast<int>(k + 1);
    book.codes = Param("codebook" + std::to_string(k + 1), config.codebook_sizes[k],
                       config.code_dim);
    codebooks.push_back(std::move(book));
  }
}

void TokenizerModel::init(std::mt19937_64& rng) {
  f_sem.init(rng);
  g_sem.init(rng);
  if (!f_cf.layers().empty()) {
    f_cf.init(rng);
    g_cf.init(rng);
  }
}

std::size_t TokenizerModel::input_dim(std::size_t level) const {
  return encoder(level).in_dim();
}

const numerics::Mlp& TokenizerModel::encoder(std::size_t level) const {
  return kinds.at(level) == LevelKind::cf ? f_cf : f_sem;
}
const numerics::Mlp& TokenizerModel::decoder(std::size_t level) const {
  return kinds.at(level) == LevelKind::cf ? g_cf : g_sem;
}
numerics::Mlp& TokenizerModel::encoder(std::size_t level) {
  return kinds.at(level) == LevelKind::cf ? f_cf : f_sem;
}
numerics::Mlp& TokenizerModel::decoder(std::size_t level) {
  return kinds.at(level) == LevelKind::cf ? g_cf : g_sem;
}

Matrix TokenizerModel::encode(std::size_t level, const Matrix& e) const {
  return encoder(level).forward(e);
}

std::vector<Param*> TokenizerModel::parameters() {
  std::vector<Param*> out;
  for (auto* mlp : {&f_sem, &g_sem, &f_cf, &g_cf}) {
    const auto p = mlp->parameters();
    out.insert(out.end(), p.begin(), p.end());
  }
  for (auto& book : codebooks) {
    out.push_back(&book.codes);
  }
  return out;
}

std::vector<const Param*> TokenizerModel::parameters() const {
  std::vector<const Param*> out;
  for (const auto* mlp : {&f_sem, &g_sem, &f_cf, &g_cf}) {
    const auto p = mlp->parameters();
    out.insert(out.end(), p.begin(), p.end());
  }
  for (const auto& book : codebooks) {
    out.push_back(&book.codes);
  }
  return out;
}

TokenizerInputs TokenizerInputs::subset(const std::vector<std::size_t>& rows) const {
  TokenizerInputs out;
  out.item_ids.reserve(rows.size());
  for (std::size_t r : rows) {
    out.item_ids.push_back(item_ids.at(r));
  }
  for (const auto& level : levels) {
    Matrix m(rows.size(), level.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto src = level.row(rows[i]);
      std::copy(src.begin(), src.end(), m.row(i).begin());
    }
    out.levels.push_back(std::move(m));
  }
  return out;
}

Quantized quantize(std::span<const double> h, const Codebook& codebook) {
  if (h.size() != codebook.dim()) {
    throw std::invalid_argument("quantize: vector has dimension " + std::to_string(h.size()) +
                                ", codebook has " + std::to_string(codebook.dim()));
  }
  Quantized q;
  q.distance2 = numerics::squared_distance(h, codebook.codes.value.row(0));
  for (std::size_t j = 1; j < codebook.size(); ++j) {
    const double d = numerics::squared_distance(h, codebook.codes.value.row(j));
    if (d < q.distance2) {
      q.distance2 = d;
      q.index = static_cast<int>(j);
    }
  }
  const auto code = codebook.codes.value.row(static_cast<std::size_t>(q.index));
  q.code.assign(code.begin(), code.end());
  return q;
}

LossResult tokenizer_loss(TokenizerModel& model, const TokenizerInputs& batch,
                          bool compute_gradients, const Assignments* fixed) {
  const std::size_t n = batch.size();
  if (n == 0) {
    throw std::invalid_argument("tokenizer_loss: empty batch");
  }
  if (batch.levels.size() != model.levels()) {
    throw std::invalid_argument("tokenizer_loss: batch has " +
                                std::to_string(batch.levels.size()) + " levels, model has " +
                                std::to_string(model.levels()));
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  LossResult result;
  result.assignments.resize(model.levels());
  for (std::size_t k = 0; k < model.levels(); ++k) {
    const Matrix& e = batch.levels[k];
    if (e.rows() != n) {
      throw std::invalid_argument("tokenizer_loss: level " + std::to_string(k + 1) +
                                  " row count mismatch");
    }
    auto& book = model.codebooks[k];
    numerics::MlpCache enc_cache;
    numerics::MlpCache dec_cache;
    const Matrix h = model.encoder(k).forward(e, &enc_cache);
    if (!h.all_finite()) {
      throw std::runtime_error("tokenizer_loss: non-finite encoder output at level " +
                               std::to_string(k + 1));
    }
    std::vector<int> idx = fixed != nullptr ? fixed->at(k) : assign(h, book);
    if (idx.size() != n) {
      throw std::invalid_argument("tokenizer_loss: fixed assignment size mismatch");
    }
    const Matrix c = gather_rows(book.codes.value, idx);
    const Matrix r = model.decoder(k).forward(c, &dec_cache);
    if (!r.all_finite()) {
      throw std::runtime_error("tokenizer_loss: non-finite reconstruction at level " +
                               std::to_string(k + 1));
    }
    double recon = 0.0;
    for (std::size_t i = 0; i < e.size(); ++i) {
      const double d = e.values()[i] - r.values()[i];
      recon += d * d;
    }
    double commit = 0.0;
    for (std::size_t i = 0; i < h.size(); ++i) {
      const double d = h.values()[i] - c.values()[i];
      commit += d * d;
    }
    result.parts.reconstruction += recon * inv_n;
    result.parts.codebook_commitment += commit * inv_n;
    result.parts.encoder_commitment += model.mu * commit * inv_n;

    if (compute_gradients) {
      Matrix d_r(r.rows(), r.cols());
      for (std::size_t i = 0; i < d_r.size(); ++i) {
        d_r.values()[i] = -2.0 * (e.values()[i] - r.values()[i]) * inv_n;
      }
      const Matrix d_c = model.decoder(k).backward(dec_cache, d_r);
      Matrix d_h = d_c;
      for (std::size_t i = 0; i < n; ++i) {
        auto grad_row = book.codes.grad.row(static_cast<std::size_t>(idx[i]));
        for (std::size_t j = 0; j < c.cols(); ++j) {
          const double diff = c(i, j) - h(i, j);
          grad_row[j] += d_c(i, j) + 2.0 * diff * inv_n;
          d_h(i, j) += -2.0 * model.mu * diff * inv_n;
        }
      }
      model.encoder(k).backward(enc_cache, d_h);
    }
    result.assignments[k] = std::move(idx);
  }
  if (!std::isfinite(result.parts.total())) {
    throw std::runtime_error("tokenizer_loss: non-finite loss");
  }
  return result;
}

namespace {

void seed_codes(Codebook& book, const Matrix& h, const std::vector<std::size_t>& targets,
                double noise, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<std::size_t> rows(h.rows());
  std::iota(rows.begin(), rows.end(), 0);
  std::shuffle(rows.begin(), rows.end(), rng);
  for (std::size_t j = 0; j < targets.size(); ++j) {
    const auto src = h.row(rows[j % rows.size()]);
    auto dst = book.codes.value.row(targets[j]);
    for (std::size_t c = 0; c < dst.size(); ++c) {
      dst[c] = src[c] + noise * gauss(rng);
    }
  }
}

}  // namespace

TrainedTokenizer train_tokenizer(const TokenizerInputs& inputs, const TokenizerConfig& config,
                                 std::size_t d_text, std::size_t d_cf) {
  config.validate();
  const std::size_t n = inputs.size();
  if (n == 0) {
    throw std::invalid_argument("train_tokenizer: no items");
  }
  TrainedTokenizer out;
  out.model = TokenizerModel(config, d_text, d_cf);
  auto& model = out.model;
  if (inputs.levels.size() != model.levels()) {
    throw std::invalid_argument("train_tokenizer: inputs have " +
                                std::to_string(inputs.levels.size()) + " levels, config has " +
                                std::to_string(model.levels()));
  }
  for (std::size_t k = 0; k < model.levels(); ++k) {
    if (inputs.levels[k].rows() != n || inputs.levels[k].cols() != model.input_dim(k)) {
      throw std::invalid_argument("train_tokenizer: level " + std::to_string(k + 1) +
                                  " embeddings have shape " +
                                  numerics::shape_string(inputs.levels[k]));
    }
  }

  std::mt19937_64 rng(config.seed);
  model.init(rng);

  const bool full_batch = n <= config.full_batch_limit;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  auto make_batches = [&]() {
    std::vector<std::vector<std::size_t>> batches;
    if (full_batch) {
      batches.push_back(order);
      return batches;
    }
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t end = std::min(n, start + config.batch_size);
      batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                           order.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return batches;
  };

  auto batches = make_batches();
  {
    const TokenizerInputs first = inputs.subset(batches.front());
    for (std::size_t k = 0; k < model.levels(); ++k) {
      auto& book = model.codebooks[k];
      std::vector<std::size_t> all(book.size());
      std::iota(all.begin(), all.end(), 0);
      seed_codes(book, model.encode(k, first.levels[k]), all, config.init_noise, rng);
    }
  }

  auto params = model.parameters();
  numerics::AdamConfig adam_config;
  adam_config.learning_rate = config.learning_rate;
  numerics::Adam adam(params, adam_config);

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    if (epoch > 0) {
      batches = make_batches();
    }
    std::vector<std::vector<char>> used(model.levels());
    for (std::size_t k = 0; k < model.levels(); ++k) {
      used[k].assign(model.codebooks[k].size(), 0);
    }
    double weighted = 0.0;
    TokenizerInputs batch;
    for (const auto& rows : batches) {
      batch = inputs.subset(rows);
      numerics::zero_grads(params);
      LossResult res;
      try {
        res = tokenizer_loss(model, batch, true);
      } catch (const std::runtime_error& err) {
        throw std::runtime_error("tokenizer training diverged at epoch " +
                                 std::to_string(epoch + 1) + ": " + err.what());
      }
      adam.step();
      weighted += res.parts.total() * static_cast<double>(rows.size());
      for (std::size_t k = 0; k < model.levels(); ++k) {
        for (int j : res.assignments[k]) {
          used[k][static_cast<std::size_t>(j)] = 1;
        }
      }
    }
    const double mean = weighted / static_cast<double>(n);
    if (!std::isfinite(mean)) {
      throw std::runtime_error("tokenizer training diverged at epoch " + std::to_string(epoch + 1));
    }
    out.curve.emplace_back(epoch + 1, mean);

    if (config.reseed_dead_codes) {
      for (std::size_t k = 0; k < model.levels(); ++k) {
        std::vector<std::size_t> dead;
        for (std::size_t j = 0; j < used[k].size(); ++j) {
          if (used[k][j] == 0) {
            dead.push_back(j);
          }
        }
        if (dead.empty()) {
          continue;
        }
        seed_codes(model.codebooks[k], model.encode(k, batch.levels[k]), dead, config.init_noise,
                   rng);
        out.reseeded_codes += dead.size();
      }
    }
  }
  return out;
}

void TokenIndex::add(const std::string& item_id, TokenTuple tokens) {
  if (tokens.size() != vocab_sizes.size()) {
    throw std::invalid_argument("token tuple for " + item_id + " has " +
                                std::to_string(tokens.size()) + " tokens, expected " +
                                std::to_string(vocab_sizes.size()));
  }
  for (std::size_t k = 0; k < tokens.size(); ++k) {
    if (tokens[k] < 0 || static_cast<std::size_t>(tokens[k]) >= vocab_sizes[k]) {
      throw std::invalid_argument("token " + std::to_string(tokens[k]) + " of " + item_id +
                                  " is outside level " + std::to_string(k + 1) + " vocabulary");
    }
  }
  if (forward.count(item_id) != 0) {
    throw std::invalid_argument("duplicate item in token index: " + item_id);
  }
  auto& bucket = reverse[tokens];
  bucket.insert(std::upper_bound(bucket.begin(), bucket.end(), item_id), item_id);
  forward.emplace(item_id, std::move(tokens));
}

const TokenTuple& TokenIndex::at(const std::string& item_id) const {
  const auto it = forward.find(item_id);
  if (it == forward.end()) {
    throw std::out_of_range("item " + item_id + " has no token tuple");
  }
  return it->second;
}

TokenIndex tokenize_corpus(const TokenizerModel& model, const TokenizerInputs& inputs) {
  if (inputs.levels.size() != model.levels()) {
    throw std::invalid_argument("tokenize_corpus: level count mismatch");
  }
  TokenIndex index;
  for (const auto& book : model.codebooks) {
    index.vocab_sizes.push_back(book.size());
  }
  std::vector<std::vector<int>> per_level;
  for (std::size_t k = 0; k < model.levels(); ++k) {
    per_level.push_back(assign(model.encode(k, inputs.levels[k]), model.codebooks[k]));
  }
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    TokenTuple t(model.levels());
    for (std::size_t k = 0; k < model.levels(); ++k) {
      t[k] = per_level[k][i];
    }
    index.add(inputs.item_ids[i], std::move(t));
  }
  return index;
}

double collision_rate(const TokenIndex& index) {
  if (index.forward.empty()) {
    throw std::invalid_argument("collision_rate: empty index");
  }
  std::size_t colliding = 0;
  for (const auto& [tuple, ids] : index.reverse) {
    if (ids.size() > 1) {
      colliding += ids.size();
    }
  }
  return static_cast<double>(colliding) / static_cast<double>(index.forward.size());
}

std::vector<double> utilization(const TokenIndex& index) {
  if (index.forward.empty()) {
    throw std::invalid_argument("utilization: empty index");
  }
  std::vector<double> out;
  for (std::size_t k = 0; k < index.levels(); ++k) {
    std::set<int> seen;
    for (const auto& [id, tuple] : index.forward) {
      seen.insert(tuple[k]);
    }
    out.push_back(static_cast<double>(seen.size()) / static_cast<double>(index.vocab_sizes[k]));
  }
  return out;
}

std::vector<double> prefix_purity(const TokenIndex& index,
                                  const std::map<std::string, std::string>& labels,
                                  std::size_t max_prefix) {
  std::vector<double> out;
  for (std::size_t len = 1; len <= max_prefix && len <= index.levels(); ++len) {
    std::map<TokenTuple, std::map<std::string, std::size_t>> groups;
    for (const auto& [id, tuple] : index.forward) {
      const auto label = labels.find(id);
      if (label == labels.end()) {
        continue;
      }
      TokenTuple prefix(tuple.begin(), tuple.begin() + static_cast<std::ptrdiff_t>(len));
      ++groups[prefix][label->second];
    }
    double sum = 0.0;
    for (const auto& [prefix, counts] : groups) {
      std::size_t total = 0;
      std::size_t best = 0;
      for (const auto& [label, c] : counts) {
        total += c;
        best = std::max(best, c);
      }
      sum += static_cast<double>(best) / static_cast<double>(total);
    }
    out.push_back(groups.empty() ? 0.0 : sum / static_cast<double>(groups.size()));
  }
  return out;
}

std::string index_to_text(const TokenIndex& index) {
  std::string out = "#vocab";
  for (std::size_t v : index.vocab_sizes) {
    out += " " + std::to_string(v);
  }
  out.push_back('\n');
  for (const auto& [id, tuple] : index.forward) {
    out += id;
    for (int t : tuple) {
      out += " " + std::to_string(t);
    }
    out.push_back('\n');
  }
  return out;
}

TokenIndex index_from_text(std::string_view text) {
  TokenIndex index;
  bool have_header = false;
  std::size_t pos = 0;
  std::size_t lineno = 0;
  while (pos < text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    const auto fields = io::split_ws(text.substr(pos, end - pos));
    pos = end + 1;
    ++lineno;
    if (fields.empty()) {
      continue;
    }
    if (fields[0] == "#vocab") {
      for (std::size_t i = 1; i < fields.size(); ++i) {
        index.vocab_sizes.push_back(static_cast<std::size_t>(io::parse_int(fields[i])));
      }
      have_header = true;
      continue;
    }
    if (!have_header) {
      throw std::runtime_error("token file: missing '#vocab' header before line " +
                               std::to_string(lineno));
    }
    TokenTuple t;
    for (std::size_t i = 1; i < fields.size(); ++i) {
      t.push_back(static_cast<int>(io::parse_int(fields[i])));
    }
    try {
      index.add(std::string(fields[0]), std::move(t));
    } catch (const std::invalid_argument& err) {
      throw std::runtime_error("token file line " + std::to_string(lineno) + ": " + err.what());
    }
  }
  if (!have_header) {
    throw std::runtime_error("token file: missing '#vocab' header");
  }
  return index;
}

void save_index(const std::filesystem::path& path, const TokenIndex& index) {
  io::write_file(path, index_to_text(index));
}

TokenIndex load_index(const std::filesystem::path& path) {
  return index_from_text(io::read_file(path));
}

std::string analytics_csv(const TokenIndex& index,
                          const std::map<std::string, std::string>& labels) {
  std::string out = "level,metric,value\n";
  const auto util = utilization(index);
  for (std::size_t k = 0; k < util.size(); ++k) {
    out += std::to_string(k + 1) + ",utilization," + io::format_double(util[k]) + "\n";
  }
  out += "all,collision_rate," + io::format_double(collision_rate(index)) + "\n";
  out += "all,items," + std::to_string(index.forward.size()) + "\n";
  const auto purity = prefix_purity(index, labels);
  for (std::size_t p = 0; p < purity.size(); ++p) {
    out += std::to_string(p + 1) + ",prefix_purity," + io::format_double(purity[p]) + "\n";
  }
  return out;
}

}  // namespace cofirec::tokenizer
