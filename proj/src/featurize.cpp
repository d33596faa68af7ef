#include "cofirec/featurize.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cctype>
#include <cmath>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "cofirec/io.hpp"
#include "cofirec/numerics/kernels.hpp"

namespace cofirec::featurize {

using numerics::Matrix;

void FeaturizerConfig::validate() const {
  if (d_text < 2 || d_cf < 2) {
    throw std::invalid_argument("featurizer: d_text and d_cf must be >= 2");
  }
  if (hash_buckets < d_text) {
    throw std::invalid_argument("featurizer: hash_buckets must be >= d_text");
  }
  if (cooccurrence_window == 0) {
    throw std::invalid_argument("featurizer: cooccurrence_window must be >= 1");
  }
  for (std::size_t n : ngram_sizes) {
    if (n == 0) {
      throw std::invalid_argument("featurizer: n-gram sizes must be >= 1");
    }
  }
}

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

TextEmbedder::TextEmbedder(FeaturizerConfig config)
    : config_(std::move(config)), projection_(config_.hash_buckets, config_.d_text) {
  config_.validate();
  std::mt19937_64 rng(config_.projection_seed);
  std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(config_.d_text)));
  for (double& v : projection_.values()) {
    v = normal(rng);
  }
}

std::vector<double> TextEmbedder::embed(std::string_view text, int level) const {
  std::vector<std::string> words;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c) != 0 || c >= 0x80) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      words.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) {
    words.push_back(std::move(cur));
  }

  const std::uint64_t salt = fnv1a("level:" + std::to_string(level));
  std::unordered_map<std::size_t, double> sparse;
  auto add_feature = [&](std::string_view feature) {
    const std::uint64_t h = fnv1a(feature, salt);
    const std::size_t bucket = static_cast<std::size_t>(h % config_.hash_buckets);
    sparse[bucket] += (h >> 63) != 0U ? -1.0 : 1.0;
  };
  for (const auto& w : words) {
    add_feature("w|" + w);
    const std::string padded = "#" + w + "#";
    for (std::size_t n : config_.ngram_sizes) {
      for (std::size_t i = 0; i + n <= padded.size(); ++i) {
        add_feature("c" + std::to_string(n) + "|" + padded.substr(i, n));
      }
    }
  }

  std::vector<std::size_t> buckets;
  buckets.reserve(sparse.size());
  for (const auto& [b, v] : sparse) {
    if (v != 0.0) {
      buckets.push_back(b);
    }
  }
  std::sort(buckets.begin(), buckets.end());
  std::vector<double> out(config_.d_text, 0.0);
  for (std::size_t b : buckets) {
    const double v = sparse[b];
    const auto row = projection_.row(b);
    for (std::size_t c = 0; c < out.size(); ++c) {
      out[c] += v * row[c];
    }
  }
  double norm = 0.0;
  for (double v : out) {
    norm += v * v;
  }
  norm = std::sqrt(norm);
  if (norm > 0.0) {
    for (double& v : out) {
      v /= norm;
    }
  }
  return out;
}

double SparseSymmetric::at(std::size_t r, std::size_t c) const {
  const auto begin = col.begin() + static_cast<std::ptrdiff_t>(row_start[r]);
  const auto end = col.begin() + static_cast<std::ptrdiff_t>(row_start[r + 1]);
  const auto it = std::lower_bound(begin, end, c);
  if (it != end && *it == c) {
    return value[static_cast<std::size_t>(it - col.begin())];
  }
  return 0.0;
}

Matrix SparseSymmetric::multiply(const Matrix& x) const {
  if (x.rows() != n) {
    throw std::invalid_argument("SparseSymmetric::multiply: row mismatch");
  }
  Matrix y(n, x.cols());
  const long rows = static_cast<long>(n);
#pragma omp parallel for schedule(static)
  for (long r = 0; r < rows; ++r) {
    auto yr = y.row(static_cast<std::size_t>(r));
    for (std::size_t e = row_start[r]; e < row_start[r + 1]; ++e) {
      const double v = value[e];
      const auto xr = x.row(col[e]);
      for (std::size_t c = 0; c < yr.size(); ++c) {
        yr[c] += v * xr[c];
      }
    }
  }
  return y;
}

CooccurrenceModel build_ppmi(const std::vector<corpus::InteractionLog>& train, std::size_t window) {
  CooccurrenceModel model;
  for (const auto& log : train) {
    model.item_ids.insert(model.item_ids.end(), log.item_ids.begin(), log.item_ids.end());
  }
  std::sort(model.item_ids.begin(), model.item_ids.end());
  model.item_ids.erase(std::unique(model.item_ids.begin(), model.item_ids.end()),
                       model.item_ids.end());
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < model.item_ids.size(); ++i) {
    index[model.item_ids[i]] = i;
  }
  const std::size_t n = model.item_ids.size();
  std::vector<std::map<std::size_t, double>> counts(n);
  for (const auto& log : train) {
    const auto& seq = log.item_ids;
    for (std::size_t i = 0; i < seq.size(); ++i) {
      for (std::size_t j = i + 1; j < seq.size() && j <= i + window; ++j) {
        const std::size_t a = index[seq[i]];
        const std::size_t b = index[seq[j]];
        if (a == b) {
          continue;
        }
        counts[a][b] += 1.0;
        counts[b][a] += 1.0;
      }
    }
  }
  std::vector<double> row_sum(n, 0.0);
  double total = 0.0;
  for (std::size_t a = 0; a < n; ++a) {
    for (const auto& [b, c] : counts[a]) {
      row_sum[a] += c;
    }
    total += row_sum[a];
  }
  auto& m = model.ppmi;
  m.n = n;
  m.row_start.assign(1, 0);
  for (std::size_t a = 0; a < n; ++a) {
    for (const auto& [b, c] : counts[a]) {
      const double pmi = std::log(c * total / (row_sum[a] * row_sum[b]));
      if (pmi > 0.0) {
        m.col.push_back(b);
        m.value.push_back(pmi);
      }
    }
    m.row_start.push_back(m.col.size());
  }
  return model;
}

namespace {

// Modified Gram-Schmidt on the columns; degenerate columns become zero.
void orthonormalize_columns(Matrix& q) {
  const std::size_t n = q.rows();
  const std::size_t k = q.cols();
  for (std::size_t j = 0; j < k; ++j) {
    for (std::size_t p = 0; p < j; ++p) {
      double dot = 0.0;
      for (std::size_t r = 0; r < n; ++r) {
        dot += q(r, p) * q(r, j);
      }
      for (std::size_t r = 0; r < n; ++r) {
        q(r, j) -= dot * q(r, p);
      }
    }
    double norm = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      norm += q(r, j) * q(r, j);
    }
    norm = std::sqrt(norm);
    for (std::size_t r = 0; r < n; ++r) {
      q(r, j) = norm > 1e-300 ? q(r, j) / norm : 0.0;
    }
  }
}

}  // namespace

EigenResult truncated_eigen(const SparseSymmetric& m, std::size_t rank, std::size_t iterations,
                            std::uint64_t seed) {
  EigenResult result;
  const std::size_t n = m.n;
  const std::size_t k = std::min(rank, n);
  result.values.assign(rank, 0.0);
  result.vectors = Matrix(n, rank);
  if (k == 0) {
    return result;
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix q(n, k);
  for (double& v : q.values()) {
    v = normal(rng);
  }
  orthonormalize_columns(q);
  for (std::size_t it = 0; it < iterations; ++it) {
    q = m.multiply(q);
    orthonormalize_columns(q);
  }
  const Matrix mq = m.multiply(q);
  const Matrix t = numerics::matmul_tn(q, mq);
  Eigen::MatrixXd small(k, k);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      small(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = 0.5 * (t(i, j) + t(j, i));
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(small);
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), 0);
  const auto& evals = solver.eigenvalues();
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(evals(static_cast<Eigen::Index>(a))) > std::abs(evals(static_cast<Eigen::Index>(b)));
  });
  const auto& evecs = solver.eigenvectors();
  for (std::size_t c = 0; c < k; ++c) {
    const auto src = static_cast<Eigen::Index>(order[c]);
    result.values[c] = evals(src);
    for (std::size_t r = 0; r < n; ++r) {
      double s = 0.0;
      for (std::size_t j = 0; j < k; ++j) {
        s += q(r, j) * evecs(static_cast<Eigen::Index>(j), src);
      }
      result.vectors(r, c) = s;
    }
    // Sign convention: the largest-magnitude component is positive.
    std::size_t arg = 0;
    for (std::size_t r = 1; r < n; ++r) {
      if (std::abs(result.vectors(r, c)) > std::abs(result.vectors(arg, c))) {
        arg = r;
      }
    }
    if (result.vectors(arg, c) < 0.0) {
      for (std::size_t r = 0; r < n; ++r) {
        result.vectors(r, c) = -result.vectors(r, c);
      }
    }
  }
  return result;
}

EigenResult truncated_eigen(const Matrix& m, std::size_t rank, std::size_t iterations,
                            std::uint64_t seed) {
  if (m.rows() != m.cols()) {
    throw std::invalid_argument("truncated_eigen: matrix must be square");
  }
  SparseSymmetric s;
  s.n = m.rows();
  s.row_start.assign(1, 0);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      if (m(r, c) != 0.0) {
        s.col.push_back(c);
        s.value.push_back(m(r, c));
      }
    }
    s.row_start.push_back(s.col.size());
  }
  return truncated_eigen(s, rank, iterations, seed);
}

const std::vector<double>& EmbeddingTable::at(const std::string& item_id) const {
  const auto it = rows.find(item_id);
  if (it == rows.end()) {
    throw std::out_of_range("embedding table has no row for item " + item_id);
  }
  return it->second;
}

EmbeddingTable train_cf_embeddings(const std::vector<corpus::InteractionLog>& train,
                                   const FeaturizerConfig& config) {
  config.validate();
  if (train.empty()) {
    throw std::invalid_argument("train_cf_embeddings: empty train split");
  }
  const CooccurrenceModel model = build_ppmi(train, config.cooccurrence_window);
  // Twice the rank by magnitude, then the d_cf largest positive eigenpairs.
  const EigenResult eig =
      truncated_eigen(model.ppmi, 2 * config.d_cf, config.svd_iterations, config.svd_seed);
  std::vector<std::size_t> keep;
  for (std::size_t c = 0; c < eig.values.size(); ++c) {
    if (eig.values[c] > 0.0) {
      keep.push_back(c);
    }
  }
  std::stable_sort(keep.begin(), keep.end(),
                   [&](std::size_t a, std::size_t b) { return eig.values[a] > eig.values[b]; });
  keep.resize(std::min(keep.size(), config.d_cf));
  EmbeddingTable table;
  table.dim = config.d_cf;
  std::size_t isolated = 0;
  for (std::size_t i = 0; i < model.item_ids.size(); ++i) {
    std::vector<double> row(config.d_cf, 0.0);
    if (model.ppmi.row_start[i + 1] > model.ppmi.row_start[i]) {
      for (std::size_t c = 0; c < keep.size(); ++c) {
        row[c] = eig.vectors(i, keep[c]) * std::sqrt(eig.values[keep[c]]);
      }
    } else {
      ++isolated;
    }
    table.rows.emplace(model.item_ids[i], std::move(row));
  }
  if (isolated > 0) {
    std::clog << "warning: " << isolated
              << " train item(s) never co-occur with another item; CF embedding set to zero\n";
  }
  return table;
}

std::vector<EmbeddingTable> embed_hierarchies(const std::vector<corpus::ItemHierarchy>& items,
                                              const TextEmbedder& embedder) {
  std::size_t n_levels = items.empty() ? 0 : items.front().levels.size();
  std::vector<EmbeddingTable> tables(n_levels);
  for (auto& t : tables) {
    t.dim = embedder.config().d_text;
  }
  for (const auto& h : items) {
    if (h.levels.size() != n_levels) {
      throw std::invalid_argument("embed_hierarchies: item " + h.item_id +
                                  " has a different level count");
    }
    for (std::size_t k = 0; k < n_levels; ++k) {
      tables[k].rows.emplace(h.item_id, embedder.embed(h.levels[k], static_cast<int>(k + 1)));
    }
  }
  return tables;
}

std::string table_to_text(const EmbeddingTable& table) {
  std::string out = std::to_string(table.rows.size()) + " " + std::to_string(table.dim) + "\n";
  for (const auto& [id, row] : table.rows) {
    out += id;
    out.push_back(' ');
    out += io::join_doubles(row);
    out.push_back('\n');
  }
  return out;
}

EmbeddingTable table_from_text(std::string_view text) {
  EmbeddingTable table;
  std::size_t pos = 0;
  std::size_t lineno = 0;
  std::size_t expected = 0;
  while (pos < text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    const auto fields = io::split_ws(text.substr(pos, end - pos));
    pos = end + 1;
    ++lineno;
    if (fields.empty()) {
      continue;
    }
    if (lineno == 1) {
      if (fields.size() != 2) {
        throw std::runtime_error("embedding table: header must be '<rows> <dim>'");
      }
      expected = static_cast<std::size_t>(io::parse_int(fields[0]));
      table.dim = static_cast<std::size_t>(io::parse_int(fields[1]));
      continue;
    }
    if (fields.size() != table.dim + 1) {
      throw std::runtime_error("embedding table line " + std::to_string(lineno) + ": expected " +
                               std::to_string(table.dim) + " values");
    }
    std::vector<double> row;
    row.reserve(table.dim);
    for (std::size_t i = 1; i < fields.size(); ++i) {
      row.push_back(io::parse_double(fields[i]));
    }
    table.rows.emplace(std::string(fields[0]), std::move(row));
  }
  if (table.rows.size() != expected) {
    throw std::runtime_error("embedding table: header promises " + std::to_string(expected) +
                             " rows, found " + std::to_string(table.rows.size()));
  }
  return table;
}

void save_table(const std::filesystem::path& path, const EmbeddingTable& table) {
  io::write_file(path, table_to_text(table));
}

EmbeddingTable load_table(const std::filesystem::path& path) {
  return table_from_text(io::read_file(path));
}

double cosine(std::span<const double> a, std::span<const double> b) {
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) {
    return 0.0;
  }
  return dot / std::sqrt(na * nb);
}

}  // namespace cofirec::featurize
