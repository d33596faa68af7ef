#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cofirec/corpus.hpp"
#include "cofirec/numerics/matrix.hpp"

namespace cofirec::featurize {

struct FeaturizerConfig {
  std::size_t d_text = 64;
  std::size_t d_cf = 32;
  std::vector<std::size_t> ngram_sizes = {3, 4};
  std::size_t hash_buckets = 4096;
  std::uint64_t projection_seed = 17;
  std::size_t cooccurrence_window = 5;
  std::size_t svd_iterations = 60;
  std::uint64_t svd_seed = 29;

  void validate() const;
};

// Hashed word + character n-gram features, signed feature hashing into
// `hash_buckets`, then a fixed Gaussian projection to d_text and L2
// normalization. The level index salts the hash.
class TextEmbedder {
 public:
  explicit TextEmbedder(FeaturizerConfig config);

  // Empty (or featureless) text maps to the zero vector.
  std::vector<double> embed(std::string_view text, int level) const;

  const FeaturizerConfig& config() const { return config_; }

 private:
  FeaturizerConfig config_;
  numerics::Matrix projection_;  // hash_buckets x d_text
};

// Stable 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);

// Sparse symmetric matrix in compressed-row form.
struct SparseSymmetric {
  std::size_t n = 0;
  std::vector<std::size_t> row_start;  // n + 1
  std::vector<std::size_t> col;
  std::vector<double> value;

  double at(std::size_t r, std::size_t c) const;
  // y = M x for an n x k block.
  numerics::Matrix multiply(const numerics::Matrix& x) const;
};

struct CooccurrenceModel {
  std::vector<std::string> item_ids;  // sorted
  SparseSymmetric ppmi;
};

// Symmetric co-occurrence counts within `window` positions (self pairs
// skipped), converted to positive PMI.
CooccurrenceModel build_ppmi(const std::vector<corpus::InteractionLog>& train, std::size_t window);

struct EigenResult {
  std::vector<double> values;  // descending by magnitude
  numerics::Matrix vectors;    // n x rank, orthonormal columns
};

// Orthogonal (subspace) iteration for the `rank` dominant eigenpairs of a
// symmetric matrix, finished with a Rayleigh-Ritz rotation.
EigenResult truncated_eigen(const SparseSymmetric& m, std::size_t rank, std::size_t iterations,
                            std::uint64_t seed);
// Dense convenience overload; the matrix must be symmetric.
EigenResult truncated_eigen(const numerics::Matrix& m, std::size_t rank, std::size_t iterations,
                            std::uint64_t seed);

struct EmbeddingTable {
  std::size_t dim = 0;
  std::map<std::string, std::vector<double>> rows;

  const std::vector<double>& at(const std::string& item_id) const;
  friend bool operator==(const EmbeddingTable&, const EmbeddingTable&) = default;
};

// Rows are U * sqrt(lambda) over the d_cf largest positive eigenpairs (zero
// padded). Items without any co-occurrence get zeros.
EmbeddingTable train_cf_embeddings(const std::vector<corpus::InteractionLog>& train,
                                   const FeaturizerConfig& config);

// Per-level text embeddings of every item: tables[k] holds level k+1.
std::vector<EmbeddingTable> embed_hierarchies(const std::vector<corpus::ItemHierarchy>& items,
                                              const TextEmbedder& embedder);

// Header "<rows> <dim>", then "item_id v1 ... vd" per line.
std::string table_to_text(const EmbeddingTable& table);
EmbeddingTable table_from_text(std::string_view text);
void save_table(const std::filesystem::path& path, const EmbeddingTable& table);
EmbeddingTable load_table(const std::filesystem::path& path);

double cosine(std::span<const double> a, std::span<const double> b);

}  // namespace cofirec::featurize
