#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "cofirec/numerics/layers.hpp"
#include "cofirec/numerics/matrix.hpp"

namespace cofirec::numerics {

struct AttentionCache {
  Matrix input;
  Matrix q, k, v;
  std::vector<Matrix> probs;  // one L x L matrix per head
  Matrix heads;               // concatenated head outputs, L x d
};

// Keys and values of every position seen so far, for incremental decoding.
struct KvCache {
  Matrix keys;
  Matrix values;
};

// Multi-head scaled dot-product self-attention with input/output projections.
class SelfAttention {
 public:
  SelfAttention() = default;
  SelfAttention(const std::string& name, std::size_t d_model, std::size_t n_heads);

  void init(std::mt19937_64& rng);

  Matrix forward(const Matrix& x, bool causal, AttentionCache* cache = nullptr) const;
  Matrix backward(const AttentionCache& cache, const Matrix& dout);
  // One new position; appends its key/value to `kv` and attends over all of it.
  Matrix step(const Matrix& x_row, KvCache& kv) const;

  std::vector<Param*> parameters();
  std::size_t d_model() const { return d_model_; }
  std::size_t n_heads() const { return n_heads_; }

  Param wq, bq, wk, wv, bv, wo, bo;  // no key bias

 private:
  std::size_t d_model_ = 0;
  std::size_t n_heads_ = 1;
};

struct BlockCache {
  LayerNormCache ln1;
  AttentionCache attn;
  Matrix after_attn;  // residual stream after the attention sublayer
  LayerNormCache ln2;
  Matrix ffn_in;      // LN2 output
  Matrix ffn_hidden;  // pre-relu
  Matrix ffn_act;     // post-relu
};

// Pre-norm decoder block: x + Attn(LN(x)), then + FFN(LN(.)).
class TransformerBlock {
 public:
  TransformerBlock() = default;
  TransformerBlock(const std::string& name, std::size_t d_model, std::size_t n_heads,
                   std::size_t d_ff);

  void init(std::mt19937_64& rng);

  Matrix forward(const Matrix& x, bool causal, BlockCache* cache = nullptr) const;
  Matrix backward(const BlockCache& cache, const Matrix& dy);
  Matrix step(const Matrix& x_row, KvCache& kv) const;

  std::vector<Param*> parameters();

  Param ln1_gamma, ln1_beta;
  SelfAttention attn;
  Param ln2_gamma, ln2_beta;
  Param w1, b1, w2, b2;
};

}  // namespace cofirec::numerics
