#include "cofirec/numerics/transformer.hpp"

#include <cmath>
#include <stdexcept>

#include "cofirec/numerics/kernels.hpp"

namespace cofirec::numerics {
namespace {

void init_weight(Param& p, std::mt19937_64& rng) {
  const double bound = std::sqrt(1.0 / static_cast<double>(p.value.rows()));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double& w : p.value.values()) {
    w = dist(rng);
  }
}

Matrix add(const Matrix& a, const Matrix& b) {
  Matrix out = a;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.values()[i] += b.values()[i];
  }
  return out;
}

void add_inplace(Matrix& a, const Matrix& b) {
  for (std::size_t i = 0; i < a.size(); ++i) {
    a.values()[i] += b.values()[i];
  }
}

// Attention of one query row (head slice) over key rows [0, n).
void attend_row(const double* q, const Matrix& keys, const Matrix& values, std::size_t n,
                std::size_t offset, std::size_t dh, double scale, double* probs, double* out) {
  for (std::size_t j = 0; j < n; ++j) {
    const double* kr = keys.data() + j * keys.cols() + offset;
    double s = 0.0;
    for (std::size_t c = 0; c < dh; ++c) {
      s += q[c] * kr[c];
    }
    probs[j] = s * scale;
  }
  softmax_inplace(std::span<double>(probs, n));
  for (std::size_t c = 0; c < dh; ++c) {
    out[c] = 0.0;
  }
  for (std::size_t j = 0; j < n; ++j) {
    const double* vr = values.data() + j * values.cols() + offset;
    const double pj = probs[j];
    for (std::size_t c = 0; c < dh; ++c) {
      out[c] += pj * vr[c];
    }
  }
}

}  // namespace

SelfAttention::SelfAttention(const std::string& name, std::size_t d_model, std::size_t n_heads)
    : wq(name + ".wq", d_model, d_model),
      bq(name + ".bq", 1, d_model),
      wk(name + ".wk", d_model, d_model),
      wv(name + ".wv", d_model, d_model),
      bv(name + ".bv", 1, d_model),
      wo(name + ".wo", d_model, d_model),
      bo(name + ".bo", 1, d_model),
      d_model_(d_model),
      n_heads_(n_heads) {
  if (n_heads == 0 || d_model % n_heads != 0) {
    throw std::invalid_argument("SelfAttention " + name + ": " + std::to_string(n_heads) +
                                " heads do not divide d_model " + std::to_string(d_model));
  }
}

void SelfAttention::init(std::mt19937_64& rng) {
  for (Param* p : {&wq, &wk, &wv, &wo}) {
    init_weight(*p, rng);
  }
  for (Param* p : {&bq, &bv, &bo}) {
    p->value.set_zero();
  }
}

Matrix SelfAttention::forward(const Matrix& x, bool causal, AttentionCache* cache) const {
  if (x.cols() != d_model_) {
    throw std::invalid_argument("SelfAttention::forward: width " + std::to_string(x.cols()) +
                                " != d_model " + std::to_string(d_model_));
  }
  const std::size_t len = x.rows();
  const std::size_t dh = d_model_ / n_heads_;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  Matrix q = linear_forward(x, wq, bq);
  Matrix k;
  kernels::gemm(x, wk.value, k);
  Matrix v = linear_forward(x, wv, bv);
  Matrix heads(len, d_model_);
  std::vector<Matrix> probs(n_heads_, Matrix(len, len));
  for (std::size_t h = 0; h < n_heads_; ++h) {
    const std::size_t off = h * dh;
    for (std::size_t i = 0; i < len; ++i) {
      const std::size_t n = causal ? i + 1 : len;
      attend_row(q.data() + i * d_model_ + off, k, v, n, off, dh, scale,
                 probs[h].data() + i * len, heads.data() + i * d_model_ + off);
    }
  }
  Matrix out = linear_forward(heads, wo, bo);
  if (cache != nullptr) {
    cache->input = x;
    cache->q = std::move(q);
    cache->k = std::move(k);
    cache->v = std::move(v);
    cache->probs = std::move(probs);
    cache->heads = std::move(heads);
  }
  return out;
}

Matrix SelfAttention::backward(const AttentionCache& cache, const Matrix& dout) {
  const std::size_t len = cache.input.rows();
  const std::size_t dh = d_model_ / n_heads_;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  Matrix dheads = linear_backward(cache.heads, dout, wo, bo);
  Matrix dq(len, d_model_);
  Matrix dk(len, d_model_);
  Matrix dv(len, d_model_);
  std::vector<double> dp(len);
  for (std::size_t h = 0; h < n_heads_; ++h) {
    const std::size_t off = h * dh;
    const Matrix& p = cache.probs[h];
    for (std::size_t i = 0; i < len; ++i) {
      const double* dout_i = dheads.data() + i * d_model_ + off;
      double weighted = 0.0;
      for (std::size_t j = 0; j < len; ++j) {
        const double pij = p(i, j);
        if (pij == 0.0) {
          dp[j] = 0.0;
          continue;
        }
        const double* vj = cache.v.data() + j * d_model_ + off;
        double s = 0.0;
        for (std::size_t c = 0; c < dh; ++c) {
          s += dout_i[c] * vj[c];
        }
        dp[j] = s;
        weighted += s * pij;
        double* dvj = dv.data() + j * d_model_ + off;
        for (std::size_t c = 0; c < dh; ++c) {
          dvj[c] += pij * dout_i[c];
        }
      }
      const double* qi = cache.q.data() + i * d_model_ + off;
      double* dqi = dq.data() + i * d_model_ + off;
      for (std::size_t j = 0; j < len; ++j) {
        const double pij = p(i, j);
        if (pij == 0.0) {
          continue;
        }
        const double ds = pij * (dp[j] - weighted) * scale;
        const double* kj = cache.k.data() + j * d_model_ + off;
        double* dkj = dk.data() + j * d_model_ + off;
        for (std::size_t c = 0; c < dh; ++c) {
          dqi[c] += ds * kj[c];
          dkj[c] += ds * qi[c];
        }
      }
    }
  }
  Matrix dx = linear_backward(cache.input, dq, wq, bq);
  kernels::gemm_tn(cache.input, dk, wk.grad, true);
  kernels::gemm_nt(dk, wk.value, dx, true);
  add_inplace(dx, linear_backward(cache.input, dv, wv, bv));
  return dx;
}

Matrix SelfAttention::step(const Matrix& x_row, KvCache& kv) const {
  const std::size_t dh = d_model_ / n_heads_;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const Matrix q = linear_forward(x_row, wq, bq);
  Matrix k;
  kernels::gemm(x_row, wk.value, k);
  kv.keys.append_row(k.row(0));
  kv.values.append_row(linear_forward(x_row, wv, bv).row(0));
  const std::size_t n = kv.keys.rows();
  Matrix heads(1, d_model_);
  std::vector<double> probs(n);
  for (std::size_t h = 0; h < n_heads_; ++h) {
    const std::size_t off = h * dh;
    attend_row(q.data() + off, kv.keys, kv.values, n, off, dh, scale, probs.data(),
               heads.data() + off);
  }
  return linear_forward(heads, wo, bo);
}

std::vector<Param*> SelfAttention::parameters() {
  return {&wq, &bq, &wk, &wv, &bv, &wo, &bo};
}

TransformerBlock::TransformerBlock(const std::string& name, std::size_t d_model,
                                   std::size_t n_heads, std::size_t d_ff)
    : ln1_gamma(name + ".ln1.g", 1, d_model),
      ln1_beta(name + ".ln1.b", 1, d_model),
      attn(name + ".attn", d_model, n_heads),
      ln2_gamma(name + ".ln2.g", 1, d_model),
      ln2_beta(name + ".ln2.b", 1, d_model),
      w1(name + ".ffn.w1", d_model, d_ff),
      b1(name + ".ffn.b1", 1, d_ff),
      w2(name + ".ffn.w2", d_ff, d_model),
      b2(name + ".ffn.b2", 1, d_model) {}

void TransformerBlock::init(std::mt19937_64& rng) {
  ln1_gamma.value.fill(1.0);
  ln1_beta.value.set_zero();
  ln2_gamma.value.fill(1.0);
  ln2_beta.value.set_zero();
  attn.init(rng);
  init_weight(w1, rng);
  init_weight(w2, rng);
  b1.value.set_zero();
  b2.value.set_zero();
}

Matrix TransformerBlock::forward(const Matrix& x, bool causal, BlockCache* cache) const {
  LayerNormCache ln1c;
  LayerNormCache ln2c;
  AttentionCache ac;
  const Matrix a = layer_norm_forward(x, ln1_gamma, ln1_beta, cache ? &ln1c : nullptr);
  Matrix x1 = add(x, attn.forward(a, causal, cache ? &ac : nullptr));
  Matrix b = layer_norm_forward(x1, ln2_gamma, ln2_beta, cache ? &ln2c : nullptr);
  Matrix hidden = linear_forward(b, w1, b1);
  Matrix act = hidden;
  for (double& v : act.values()) {
    v = v > 0.0 ? v : 0.0;
  }
  Matrix y = add(x1, linear_forward(act, w2, b2));
  if (cache != nullptr) {
    cache->ln1 = std::move(ln1c);
    cache->attn = std::move(ac);
    cache->after_attn = std::move(x1);
    cache->ln2 = std::move(ln2c);
    cache->ffn_in = std::move(b);
    cache->ffn_hidden = std::move(hidden);
    cache->ffn_act = std::move(act);
  }
  return y;
}

Matrix TransformerBlock::backward(const BlockCache& cache, const Matrix& dy) {
  Matrix dact = linear_backward(cache.ffn_act, dy, w2, b2);
  for (std::size_t i = 0; i < dact.size(); ++i) {
    if (!(cache.ffn_hidden.values()[i] > 0.0)) {
      dact.values()[i] = 0.0;
    }
  }
  const Matrix db = linear_backward(cache.ffn_in, dact, w1, b1);
  Matrix dx1 = add(dy, layer_norm_backward(cache.ln2, db, ln2_gamma, ln2_beta));
  const Matrix da = attn.backward(cache.attn, dx1);
  add_inplace(dx1, layer_norm_backward(cache.ln1, da, ln1_gamma, ln1_beta));
  return dx1;
}

Matrix TransformerBlock::step(const Matrix& x_row, KvCache& kv) const {
  const Matrix a = layer_norm_forward(x_row, ln1_gamma, ln1_beta);
  const Matrix x1 = add(x_row, attn.step(a, kv));
  const Matrix b = layer_norm_forward(x1, ln2_gamma, ln2_beta);
  Matrix act = linear_forward(b, w1, b1);
  for (double& v : act.values()) {
    v = v > 0.0 ? v : 0.0;
  }
  return add(x1, linear_forward(act, w2, b2));
}

std::vector<Param*> TransformerBlock::parameters() {
  std::vector<Param*> out{&ln1_gamma, &ln1_beta};
  for (Param* p : attn.parameters()) {
    out.push_back(p);
  }
  for (Param* p : {&ln2_gamma, &ln2_beta, &w1, &b1, &w2, &b2}) {
    out.push_back(p);
  }
  return out;
}

}  // namespace cofirec::numerics
