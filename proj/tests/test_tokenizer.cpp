#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "cofirec/numerics/adam.hpp"
#include "cofirec/numerics/gradcheck.hpp"
#include "cofirec/numerics/kernels.hpp"
#include "cofirec/pipeline.hpp"
#include "cofirec/tokenizer.hpp"
#include "test_util.hpp"

using namespace cofirec;
using namespace cofirec::tokenizer;
using testutil::random_matrix;

namespace {

Codebook book_of(const Matrix& codes) {
  Codebook b;
  b.level = 1;
  b.codes = Param("codebook1", codes.rows(), codes.cols());
  b.codes.value = codes;
  return b;
}

TokenizerConfig small_config(std::vector<std::size_t> sizes, std::size_t code_dim,
                             std::vector<std::size_t> hidden) {
  TokenizerConfig c;
  c.codebook_sizes = std::move(sizes);
  c.code_dim = code_dim;
  c.hidden = std::move(hidden);
  return c;
}

TokenizerModel random_model(const TokenizerConfig& cfg, std::size_t d_text, std::size_t d_cf,
                            std::mt19937_64& rng) {
  TokenizerModel m(cfg, d_text, d_cf);
  m.init(rng);
  for (auto* p : m.parameters()) testutil::randomize(*p, rng, 0.6);
  return m;
}

TokenizerInputs random_inputs(const TokenizerModel& m, std::size_t n, std::mt19937_64& rng) {
  TokenizerInputs in;
  for (std::size_t i = 0; i < n; ++i) in.item_ids.push_back("i" + std::to_string(i));
  for (std::size_t k = 0; k < m.levels(); ++k) in.levels.push_back(random_matrix(n, m.input_dim(k), rng));
  return in;
}

// Plain 2 -> 2 -> 2 relu network, written out by hand.
struct Net2 {
  double w1[2][2], b1[2], w2[2][2], b2[2];
  double gw1[2][2] = {}, gb1[2] = {}, gw2[2][2] = {}, gb2[2] = {};
  double x[2], z1[2], a1[2];

  explicit Net2(const numerics::Mlp& mlp) {
    const auto& L = mlp.layers();
    for (int i = 0; i < 2; ++i) {
      b1[i] = L[0].bias.value(0, i);
      b2[i] = L[1].bias.value(0, i);
      for (int j = 0; j < 2; ++j) {
        w1[i][j] = L[0].weight.value(i, j);
        w2[i][j] = L[1].weight.value(i, j);
      }
    }
  }
  void fwd(const double in[2], double out[2]) {
    for (int j = 0; j < 2; ++j) {
      x[j] = in[j];
    }
    for (int j = 0; j < 2; ++j) {
      z1[j] = x[0] * w1[0][j] + x[1] * w1[1][j] + b1[j];
      a1[j] = z1[j] > 0 ? z1[j] : 0;
    }
    for (int j = 0; j < 2; ++j) out[j] = a1[0] * w2[0][j] + a1[1] * w2[1][j] + b2[j];
  }
  void bwd(const double dy[2], double dx[2]) {
    double dz[2];
    for (int i = 0; i < 2; ++i) {
      gb2[i] += dy[i];
      for (int j = 0; j < 2; ++j) gw2[i][j] += a1[i] * dy[j];
      const double da = w2[i][0] * dy[0] + w2[i][1] * dy[1];
      dz[i] = z1[i] > 0 ? da : 0;
    }
    for (int i = 0; i < 2; ++i) {
      gb1[i] += dz[i];
      for (int j = 0; j < 2; ++j) gw1[i][j] += x[i] * dz[j];
      dx[i] = w1[i][0] * dz[0] + w1[i][1] * dz[1];
    }
  }
  void compare(const numerics::Mlp& mlp) const {
    const auto& L = mlp.layers();
    for (int i = 0; i < 2; ++i) {
      CHECK(std::abs(L[0].bias.grad(0, i) - gb1[i]) < 1e-10);
      CHECK(std::abs(L[1].bias.grad(0, i) - gb2[i]) < 1e-10);
      for (int j = 0; j < 2; ++j) {
        CHECK(std::abs(L[0].weight.grad(i, j) - gw1[i][j]) < 1e-10);
        CHECK(std::abs(L[1].weight.grad(i, j) - gw2[i][j]) < 1e-10);
      }
    }
  }
};

}  // namespace

TEST_CASE("quantize examples") {
  const Codebook b = book_of({{0.0, 0.0}, {1.0, 1.0}, {3.0, -1.0}, {0.5, 0.25}});
  const double h1[] = {0.9, 0.8};
  const auto q = quantize(h1, b);
  CHECK(q.index == 1);
  CHECK(std::abs(q.distance2 - 0.05) < 1e-15);
  CHECK(q.code == std::vector<double>{1.0, 1.0});

  const double exact[] = {3.0, -1.0};
  CHECK(quantize(exact, b).index == 2);
  CHECK(quantize(exact, b).distance2 == 0.0);

  const Codebook tie = book_of({{1.0, 0.0}, {-1.0, 0.0}});
  const double mid[] = {0.0, 5.0};
  CHECK(quantize(mid, tie).index == 0);
}

TEST_CASE("quantize argmin contract on random instances") {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 2000; ++t) {
    const Codebook b = book_of(random_matrix(2 + t % 30, 1 + t % 7, rng));
    const Matrix h = random_matrix(1, b.dim(), rng);
    const auto q = quantize(h.row(0), b);
    for (std::size_t j = 0; j < b.size(); ++j) {
      double d = 0;
      for (std::size_t c = 0; c < b.dim(); ++c) d += (h(0, c) - b.codes.value(j, c)) * (h(0, c) - b.codes.value(j, c));
      CHECK(q.distance2 <= d);
    }
  }
}

TEST_CASE("toy tokenizer loss matches a straight-line duplicate") {
  std::mt19937_64 rng(4);
  const auto cfg = small_config({3, 3}, 2, {2});
  for (int trial = 0; trial < 10; ++trial) {
    TokenizerModel m = random_model(cfg, 2, 2, rng);
    m.mu = 0.25;
    const TokenizerInputs in = random_inputs(m, 1, rng);
    numerics::zero_grads(m.parameters());
    const auto res = tokenizer_loss(m, in, true);

    Net2 f_sem(m.f_sem), g_sem(m.g_sem), f_cf(m.f_cf), g_cf(m.g_cf);
    double loss = 0;
    for (int k = 0; k < 2; ++k) {
      Net2& f = k == 0 ? f_sem : f_cf;
      Net2& g = k == 0 ? g_sem : g_cf;
      const Matrix& codes = m.codebooks[k].codes.value;
      double e[2] = {in.levels[k](0, 0), in.levels[k](0, 1)}, h[2], r[2];
      f.fwd(e, h);
      int best = 0;
      double bd = std::numeric_limits<double>::infinity();
      for (int j = 0; j < 3; ++j) {
        const double d = (h[0] - codes(j, 0)) * (h[0] - codes(j, 0)) + (h[1] - codes(j, 1)) * (h[1] - codes(j, 1));
        if (d < bd) {
          bd = d;
          best = j;
        }
      }
      CHECK(res.assignments[k][0] == best);
      double c[2] = {codes(best, 0), codes(best, 1)};
      g.fwd(c, r);
      const double recon = (e[0] - r[0]) * (e[0] - r[0]) + (e[1] - r[1]) * (e[1] - r[1]);
      loss += recon + (1 + m.mu) * bd;

      double dr[2] = {-2 * (e[0] - r[0]), -2 * (e[1] - r[1])}, dc[2], dh[2], dx[2];
      g.bwd(dr, dc);
      for (int j = 0; j < 2; ++j) {
        const double want = dc[j] + 2 * (c[j] - h[j]);
        CHECK(std::abs(m.codebooks[k].codes.grad(best, j) - want) < 1e-10);
        dh[j] = dc[j] - 2 * m.mu * (c[j] - h[j]);
      }
      f.bwd(dh, dx);
    }
    CHECK(std::abs(res.parts.total() - loss) < 1e-10);
    f_sem.compare(m.f_sem);
    g_sem.compare(m.g_sem);
    f_cf.compare(m.f_cf);
    g_cf.compare(m.g_cf);
  }
}

TEST_CASE("tokenizer gradients against finite differences with frozen assignments") {
  std::mt19937_64 rng(6);
  const auto cfg = small_config({4, 3, 5}, 3, {5});
  for (int trial = 0; trial < 3; ++trial) {
    TokenizerModel m = random_model(cfg, 4, 3, rng);
    const TokenizerInputs in = random_inputs(m, 5, rng);
    numerics::zero_grads(m.parameters());
    const auto base = tokenizer_loss(m, in, true);
    const Assignments fixed = base.assignments;
    auto parts = [&] { return tokenizer_loss(m, in, false, &fixed).parts; };

    // Decoders see the true derivative of the reconstruction term.
    std::vector<Param*> dec;
    for (auto* p : m.g_sem.parameters()) dec.push_back(p);
    for (auto* p : m.g_cf.parameters()) dec.push_back(p);
    CHECK(numerics::finite_diff_check([&] { return parts().total(); }, dec).max_relative_error < 1e-4);

    // Codebooks: reconstruction plus the first commitment term.
    std::vector<Param*> books;
    for (auto& b : m.codebooks) books.push_back(&b.codes);
    CHECK(numerics::finite_diff_check(
              [&] {
                const auto p = parts();
                return p.reconstruction + p.codebook_commitment;
              },
              books)
              .max_relative_error < 1e-4);

    // Encoders: mu * commitment plus the straight-through decoder-input
    // gradient, held constant at the base point.
    std::vector<Matrix> dc(m.levels());
    TokenizerModel probe = m;
    for (std::size_t k = 0; k < m.levels(); ++k) {
      Matrix c(5, 3);
      for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = 0; j < 3; ++j) c(i, j) = m.codebooks[k].codes.value(fixed[k][i], j);
      numerics::MlpCache cache;
      const Matrix r = probe.decoder(k).forward(c, &cache);
      Matrix dr(r.rows(), r.cols());
      for (std::size_t i = 0; i < dr.size(); ++i) dr.values()[i] = -2.0 * (in.levels[k].values()[i] - r.values()[i]) / 5.0;
      dc[k] = probe.decoder(k).backward(cache, dr);
    }
    auto surrogate = [&] {
      double s = parts().encoder_commitment;
      for (std::size_t k = 0; k < m.levels(); ++k) {
        const Matrix h = m.encode(k, in.levels[k]);
        for (std::size_t i = 0; i < h.size(); ++i) s += dc[k].values()[i] * h.values()[i];
      }
      return s;
    };
    std::vector<Param*> enc;
    for (auto* p : m.f_sem.parameters()) enc.push_back(p);
    for (auto* p : m.f_cf.parameters()) enc.push_back(p);
    CHECK(numerics::finite_diff_check(surrogate, enc).max_relative_error < 1e-4);
  }
}

TEST_CASE("stop-gradient semantics") {
  std::mt19937_64 rng(8);
  const auto cfg = small_config({4, 4, 4}, 3, {6});
  TokenizerModel m = random_model(cfg, 5, 4, rng);
  const TokenizerInputs in = random_inputs(m, 6, rng);
  numerics::zero_grads(m.parameters());
  const auto base = tokenizer_loss(m, in, true);

  SUBCASE("decoder perturbation moves only the reconstruction") {
    for (auto* p : m.g_sem.parameters())
      for (double& v : p->value.values()) v += 0.01;
    const auto after = tokenizer_loss(m, in, false, &base.assignments);
    CHECK(after.parts.reconstruction != base.parts.reconstruction);
    CHECK(after.parts.codebook_commitment == base.parts.codebook_commitment);
    CHECK(after.parts.encoder_commitment == base.parts.encoder_commitment);
  }
  SUBCASE("codebook commitment gradient is 2 (c - h)") {
    TokenizerModel frozen_dec = m;
    for (std::size_t k = 0; k < m.levels(); ++k) {
      // Isolate the commitment share: zero decoder contribution by
      // subtracting the reconstruction-only gradient.
      numerics::zero_grads(frozen_dec.parameters());
      const Matrix h = m.encode(k, in.levels[k]);
      Matrix c(6, 3);
      for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t j = 0; j < 3; ++j) c(i, j) = m.codebooks[k].codes.value(base.assignments[k][i], j);
      numerics::MlpCache cache;
      const Matrix r = frozen_dec.decoder(k).forward(c, &cache);
      Matrix dr(r.rows(), r.cols());
      for (std::size_t i = 0; i < dr.size(); ++i) dr.values()[i] = -2.0 * (in.levels[k].values()[i] - r.values()[i]) / 6.0;
      const Matrix dc = frozen_dec.decoder(k).backward(cache, dr);
      Matrix expect(4, 3);
      for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t j = 0; j < 3; ++j)
          expect(base.assignments[k][i], j) += dc(i, j) + 2.0 * (c(i, j) - h(i, j)) / 6.0;
      CHECK(numerics::max_abs_diff(m.codebooks[k].codes.grad, expect) < 1e-12);
    }
  }
  SUBCASE("mu = 0 leaves only the straight-through reconstruction gradient") {
    TokenizerModel a = m;
    a.mu = 0.0;
    numerics::zero_grads(a.parameters());
    tokenizer_loss(a, in, true);
    TokenizerModel b = m;
    numerics::zero_grads(b.parameters());
    for (std::size_t k = 0; k < m.levels(); ++k) {
      numerics::MlpCache ecache, dcache;
      const Matrix h = b.encoder(k).forward(in.levels[k], &ecache);
      Matrix c(6, 3);
      for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t j = 0; j < 3; ++j) c(i, j) = m.codebooks[k].codes.value(base.assignments[k][i], j);
      const Matrix r = b.decoder(k).forward(c, &dcache);
      Matrix dr(r.rows(), r.cols());
      for (std::size_t i = 0; i < dr.size(); ++i) dr.values()[i] = -2.0 * (in.levels[k].values()[i] - r.values()[i]) / 6.0;
      b.encoder(k).backward(ecache, b.decoder(k).backward(dcache, dr));
    }
    for (int which = 0; which < 2; ++which) {
      auto pa = which == 0 ? a.f_sem.parameters() : a.f_cf.parameters();
      auto pb = which == 0 ? b.f_sem.parameters() : b.f_cf.parameters();
      for (std::size_t i = 0; i < pa.size(); ++i) CHECK(numerics::max_abs_diff(pa[i]->grad, pb[i]->grad) < 1e-12);
    }
  }
  SUBCASE("perfect fit has zero commitment") {
    TokenizerModel z = m;
    for (std::size_t k = 0; k < z.levels(); ++k) {
      const Matrix h = z.encode(k, in.levels[k]);
      for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 3; ++j) z.codebooks[k].codes.value(i, j) = h(i, j);
    }
    TokenizerInputs four = in.subset({0, 1, 2, 3});
    const auto res = tokenizer_loss(z, four, false);
    CHECK(res.parts.codebook_commitment < 1e-24);
    CHECK(res.parts.encoder_commitment < 1e-24);
  }
}

TEST_CASE("training") {
  SUBCASE("two separated clusters per level") {
    std::mt19937_64 rng(10);
    auto cfg = small_config({2, 2, 2}, 4, {16});
    cfg.epochs = 400;
    cfg.learning_rate = 5e-3;
    TokenizerInputs in;
    std::normal_distribution<double> noise(0.0, 0.02);
    for (std::size_t i = 0; i < 40; ++i) in.item_ids.push_back("i" + std::to_string(i));
    for (std::size_t k = 0; k < 3; ++k) {
      const std::size_t d = k == 2 ? 4 : 6;
      Matrix m(40, d);
      for (std::size_t i = 0; i < 40; ++i)
        for (std::size_t j = 0; j < d; ++j) m(i, j) = ((i + k) % 2 == 0 ? 1.0 : -1.0) * (j % 2 ? 1 : 0.5) + noise(rng);
      in.levels.push_back(m);
    }
    auto zero = cfg;
    zero.epochs = 0;
    auto init = train_tokenizer(in, zero, 6, 4);
    const double initial = tokenizer_loss(init.model, in, false).parts.reconstruction;
    auto trained = train_tokenizer(in, cfg, 6, 4);
    const double final_loss = tokenizer_loss(trained.model, in, false).parts.reconstruction;
    CHECK(final_loss < 0.1 * initial);
    CHECK(trained.curve.size() == 400);
  }
  SUBCASE("single item loss decreases") {
    std::mt19937_64 rng(12);
    auto cfg = small_config({2, 2}, 3, {4});
    cfg.epochs = 50;
    TokenizerInputs in{{"a"}, {random_matrix(1, 5, rng), random_matrix(1, 3, rng)}};
    const auto t = train_tokenizer(in, cfg, 5, 3);
    CHECK(t.curve.back().second < t.curve.front().second);
  }
  SUBCASE("zero epochs returns the initialization") {
    std::mt19937_64 rng(14);
    auto cfg = small_config({3, 3}, 2, {4});
    cfg.epochs = 0;
    cfg.seed = 99;
    TokenizerInputs in{{"a", "b", "c"}, {random_matrix(3, 5, rng), random_matrix(3, 3, rng)}};
    const auto t = train_tokenizer(in, cfg, 5, 3);
    CHECK(t.curve.empty());
    TokenizerModel fresh(cfg, 5, 3);
    std::mt19937_64 r2(cfg.seed);
    fresh.init(r2);
    CHECK(t.model.f_sem.layers()[0].weight.value == fresh.f_sem.layers()[0].weight.value);
    CHECK(t.model.g_cf.layers()[1].weight.value == fresh.g_cf.layers()[1].weight.value);
    // Codes sit on encoder outputs, up to the seeding noise.
    for (std::size_t k = 0; k < 2; ++k) {
      const Matrix h = t.model.encode(k, in.levels[k]);
      for (std::size_t j = 0; j < 3; ++j) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < 3; ++i)
          best = std::min(best, numerics::squared_distance(h.row(i), t.model.codebooks[k].codes.value.row(j)));
        CHECK(std::sqrt(best) < 10 * cfg.init_noise);
      }
    }
  }
}

TEST_CASE("tokenize_corpus") {
  std::mt19937_64 rng(16);
  const auto cfg = small_config({4, 4, 4}, 3, {6});
  TokenizerModel m = random_model(cfg, 5, 4, rng);
  TokenizerInputs in = random_inputs(m, 30, rng);
  for (std::size_t k = 0; k < 3; ++k)
    for (std::size_t j = 0; j < in.levels[k].cols(); ++j) in.levels[k](1, j) = in.levels[k](0, j);
  const TokenIndex idx = tokenize_corpus(m, in);
  CHECK(idx.at("i0") == idx.at("i1"));
  CHECK(tokenize_corpus(m, in) == idx);
  std::size_t total = 0;
  for (const auto& [tuple, ids] : idx.reverse) {
    CHECK(std::is_sorted(ids.begin(), ids.end()));
    for (const auto& id : ids) CHECK(idx.at(id) == tuple);
    total += ids.size();
  }
  CHECK(total == idx.forward.size());
  for (const auto& [id, tuple] : idx.forward) {
    const auto& bucket = idx.reverse.at(tuple);
    CHECK(std::find(bucket.begin(), bucket.end(), id) != bucket.end());
  }
  CHECK(index_from_text(index_to_text(idx)) == idx);
}

TEST_CASE("collision rate, utilization, purity") {
  TokenIndex idx;
  idx.vocab_sizes = {4, 4};
  idx.add("a", {0, 0});
  idx.add("b", {0, 1});
  idx.add("c", {1, 1});
  CHECK(collision_rate(idx) == 0.0);
  idx.add("d", {1, 1});
  CHECK(collision_rate(idx) == 0.5);
  CHECK(utilization(idx) == std::vector<double>{0.5, 0.5});
  CHECK_THROWS(idx.add("e", {4, 0}));
  CHECK_THROWS(idx.add("a", {0, 0}));

  TokenIndex two;
  two.vocab_sizes = {2, 2};
  two.add("x", {1, 1});
  two.add("y", {1, 1});
  CHECK(collision_rate(two) == 1.0);

  TokenIndex one;
  one.vocab_sizes = {4, 8};
  one.add("x", {3, 5});
  CHECK(utilization(one) == std::vector<double>{0.25, 0.125});

  TokenIndex full;
  full.vocab_sizes = {3, 2};
  for (int i = 0; i < 6; ++i) full.add("i" + std::to_string(i), {i % 3, i / 3});
  CHECK(utilization(full)[0] == 1.0);

  const std::map<std::string, std::string> labels = {{"a", "x"}, {"b", "x"}, {"c", "y"}, {"d", "y"}};
  CHECK(prefix_purity(idx, labels) == std::vector<double>{1.0, 1.0});
}

TEST_CASE("purity under random labels approaches 1/C") {
  std::mt19937_64 rng(18);
  TokenIndex idx;
  idx.vocab_sizes = {4, 2};
  std::map<std::string, std::string> labels;
  std::uniform_int_distribution<int> cat(0, 3);
  for (int i = 0; i < 20000; ++i) {
    const std::string id = "i" + std::to_string(i);
    idx.add(id, {i % 4, (i / 4) % 2});
    labels[id] = "c" + std::to_string(cat(rng));
  }
  const auto p = prefix_purity(idx, labels);
  CHECK(std::abs(p[0] - 0.25) < 0.02);
  CHECK(std::abs(p[1] - 0.25) < 0.02);
}

TEST_CASE("planted taxonomy gives purer level-1 prefixes than shuffled labels") {
  RunConfig cfg;
  cfg.corpus.source = "synth";
  cfg.corpus.synth.n_users = 600;
  cfg.corpus.synth.n_items = 240;
  cfg.corpus.synth.n_categories = 6;
  cfg.corpus.synth.n_types_per_category = 4;
  cfg.featurizer.d_text = 32;
  cfg.featurizer.d_cf = 16;
  cfg.tokenizer.codebook_sizes = {8, 16, 32, 32};
  cfg.tokenizer.code_dim = 16;
  cfg.tokenizer.hidden = {32};
  cfg.tokenizer.epochs = 100;
  const auto data = pipeline::prepare(pipeline::obtain_corpus(cfg), cfg);
  const auto features = pipeline::featurize_items(data, cfg.featurizer);
  const auto run = pipeline::run_tokenizer(data, features, cfg.tokenizer, cfg.featurizer.d_text,
                                           cfg.featurizer.d_cf);
  const double real = prefix_purity(run.index, data.categories)[0];

  std::vector<std::string> ids, cats;
  for (const auto& [id, c] : data.categories) {
    ids.push_back(id);
    cats.push_back(c);
  }
  std::mt19937_64 rng(20);
  double best_shuffled = 0;
  for (int t = 0; t < 50; ++t) {
    std::shuffle(cats.begin(), cats.end(), rng);
    std::map<std::string, std::string> shuffled;
    for (std::size_t i = 0; i < ids.size(); ++i) shuffled[ids[i]] = cats[i];
    best_shuffled = std::max(best_shuffled, prefix_purity(run.index, shuffled)[0]);
  }
  CHECK(real > best_shuffled);
}
