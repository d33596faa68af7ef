#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <random>

#include "cofirec/generator.hpp"
#include "cofirec/numerics/adam.hpp"
#include "cofirec/numerics/gradcheck.hpp"
#include "cofirec/pipeline.hpp"
#include "test_util.hpp"

using namespace cofirec;
using namespace cofirec::generator;

namespace {

GeneratorConfig tiny_config(std::uint64_t seed = 1) {
  GeneratorConfig c;
  c.d_model = 8;
  c.n_layers = 2;
  c.n_heads = 2;
  c.d_ff = 12;
  c.max_history = 5;
  c.seed = seed;
  return c;
}

// Sharper than the default init so that beams actually disagree.
GeneratorModel random_model(const std::vector<std::size_t>& vocab, std::uint64_t seed) {
  GeneratorModel m = make_model(tiny_config(seed), vocab);
  std::mt19937_64 rng(seed * 7 + 1);
  for (auto* p : m.parameters()) testutil::randomize(*p, rng, 0.8);
  return m;
}

std::vector<int> random_tokens(const std::vector<std::size_t>& vocab, std::size_t items,
                               std::mt19937_64& rng) {
  std::vector<int> out;
  for (std::size_t t = 0; t < items; ++t)
    for (std::size_t v : vocab) out.push_back(std::uniform_int_distribution<int>(0, static_cast<int>(v) - 1)(rng));
  return out;
}

std::vector<double> log_softmax(std::vector<double> z, double tau) {
  double mx = -1e300;
  for (double& v : z) {
    v /= tau;
    mx = std::max(mx, v);
  }
  double s = 0;
  for (double v : z) s += std::exp(v - mx);
  for (double& v : z) v -= mx + std::log(s);
  return z;
}

// Sequence log-prob of `tuple` after `history`, from one full causal pass.
double tuple_log_prob(const GeneratorModel& m, const std::vector<int>& history,
                      const std::vector<int>& tuple) {
  std::vector<int> seq = history;
  seq.insert(seq.end(), tuple.begin(), tuple.end() - 1);
  const auto logits = forward(m, seq);
  double lp = 0;
  for (std::size_t k = 0; k < tuple.size(); ++k) {
    const auto ls = log_softmax(logits[history.size() - 1 + k], m.config.temperature);
    lp += ls[tuple[k]];
  }
  return lp;
}

TokenIndex index_of(const std::vector<std::pair<std::string, TokenTuple>>& rows,
                    std::vector<std::size_t> vocab) {
  TokenIndex idx;
  idx.vocab_sizes = std::move(vocab);
  for (const auto& [id, t] : rows) idx.add(id, t);
  return idx;
}

}  // namespace

TEST_CASE("build_input") {
  const std::vector<std::size_t> vocab = {3, 4, 5};
  GeneratorModel m = random_model(vocab, 1);

  const std::vector<int> one = {0};
  const Matrix x = build_input(m, one);
  REQUIRE(x.rows() == 1);
  for (std::size_t c = 0; c < m.d_model(); ++c)
    CHECK(x(0, c) == m.id_tables[0].value(0, c) + m.level_table.value(0, c) + m.pos_table.value(0, c));

  const std::vector<int> seq = {2, 3, 4, 1, 0};
  const Matrix y = build_input(m, seq);
  // slot 4 = item 1, level 1
  for (std::size_t c = 0; c < m.d_model(); ++c)
    CHECK(y(4, c) == m.id_tables[1].value(0, c) + m.level_table.value(1, c) + m.pos_table.value(1, c));

  GeneratorModel z = m;
  for (auto* p : z.parameters()) p->value.set_zero();
  CHECK(build_input(z, seq) == Matrix(5, m.d_model()));

  auto cfg = tiny_config();
  cfg.use_level_embedding = false;
  cfg.use_position_embedding = false;
  const GeneratorModel plain = make_model(cfg, vocab);
  const Matrix p = build_input(plain, seq);
  for (std::size_t i = 0; i < seq.size(); ++i)
    for (std::size_t c = 0; c < plain.d_model(); ++c)
      CHECK(p(i, c) == plain.id_tables[i % 3].value(seq[i], c));

  const std::vector<int> bad = {3};
  CHECK_THROWS(build_input(m, bad));
  std::vector<int> too_long(3 * 7, 0);
  CHECK_THROWS(build_input(m, too_long));
}

TEST_CASE("forward arity and causality") {
  const std::vector<std::size_t> vocab = {3, 4, 5, 2};
  GeneratorModel m = random_model(vocab, 2);
  const std::vector<int> one = {1};
  const auto l1 = forward(m, one);
  REQUIRE(l1.size() == 1);
  CHECK(l1[0].size() == 4);

  std::mt19937_64 rng(3);
  const auto seq = random_tokens(vocab, 3, rng);
  const auto base = forward(m, seq);
  for (std::size_t i = 0; i < seq.size(); ++i) CHECK(base[i].size() == vocab[next_level(i, 4)]);
  for (std::size_t t = 0; t + 1 < seq.size(); ++t) {
    auto edited = seq;
    for (std::size_t j = t + 1; j < seq.size(); ++j) edited[j] = (edited[j] + 1) % static_cast<int>(vocab[j % 4]);
    const auto out = forward(m, edited);
    for (std::size_t i = 0; i <= t; ++i) CHECK(out[i] == base[i]);
  }
}

TEST_CASE("causality of gradients: the final slot receives none") {
  const std::vector<std::size_t> vocab = {3, 4, 5, 6};
  GeneratorModel m = random_model(vocab, 4);
  // The last item's final token (5) appears nowhere else at level 4.
  const std::vector<int> seq = {0, 1, 2, 0, 1, 2, 3, 1, 2, 0, 4, 5};
  numerics::zero_grads(m.parameters());
  sequence_loss(m, seq, 1, 1.0);
  for (std::size_t c = 0; c < m.d_model(); ++c) CHECK(m.id_tables[3].grad(5, c) == 0.0);
  double other = 0;
  for (std::size_t c = 0; c < m.d_model(); ++c) other += std::abs(m.id_tables[3].grad(1, c));
  CHECK(other > 0.0);
}

TEST_CASE("generator gradient check") {
  const std::vector<std::size_t> vocab = {3, 4, 3, 5};
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    GeneratorModel m = random_model(vocab, seed);
    for (auto* p : m.parameters())
      for (double& v : p->value.values()) v *= 0.5;
    std::mt19937_64 rng(seed);
    const auto seq = random_tokens(vocab, 3, rng);
    numerics::zero_grads(m.parameters());
    sequence_loss(m, seq, 1, 1.0);
    const auto rep = numerics::finite_diff_check(
        [&] { return sequence_loss(static_cast<const GeneratorModel&>(m), seq, 1).loss; },
        m.parameters());
    INFO("worst " << rep.worst_param << "[" << rep.worst_index << "]");
    CHECK(rep.max_relative_error < 1e-4);
  }
}

TEST_CASE("rank loss values") {
  const std::vector<std::vector<double>> uniform = {std::vector<double>(7, 0.3)};
  const std::vector<int> t0 = {3};
  CHECK(std::abs(rank_loss(uniform, t0, 1.0) - std::log(7.0)) < 1e-14);

  const std::vector<std::vector<double>> sharp = {{0.0, 60.0, 0.0}};
  const std::vector<int> t1 = {1};
  CHECK(rank_loss(sharp, t1, 1.0) < 1e-20);

  const std::vector<std::vector<double>> four = {{1, 2, 3}, {0.5, -0.5}, {0, 0, 0, 0}, {2, -1, 0.5}};
  const std::vector<int> targets = {2, 0, 1, 1};
  CHECK(std::abs(rank_loss(four, targets, 1.0) - 5.348473309739651) < 1e-10);
  CHECK(std::abs(rank_loss(four, targets, 0.5) - 7.707099764185761) < 1e-10);

  const std::vector<std::vector<std::vector<double>>> batch = {four, uniform};
  // mixed arity is allowed in a batch only when tuples match their logits
  const std::vector<TokenTuple> bt = {{2, 0, 1, 1}, {3}};
  CHECK(std::abs(rank_loss(batch, bt, 1.0) - 0.5 * (5.348473309739651 + std::log(7.0))) < 1e-10);

  CHECK_THROWS(rank_loss(four, targets, 0.0));
}

TEST_CASE("next-level distributions are normalized and argmax is temperature free") {
  const std::vector<std::size_t> vocab = {5, 7, 3, 9};
  GeneratorModel m = random_model(vocab, 5);
  std::mt19937_64 rng(6);
  const auto hist = random_tokens(vocab, 4, rng);
  std::vector<std::vector<std::size_t>> argmax;
  for (double tau : {0.25, 1.0, 3.0}) {
    m.config.temperature = tau;
    DecodeState st = start_decoding(m, hist);
    argmax.emplace_back();
    for (std::size_t k = 0; k < 4; ++k) {
      const auto lp = next_log_probs(m, st);
      REQUIRE(lp.size() == vocab[k]);
      double s = 0;
      for (double v : lp) s += std::exp(v);
      CHECK(std::abs(s - 1.0) < 1e-12);
      // follow the tau = 0.25 path so every temperature sees the same prefix
      const auto best = static_cast<std::size_t>(std::max_element(lp.begin(), lp.end()) - lp.begin());
      argmax.back().push_back(best);
      advance(m, st, static_cast<int>(argmax.front()[k]));
    }
  }
  CHECK(argmax[1] == argmax[0]);
  CHECK(argmax[2] == argmax[0]);
}

TEST_CASE("incremental decoding matches the full pass") {
  const std::vector<std::size_t> vocab = {4, 4, 4, 4};
  GeneratorModel m = random_model(vocab, 7);
  std::mt19937_64 rng(8);
  const auto hist = random_tokens(vocab, 3, rng);
  const std::vector<int> tuple = {1, 3, 0, 2};
  DecodeState st = start_decoding(m, hist);
  double lp = 0;
  for (int t : tuple) {
    lp += next_log_probs(m, st)[t];
    advance(m, st, t);
  }
  CHECK(std::abs(lp - tuple_log_prob(m, hist, tuple)) < 1e-10);
}

TEST_CASE("beam search equals brute force at full width") {
  const std::vector<std::size_t> vocab = {2, 2, 2, 2};
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    GeneratorModel m = random_model(vocab, seed);
    std::mt19937_64 rng(seed + 100);
    const auto hist = random_tokens(vocab, 1 + seed % 4, rng);
    std::vector<BeamHypothesis> brute;
    for (int code = 0; code < 16; ++code) {
      const TokenTuple t = {(code >> 3) & 1, (code >> 2) & 1, (code >> 1) & 1, code & 1};
      brute.push_back({t, tuple_log_prob(m, hist, t)});
    }
    std::stable_sort(brute.begin(), brute.end(),
                     [](const auto& a, const auto& b) { return a.log_prob > b.log_prob; });
    const auto beams = beam_search(m, hist, 16);
    REQUIRE(beams.size() == 16);
    for (std::size_t i = 0; i < 16; ++i) {
      CHECK(beams[i].tokens == brute[i].tokens);
      CHECK(std::abs(beams[i].log_prob - brute[i].log_prob) < 1e-10);
      CHECK(beams[i].log_prob <= 0.0);
    }
  }
}

TEST_CASE("beam width 1 is greedy") {
  const std::vector<std::size_t> vocab = {5, 6, 4, 7};
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    GeneratorModel m = random_model(vocab, seed);
    std::mt19937_64 rng(seed);
    const auto hist = random_tokens(vocab, 2, rng);
    std::vector<int> seq = hist, greedy;
    for (std::size_t k = 0; k < 4; ++k) {
      const auto lp = log_softmax(forward(m, seq).back(), 1.0);
      const int best = static_cast<int>(std::max_element(lp.begin(), lp.end()) - lp.begin());
      greedy.push_back(best);
      seq.push_back(best);
    }
    const auto beams = beam_search(m, hist, 1);
    REQUIRE(beams.size() == 1);
    CHECK(beams[0].tokens == greedy);
  }
}

TEST_CASE("uniform model ranks the lexicographically smallest tuple first") {
  const std::vector<std::size_t> vocab = {3, 3, 3, 3};
  GeneratorModel m = random_model(vocab, 9);
  for (auto& w : m.head_w) w.value.set_zero();
  for (auto& b : m.head_b) b.value.set_zero();
  const std::vector<int> hist = {2, 1, 0, 2};
  const auto beams = beam_search(m, hist, 5);
  REQUIRE(beams.size() == 5);
  CHECK(beams[0].tokens == TokenTuple{0, 0, 0, 0});
  CHECK(beams[1].tokens == TokenTuple{0, 0, 0, 1});
  CHECK(beams[4].tokens == TokenTuple{0, 0, 1, 1});
}

TEST_CASE("top-1 log-prob does not drop as the beam widens") {
  const std::vector<std::size_t> vocab = {6, 6, 8, 8};
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    GeneratorModel m = random_model(vocab, seed);
    std::mt19937_64 rng(seed * 3);
    const auto hist = random_tokens(vocab, 3, rng);
    double prev = -1e300;
    for (std::size_t w : {1, 2, 3, 5, 8, 13, 20, 40}) {
      const double top = beam_search(m, hist, w).front().log_prob;
      CHECK(top >= prev - 1e-12);
      prev = top;
    }
  }
}

TEST_CASE("sequences_to_items") {
  const TokenIndex idx = index_of({{"b", {0, 1}}, {"a", {0, 1}}, {"c", {1, 0}}}, {2, 2});
  const std::vector<BeamHypothesis> none = {{{1, 1}, -0.1}};
  CHECK(sequences_to_items(none, idx, 10).empty());

  const std::vector<BeamHypothesis> ranked = {{{1, 0}, -0.2}, {{1, 1}, -0.3}, {{0, 1}, -0.5}};
  const auto items = sequences_to_items(ranked, idx, 10);
  REQUIRE(items.size() == 3);
  CHECK(items[0].item_id == "c");
  CHECK(items[1].item_id == "a");
  CHECK(items[2].item_id == "b");
  CHECK(items[2].log_prob == -0.5);
  CHECK(sequences_to_items(ranked, idx, 2).size() == 2);
}

TEST_CASE("order ablation") {
  const TokenIndex idx = index_of({{"a", {0, 1, 2, 3}}, {"b", {1, 0, 4, 1}}, {"c", {2, 2, 0, 5}}}, {3, 3, 5, 6});
  CHECK(apply_order_ablation(idx, OrderMode::identity, 1) == idx);
  const TokenIndex rev = apply_order_ablation(idx, OrderMode::reverse, 1);
  CHECK(rev.at("b") == TokenTuple{1, 4, 0, 1});
  CHECK(rev.vocab_sizes == std::vector<std::size_t>{6, 5, 3, 3});
  CHECK(apply_order_ablation(rev, OrderMode::reverse, 1) == idx);
  const TokenIndex r1 = apply_order_ablation(idx, OrderMode::random, 42);
  CHECK(r1 == apply_order_ablation(idx, OrderMode::random, 42));
  const auto perm = order_permutation(OrderMode::random, 4, 42);
  for (const auto& [id, t] : idx.forward)
    for (std::size_t j = 0; j < 4; ++j) CHECK(r1.at(id)[j] == t[perm[j]]);
  CHECK(parse_order_mode("reverse") == OrderMode::reverse);
  CHECK_THROWS(parse_order_mode("sideways"));
}

TEST_CASE("training: memorization and zero epochs") {
  const TokenIndex idx = index_of({{"a", {0, 1, 2, 3}}, {"b", {2, 0, 1, 1}}, {"c", {1, 2, 0, 0}}}, {3, 3, 3, 4});
  corpus::DatasetSplit split;
  split.train.push_back({"u", {"a", "b"}});
  split.valid.push_back({"u", {"a", "b"}, "c"});
  split.test.push_back({"u", {"a", "b", "c"}, "a"});

  auto cfg = tiny_config();
  cfg.epochs = 0;
  GeneratorModel zero = make_model(cfg, idx.vocab_sizes);
  const GeneratorModel before = zero;
  const auto r0 = train_generator(zero, split, idx);
  CHECK(r0.curve.empty());
  for (std::size_t i = 0; i < before.parameters().size(); ++i)
    CHECK(zero.parameters()[i]->value == before.parameters()[i]->value);

  cfg.epochs = 300;
  cfg.learning_rate = 1e-2;
  GeneratorModel m = make_model(cfg, idx.vocab_sizes);
  const auto report = train_generator(m, split, idx);
  REQUIRE(report.curve.size() == 300);
  CHECK(report.curve.back().train_loss < 0.01);
}

TEST_CASE("synthetic corpus: training beats half the uniform loss") {
  RunConfig cfg;
  cfg.corpus.source = "synth";
  const auto data = pipeline::prepare(pipeline::obtain_corpus(cfg), cfg);
  const auto features = pipeline::featurize_items(data, cfg.featurizer);
  const auto tok = pipeline::run_tokenizer(data, features, cfg.tokenizer, cfg.featurizer.d_text,
                                           cfg.featurizer.d_cf);
  const auto gen = pipeline::run_generator(data, tok.index, cfg.generator);
  double uniform = 0;
  for (std::size_t v : tok.index.vocab_sizes) uniform += std::log(static_cast<double>(v));
  CHECK(gen.report.curve.back().train_loss < uniform / 2);
}
