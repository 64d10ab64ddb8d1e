#include <cmath>
#include <cstring>
#include <vector>

#include "doctest.h"
#include "gfv/model.hpp"
#include "gfv/optim.hpp"
#include "testers.hpp"

using namespace gfv;
using gfv::testing::fd_max_rel_err;

namespace {

ModelConfig toy_config() {
  ModelConfig cfg;
  cfg.vocab = 8;
  cfg.num_classes = 2;
  cfg.seq_len = 8;
  cfg.dim = 8;
  cfg.layers = 2;
  cfg.heads = 2;
  cfg.mlp_ratio = 2;
  return cfg;
}

std::vector<int> random_ids(int n, int vocab, Rng& rng) {
  std::uniform_int_distribution<int> d(0, vocab - 1);
  std::vector<int> ids(n);
  for (int& id : ids) id = d(rng);
  return ids;
}

bool same_bits(const Tensor& a, const Tensor& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) == 0;
}

MaskPlan all_keep_plan(int tokens, int h) {
  MaskPlan plan;
  plan.h = h;
  plan.variances.assign(tokens / h, 1.0);
  plan.ratios.assign(tokens / h, 0.0);
  plan.keep.assign(tokens, 1);
  return plan;
}

}  // namespace

TEST_CASE("model config validation") {
  ModelConfig cfg = toy_config();
  CHECK_NOTHROW(cfg.validate());
  cfg.heads = 3;  // 8 % 3 != 0
  CHECK_THROWS_AS(cfg.validate(), DomainError);
  cfg = toy_config();
  cfg.dropout = 0.1;
  CHECK_THROWS_AS(cfg.validate(), DomainError);
  cfg = toy_config();
  cfg.vocab = 1;
  CHECK_THROWS_AS(cfg.validate(), DomainError);
}

TEST_CASE("parameter count matches the hand-computed formula") {
  // default recipe: K=64, S=256, d=128, 4 layers, 4 heads, mlp_ratio 4, 3 classes
  ModelConfig cfg;
  // embeddings 64*128 + 3*128 + 257*128; per layer 2 norms (2*128 each),
  // 4 projections (128*128+128 each), mlp 128*512+512 + 512*128+128;
  // final norm 2*128; head 128*64+64
  const size_t embeddings = 8192 + 384 + 32896;
  const size_t per_layer = 2 * 256 + 4 * 16512 + 66048 + 65664;
  const size_t expect = embeddings + 4 * per_layer + 256 + 8256;
  CHECK(count_params(cfg) == expect);
  CHECK(count_params(cfg) == 843072);

  ParamStore ps = init_params(cfg, 1);
  CHECK(ps.scalar_count() == expect);

  ModelConfig more = cfg;
  more.layers = 8;
  CHECK(count_params(more) - count_params(cfg) == 4 * per_layer);
}

TEST_CASE("parameter store is ordered and validates names") {
  ParamStore ps = init_params(toy_config(), 3);
  CHECK(ps.names().front() == "tok_emb");
  CHECK(ps.names().back() == "head.b");
  CHECK(ps.tensors().size() == ps.names().size());
  CHECK_THROWS_AS(ps.at("nope"), ContractError);
  CHECK_THROWS_AS(ps.add("tok_emb", Tensor::zeros({1})), ContractError);
  // norm gains start at 1, biases at 0
  for (double v : ps.at("blk0.ln1.g").values()) CHECK(v == 1.0);
  for (double v : ps.at("blk0.bq").values()) CHECK(v == 0.0);
  for (double v : ps.at("tok_emb").values()) CHECK(std::fabs(v) < 0.2);
}

TEST_CASE("untrained loss sits at ln(vocab)") {
  ModelConfig cfg = toy_config();
  cfg.vocab = 64;
  cfg.seq_len = 32;
  cfg.dim = 32;
  const double ln_k = std::log(64.0);
  for (uint64_t seed : {1ull, 2ull, 3ull}) {
    ParamStore ps = init_params(cfg, seed);
    Rng rng = make_rng(seed + 100);
    auto ids = random_ids(cfg.seq_len, cfg.vocab, rng);
    ForwardResult r = forward_train(cfg, ps, 1, ids);
    CHECK(std::fabs(r.loss.item() - ln_k) / ln_k < 0.05);
  }
}

TEST_CASE("perturbing a token never reaches logits at earlier positions") {
  ModelConfig cfg = toy_config();
  cfg.seq_len = 24;
  cfg.dim = 32;
  cfg.heads = 4;
  ParamStore ps = init_params(cfg, 7);
  Rng rng = make_rng(8);
  auto ids = random_ids(cfg.seq_len, cfg.vocab, rng);

  ForwardResult base = forward_train(cfg, ps, 0, ids);
  for (int j : {0, 5, cfg.seq_len - 1}) {
    auto poked = ids;
    poked[j] = (poked[j] + 1) % cfg.vocab;
    ForwardResult r = forward_train(cfg, ps, 0, poked);
    // rows 0..j depend only on ids[0..j-1]; they must be bitwise untouched
    CHECK(std::memcmp(base.logits.data(), r.logits.data(),
                      sizeof(double) * static_cast<size_t>(j + 1) * cfg.vocab) == 0);
    // and the next position, which consumes the perturbed embedding, must move
    if (j + 1 < cfg.seq_len) {
      bool later_changed = false;
      for (int c = 0; c < cfg.vocab && !later_changed; ++c)
        later_changed = base.logits.at(j + 1, c) != r.logits.at(j + 1, c);
      CHECK(later_changed);
    }
  }
}

TEST_CASE("omitting the mask plan equals an all-keep plan bitwise") {
  ModelConfig cfg = toy_config();
  cfg.seq_len = 16;
  ParamStore ps = init_params(cfg, 5);
  Rng rng = make_rng(6);
  auto ids = random_ids(cfg.seq_len, cfg.vocab, rng);
  MaskPlan keep_all = all_keep_plan(cfg.seq_len, 8);

  ForwardResult bare = forward_train(cfg, ps, 1, ids);
  ForwardResult planned = forward_train(cfg, ps, 1, ids, &keep_all);
  CHECK(same_bits(bare.logits, planned.logits));
  CHECK(bare.loss.item() == planned.loss.item());
}

TEST_CASE("masked positions cut the input path but stay supervised") {
  ModelConfig cfg = toy_config();
  cfg.seq_len = 8;
  ParamStore ps = init_params(cfg, 9);
  std::vector<int> ids = {0, 1, 2, 3, 4, 5, 6, 7};  // all distinct
  MaskPlan plan = all_keep_plan(cfg.seq_len, 4);
  plan.keep[2] = 0;
  plan.keep[5] = 0;

  Tape tape;
  ForwardResult r = forward_train(cfg, ps, 0, ids, &plan);
  backward(r.loss);
  const auto& g = ps.at("tok_emb").grad();
  const int d = cfg.dim;
  auto row_norm = [&](int row) {
    double s = 0.0;
    for (int c = 0; c < d; ++c) s += std::fabs(g[static_cast<size_t>(row) * d + c]);
    return s;
  };
  // ids 2 and 5 enter only through zeroed embeddings: no gradient reaches
  // them. id 7 sits at the final position, whose own prediction row is
  // dropped, so it too is out of the graph.
  CHECK(row_norm(2) == 0.0);
  CHECK(row_norm(5) == 0.0);
  CHECK(row_norm(0) > 0.0);
  CHECK(row_norm(6) > 0.0);
  CHECK(row_norm(7) == 0.0);
  // the condition embedding row is learnable and in the graph
  double cg = 0.0;
  for (int c = 0; c < d; ++c) cg += std::fabs(ps.at("cls_emb").grad()[c]);
  CHECK(cg > 0.0);
}

TEST_CASE("full training loss passes the finite-difference audit") {
  ModelConfig cfg = toy_config();
  ParamStore ps = init_params(cfg, 11);
  Rng rng = make_rng(12);
  auto ids = random_ids(cfg.seq_len, cfg.vocab, rng);
  MaskPlan plan = all_keep_plan(cfg.seq_len, 4);
  plan.keep[3] = 0;  // exercise the mask multiply inside the graph

  auto leaves = ps.tensors();  // handles share storage with the model
  auto loss_fn = [&](std::vector<Tensor>&) {
    return forward_train(cfg, ps, 1, ids, &plan).loss;
  };
  double err = fd_max_rel_err(loss_fn, leaves, rng, 1e-5, 4);
  CHECK(err < 1e-4);
}

TEST_CASE("prefix logits reproduce the teacher-forced rows bitwise") {
  ModelConfig cfg = toy_config();
  cfg.seq_len = 12;
  ParamStore ps = init_params(cfg, 13);
  Rng rng = make_rng(14);
  auto ids = random_ids(cfg.seq_len, cfg.vocab, rng);
  ForwardResult full = forward_train(cfg, ps, 1, ids);
  for (int p : {0, 1, 5, 11}) {
    std::vector<int> prefix(ids.begin(), ids.begin() + p);
    Tensor row = prefix_logits(cfg, ps, 1, prefix);
    CHECK(std::memcmp(row.data(), full.logits.data() + static_cast<size_t>(p) * cfg.vocab,
                      sizeof(double) * cfg.vocab) == 0);
  }
}

TEST_CASE("sampler validation and greedy modes") {
  std::vector<double> logits = {0.2, 1.4, 1.4, -3.0};
  Rng rng = make_rng(1);
  SamplerConfig bad;
  bad.top_k = 0;
  CHECK_THROWS_AS(sample_from_logits(logits.data(), 4, bad, rng), DomainError);
  bad.top_k = 5;
  CHECK_THROWS_AS(sample_from_logits(logits.data(), 4, bad, rng), DomainError);
  bad.top_k = 4;
  bad.temperature = -1.0;
  CHECK_THROWS_AS(sample_from_logits(logits.data(), 4, bad, rng), DomainError);

  SamplerConfig greedy;
  greedy.temperature = 1e-9;
  greedy.top_k = 4;
  // tie between 1 and 2 resolves to the lower index, without drawing
  Rng before = rng;
  CHECK(sample_from_logits(logits.data(), 4, greedy, rng) == 1);
  CHECK(rng == before);

  SamplerConfig k1;
  k1.temperature = 5.0;
  k1.top_k = 1;
  CHECK(sample_from_logits(logits.data(), 4, k1, rng) == 1);
  CHECK(rng == before);
}

TEST_CASE("top_k truncation restricts the support") {
  std::vector<double> logits = {0.0, 3.0, 1.0, 2.0};
  SamplerConfig s;
  s.temperature = 1.0;
  s.top_k = 2;  // support {1, 3}
  Rng rng = make_rng(21);
  int counts[4] = {0, 0, 0, 0};
  for (int i = 0; i < 4000; ++i) ++counts[sample_from_logits(logits.data(), 4, s, rng)];
  CHECK(counts[0] == 0);
  CHECK(counts[2] == 0);
  CHECK(counts[1] > counts[3]);
  CHECK(counts[3] > 0);
}

TEST_CASE("full-support sampling matches the softmax categorical (chi-square)") {
  const std::vector<double> logits = {0.3, 1.1, -0.5, 0.7};
  SamplerConfig s;
  s.temperature = 1.0;
  s.top_k = 4;
  const int n = 20000;
  Rng rng = make_rng(31);
  int counts[4] = {0, 0, 0, 0};
  for (int i = 0; i < n; ++i) ++counts[sample_from_logits(logits.data(), 4, s, rng)];

  double z = 0.0, p[4];
  for (int i = 0; i < 4; ++i) z += std::exp(logits[i]);
  for (int i = 0; i < 4; ++i) p[i] = std::exp(logits[i]) / z;
  double chi2 = 0.0;
  for (int i = 0; i < 4; ++i) {
    const double expect = n * p[i];
    chi2 += (counts[i] - expect) * (counts[i] - expect) / expect;
  }
  // df = 3, p = 0.001
  CHECK(chi2 < 16.266);
}

TEST_CASE("temperature scaling sharpens the draw distribution") {
  std::vector<double> logits = {0.0, 1.0};
  SamplerConfig s;
  s.top_k = 2;
  Rng rng = make_rng(41);
  auto frac1 = [&](double temp, int n) {
    s.temperature = temp;
    int c = 0;
    for (int i = 0; i < n; ++i) c += sample_from_logits(logits.data(), 2, s, rng);
    return static_cast<double>(c) / n;
  };
  const double sharp = frac1(0.25, 8000);  // sigmoid(4) = 0.982
  const double soft = frac1(4.0, 8000);    // sigmoid(0.25) = 0.562
  CHECK(sharp == doctest::Approx(0.982).epsilon(0.01));
  CHECK(soft == doctest::Approx(0.562).epsilon(0.02));
}

TEST_CASE("cached decoding equals full recomputation for many seeds") {
  ModelConfig cfg = toy_config();
  cfg.seq_len = 16;
  cfg.dim = 32;
  cfg.vocab = 16;
  ParamStore ps = init_params(cfg, 17);
  SamplerConfig s;
  s.temperature = 1.0;
  s.top_k = 16;
  for (uint64_t seed = 0; seed < 25; ++seed) {
    s.seed = seed;
    auto fast = generate(cfg, ps, static_cast<int>(seed % 2), s);
    auto slow = generate_recompute(cfg, ps, static_cast<int>(seed % 2), s);
    REQUIRE(fast.size() == static_cast<size_t>(cfg.seq_len));
    CHECK(fast == slow);
    for (int id : fast) CHECK((id >= 0 && id < cfg.vocab));
  }
}

TEST_CASE("near-zero temperature and top_k=1 both reduce to greedy decoding") {
  ModelConfig cfg = toy_config();
  cfg.seq_len = 12;
  ParamStore ps = init_params(cfg, 19);
  SamplerConfig cold;
  cold.temperature = 1e-9;
  cold.top_k = cfg.vocab;
  cold.seed = 5;
  SamplerConfig k1;
  k1.temperature = 3.0;
  k1.top_k = 1;
  k1.seed = 99;  // seed is irrelevant on a singleton support
  auto a = generate(cfg, ps, 0, cold);
  auto b = generate(cfg, ps, 0, k1);
  CHECK(a == b);

  // and the greedy chain agrees with argmax over prefix logits
  std::vector<int> manual;
  for (int j = 0; j < cfg.seq_len; ++j) {
    Tensor row = prefix_logits(cfg, ps, 0, manual);
    int best = 0;
    for (int c = 1; c < cfg.vocab; ++c)
      if (row.values()[c] > row.values()[best]) best = c;
    manual.push_back(best);
  }
  CHECK(a == manual);
}

TEST_CASE("generation is deterministic per seed and varies across seeds") {
  ModelConfig cfg = toy_config();
  cfg.seq_len = 16;
  ParamStore ps = init_params(cfg, 23);
  SamplerConfig s;
  s.seed = 7;
  s.top_k = cfg.vocab;
  auto a = generate(cfg, ps, 1, s);
  auto b = generate(cfg, ps, 1, s);
  CHECK(a == b);
  s.seed = 8;
  CHECK(generate(cfg, ps, 1, s) != a);
}

TEST_CASE("forward input validation") {
  ModelConfig cfg = toy_config();
  ParamStore ps = init_params(cfg, 29);
  std::vector<int> ids(cfg.seq_len, 0);
  CHECK_THROWS_AS(forward_train(cfg, ps, 5, ids), IndexError);
  ids[3] = cfg.vocab;
  CHECK_THROWS_AS(forward_train(cfg, ps, 0, ids), IndexError);
  std::vector<int> short_ids(cfg.seq_len - 1, 0);
  CHECK_THROWS_AS(forward_train(cfg, ps, 0, short_ids), ShapeError);
  MaskPlan plan = all_keep_plan(cfg.seq_len - 4, 4);
  std::vector<int> ok(cfg.seq_len, 0);
  CHECK_THROWS_AS(forward_train(cfg, ps, 0, ok, &plan), ShapeError);
}
