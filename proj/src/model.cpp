#include "gfv/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace gfv {

void ModelConfig::validate() const {
  if (vocab < 2) throw DomainError("model: vocab must be >= 2, got " + std::to_string(vocab));
  if (num_classes < 1)
    throw DomainError("model: num_classes must be >= 1, got " + std::to_string(num_classes));
  if (seq_len < 1)
    throw DomainError("model: seq_len must be >= 1, got " + std::to_string(seq_len));
  if (dim < 1 || layers < 1 || heads < 1 || mlp_ratio < 1)
    throw DomainError("model: dim, layers, heads, mlp_ratio must all be >= 1");
  if (dim % heads != 0)
    throw DomainError("model: dim " + std::to_string(dim) + " not divisible by heads " +
                      std::to_string(heads));
  if (dropout != 0.0)
    throw DomainError("model: only dropout 0 is supported, got " + std::to_string(dropout));
}

Tensor& ParamStore::add(const std::string& name, Tensor t) {
  if (map_.count(name) > 0) throw ContractError("params: duplicate name " + name);
  order_.push_back(name);
  return map_.emplace(name, std::move(t)).first->second;
}

Tensor& ParamStore::at(const std::string& name) {
  auto it = map_.find(name);
  if (it == map_.end()) throw ContractError("params: no tensor named " + name);
  return it->second;
}

const Tensor& ParamStore::at(const std::string& name) const {
  auto it = map_.find(name);
  if (it == map_.end()) throw ContractError("params: no tensor named " + name);
  return it->second;
}

std::vector<Tensor> ParamStore::tensors() const {
  std::vector<Tensor> out;
  out.reserve(order_.size());
  for (const std::string& name : order_) out.push_back(map_.at(name));
  return out;
}

size_t ParamStore::scalar_count() const {
  size_t n = 0;
  for (const auto& [name, t] : map_) n += static_cast<size_t>(t.size());
  return n;
}

namespace {

std::string blk(int i, const char* leaf) {
  return "blk" + std::to_string(i) + "." + leaf;
}

}  // namespace

std::vector<ParamSpec> param_specs(const ModelConfig& cfg) {
  cfg.validate();
  const int d = cfg.dim, r = cfg.mlp_ratio;
  std::vector<ParamSpec> specs;
  specs.push_back({"tok_emb", {cfg.vocab, d}, ParamInit::kWeight});
  specs.push_back({"cls_emb", {cfg.num_classes, d}, ParamInit::kWeight});
  specs.push_back({"pos_emb", {cfg.seq_len + 1, d}, ParamInit::kWeight});
  for (int i = 0; i < cfg.layers; ++i) {
    specs.push_back({blk(i, "ln1.g"), {d}, ParamInit::kOne});
    specs.push_back({blk(i, "ln1.b"), {d}, ParamInit::kZero});
    specs.push_back({blk(i, "wq"), {d, d}, ParamInit::kWeight});
    specs.push_back({blk(i, "bq"), {d}, ParamInit::kZero});
    specs.push_back({blk(i, "wk"), {d, d}, ParamInit::kWeight});
    specs.push_back({blk(i, "bk"), {d}, ParamInit::kZero});
    specs.push_back({blk(i, "wv"), {d, d}, ParamInit::kWeight});
    specs.push_back({blk(i, "bv"), {d}, ParamInit::kZero});
    specs.push_back({blk(i, "wo"), {d, d}, ParamInit::kWeight});
    specs.push_back({blk(i, "bo"), {d}, ParamInit::kZero});
    specs.push_back({blk(i, "ln2.g"), {d}, ParamInit::kOne});
    specs.push_back({blk(i, "ln2.b"), {d}, ParamInit::kZero});
    specs.push_back({blk(i, "w1"), {d, r * d}, ParamInit::kWeight});
    specs.push_back({blk(i, "b1"), {r * d}, ParamInit::kZero});
    specs.push_back({blk(i, "w2"), {r * d, d}, ParamInit::kWeight});
    specs.push_back({blk(i, "b2"), {d}, ParamInit::kZero});
  }
  specs.push_back({"lnf.g", {d}, ParamInit::kOne});
  specs.push_back({"lnf.b", {d}, ParamInit::kZero});
  specs.push_back({"head.w", {d, cfg.vocab}, ParamInit::kWeight});
  specs.push_back({"head.b", {cfg.vocab}, ParamInit::kZero});
  return specs;
}

size_t count_params(const ModelConfig& cfg) {
  size_t n = 0;
  for (const ParamSpec& s : param_specs(cfg)) {
    size_t p = 1;
    for (int d : s.dims) p *= static_cast<size_t>(d);
    n += p;
  }
  return n;
}

namespace {

// Handles for one transformer block, fetched once per pass.
struct Block {
  Tensor ln1g, ln1b, wq, bq, wk, bk, wv, bv, wo, bo;
  Tensor ln2g, ln2b, w1, b1, w2, b2;
};

Block fetch_block(const ParamStore& p, int i) {
  Block L;
  L.ln1g = p.at(blk(i, "ln1.g"));
  L.ln1b = p.at(blk(i, "ln1.b"));
  L.wq = p.at(blk(i, "wq"));
  L.bq = p.at(blk(i, "bq"));
  L.wk = p.at(blk(i, "wk"));
  L.bk = p.at(blk(i, "bk"));
  L.wv = p.at(blk(i, "wv"));
  L.bv = p.at(blk(i, "bv"));
  L.wo = p.at(blk(i, "wo"));
  L.bo = p.at(blk(i, "bo"));
  L.ln2g = p.at(blk(i, "ln2.g"));
  L.ln2b = p.at(blk(i, "ln2.b"));
  L.w1 = p.at(blk(i, "w1"));
  L.b1 = p.at(blk(i, "b1"));
  L.w2 = p.at(blk(i, "w2"));
  L.b2 = p.at(blk(i, "b2"));
  return L;
}

std::vector<Block> fetch_blocks(const ParamStore& p, int layers) {
  std::vector<Block> out;
  out.reserve(layers);
  for (int i = 0; i < layers; ++i) out.push_back(fetch_block(p, i));
  return out;
}

// Additive causal mask: position j may attend positions <= j. The constant
// is large enough that exp(masked - rowmax) underflows to exactly 0, which
// keeps masked columns out of the softmax bit for bit.
Tensor causal_mask(int n) {
  Tensor m = Tensor::zeros({n, n});
  double* d = m.data();
  for (int r = 0; r < n; ++r)
    for (int c = r + 1; c < n; ++c) d[static_cast<size_t>(r) * n + c] = -1e30;
  return m;
}

// Head-split score/softmax/mix stage shared by the full pass (q, k, v all m
// rows) and incremental decoding (one query row against cached k/v). `mask`
// may be undefined when every row is allowed to see every column.
Tensor attention_mix(const Block& L, const Tensor& q, const Tensor& k, const Tensor& v,
                     const Tensor& mask, int heads, int head_dim) {
  const double sc = 1.0 / std::sqrt(static_cast<double>(head_dim));
  std::vector<Tensor> outs;
  outs.reserve(heads);
  for (int h = 0; h < heads; ++h) {
    Tensor qh = slice_cols(q, h * head_dim, (h + 1) * head_dim);
    Tensor kh = slice_cols(k, h * head_dim, (h + 1) * head_dim);
    Tensor vh = slice_cols(v, h * head_dim, (h + 1) * head_dim);
    Tensor scores = scale(matmul(qh, transpose(kh)), sc);
    if (mask.defined()) scores = add(scores, mask);
    outs.push_back(matmul(softmax_rows(scores), vh));
  }
  return add_row_bias(matmul(concat_cols(outs), L.wo), L.bo);
}

Tensor attention(const Block& L, const Tensor& a, const Tensor& mask, int heads,
                 int head_dim) {
  Tensor q = add_row_bias(matmul(a, L.wq), L.bq);
  Tensor k = add_row_bias(matmul(a, L.wk), L.bk);
  Tensor v = add_row_bias(matmul(a, L.wv), L.bv);
  return attention_mix(L, q, k, v, mask, heads, head_dim);
}

Tensor mlp(const Block& L, const Tensor& a) {
  return add_row_bias(matmul(gelu(add_row_bias(matmul(a, L.w1), L.b1)), L.w2), L.b2);
}

// Embeds [condition] ++ ids, adds positional rows, runs the block stack and
// the final norm. Both the teacher-forced pass and the recompute reference
// for decoding go through here, so they share every numeric path.
Tensor trunk(const ModelConfig& cfg, const ParamStore& params, int class_id,
             const std::vector<int>& ids, const MaskPlan* plan) {
  if (class_id < 0 || class_id >= cfg.num_classes)
    throw IndexError("model: class id " + std::to_string(class_id) + " outside [0," +
                     std::to_string(cfg.num_classes) + ")");
  if (static_cast<int>(ids.size()) > cfg.seq_len)
    throw ShapeError("model: " + std::to_string(ids.size()) + " ids exceed seq_len " +
                     std::to_string(cfg.seq_len));

  Tensor x = slice_rows(params.at("cls_emb"), class_id, class_id + 1);
  if (!ids.empty()) {
    Tensor tok = embedding_lookup(params.at("tok_emb"), ids);
    if (plan != nullptr) {
      if (plan->tokens() != static_cast<int>(ids.size()))
        throw ShapeError("model: mask plan covers " + std::to_string(plan->tokens()) +
                         " tokens, input has " + std::to_string(ids.size()));
      tok = mul(tok, keep_matrix(*plan, cfg.dim));
    }
    x = concat_rows({x, tok});
  }
  const int n = x.rows();
  x = add(x, slice_rows(params.at("pos_emb"), 0, n));

  const Tensor mask = causal_mask(n);
  for (const Block& L : fetch_blocks(params, cfg.layers)) {
    x = add(x, attention(L, layer_norm(x, L.ln1g, L.ln1b), mask, cfg.heads, cfg.head_dim()));
    x = add(x, mlp(L, layer_norm(x, L.ln2g, L.ln2b)));
  }
  return layer_norm(x, params.at("lnf.g"), params.at("lnf.b"));
}

Tensor head_logits(const ParamStore& params, const Tensor& hidden) {
  return add_row_bias(matmul(hidden, params.at("head.w")), params.at("head.b"));
}

}  // namespace

ParamStore init_params(const ModelConfig& cfg, uint64_t seed) {
  ParamStore ps;
  Rng rng = make_rng(derive_seed(seed, rng_stream::kInit));
  std::normal_distribution<double> dist(0.0, 0.02);
  for (const ParamSpec& spec : param_specs(cfg)) {
    Tensor t = Tensor::zeros(spec.dims, true);
    switch (spec.init) {
      case ParamInit::kWeight: {
        double* d = t.data();
        for (int64_t i = 0; i < t.size(); ++i) d[i] = dist(rng);
        break;
      }
      case ParamInit::kZero:
        break;
      case ParamInit::kOne:
        std::fill_n(t.data(), t.size(), 1.0);
        break;
    }
    ps.add(spec.name, std::move(t));
  }
  return ps;
}

ForwardResult forward_train(const ModelConfig& cfg, const ParamStore& params,
                            int class_id, const std::vector<int>& token_ids,
                            const MaskPlan* plan) {
  cfg.validate();
  if (static_cast<int>(token_ids.size()) != cfg.seq_len)
    throw ShapeError("model: expected " + std::to_string(cfg.seq_len) + " token ids, got " +
                     std::to_string(token_ids.size()));
  Tensor hidden = trunk(cfg, params, class_id, token_ids, plan);
  Tensor logits = slice_rows(head_logits(params, hidden), 0, cfg.seq_len);
  Tensor loss = cross_entropy(logits, token_ids);
  return {logits, loss};
}

Tensor prefix_logits(const ModelConfig& cfg, const ParamStore& params, int class_id,
                     const std::vector<int>& prefix) {
  cfg.validate();
  Tensor hidden = trunk(cfg, params, class_id, prefix, nullptr);
  const int n = hidden.rows();
  return head_logits(params, slice_rows(hidden, n - 1, n));
}

void SamplerConfig::validate(int vocab) const {
  if (!(temperature >= 0.0) || !std::isfinite(temperature))
    throw DomainError("sampler: temperature must be finite and >= 0");
  if (top_k < 1 || top_k > vocab)
    throw DomainError("sampler: top_k " + std::to_string(top_k) + " outside [1," +
                      std::to_string(vocab) + "]");
}

int sample_from_logits(const double* logits, int vocab, const SamplerConfig& sampler,
                       Rng& rng) {
  sampler.validate(vocab);
  auto better = [&](int a, int b) {
    if (logits[a] != logits[b]) return logits[a] > logits[b];
    return a < b;
  };
  if (sampler.temperature < 1e-6) {
    int best = 0;
    for (int i = 1; i < vocab; ++i)
      if (better(i, best)) best = i;
    return best;
  }

  std::vector<int> kept(vocab);
  std::iota(kept.begin(), kept.end(), 0);
  if (sampler.top_k < vocab) {
    std::partial_sort(kept.begin(), kept.begin() + sampler.top_k, kept.end(), better);
    kept.resize(sampler.top_k);
    std::sort(kept.begin(), kept.end());
  }
  if (kept.size() == 1) return kept[0];

  double mx = logits[kept[0]];
  for (int i : kept) mx = std::max(mx, logits[i]);
  std::vector<double> w(kept.size());
  double total = 0.0;
  for (size_t i = 0; i < kept.size(); ++i) {
    w[i] = std::exp((logits[kept[i]] - mx) / sampler.temperature);
    total += w[i];
  }
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng) * total;
  double cum = 0.0;
  for (size_t i = 0; i < kept.size(); ++i) {
    cum += w[i];
    if (u < cum) return kept[i];
  }
  return kept.back();
}

std::vector<int> generate(const ModelConfig& cfg, const ParamStore& params, int class_id,
                          const SamplerConfig& sampler) {
  cfg.validate();
  sampler.validate(cfg.vocab);
  if (class_id < 0 || class_id >= cfg.num_classes)
    throw IndexError("model: class id " + std::to_string(class_id) + " outside [0," +
                     std::to_string(cfg.num_classes) + ")");

  const std::vector<Block> blocks = fetch_blocks(params, cfg.layers);
  const Tensor tok_emb = params.at("tok_emb");
  const Tensor pos_emb = params.at("pos_emb");
  const Tensor lnf_g = params.at("lnf.g");
  const Tensor lnf_b = params.at("lnf.b");
  const Tensor no_mask;

  struct LayerCache {
    Tensor k, v;  // one row per seen position
  };
  std::vector<LayerCache> cache(cfg.layers);

  Rng rng = make_rng(sampler.seed);
  std::vector<int> out;
  out.reserve(cfg.seq_len);

  Tensor xrow = add(slice_rows(params.at("cls_emb"), class_id, class_id + 1),
                    slice_rows(pos_emb, 0, 1));
  while (true) {
    Tensor x = xrow;
    for (int l = 0; l < cfg.layers; ++l) {
      const Block& L = blocks[l];
      Tensor a = layer_norm(x, L.ln1g, L.ln1b);
      Tensor q = add_row_bias(matmul(a, L.wq), L.bq);
      Tensor krow = add_row_bias(matmul(a, L.wk), L.bk);
      Tensor vrow = add_row_bias(matmul(a, L.wv), L.bv);
      cache[l].k = cache[l].k.defined() ? concat_rows({cache[l].k, krow}) : krow;
      cache[l].v = cache[l].v.defined() ? concat_rows({cache[l].v, vrow}) : vrow;
      x = add(x, attention_mix(L, q, cache[l].k, cache[l].v, no_mask, cfg.heads,
                               cfg.head_dim()));
      x = add(x, mlp(L, layer_norm(x, L.ln2g, L.ln2b)));
    }
    Tensor logits = head_logits(params, layer_norm(x, lnf_g, lnf_b));
    out.push_back(sample_from_logits(logits.data(), cfg.vocab, sampler, rng));
    if (static_cast<int>(out.size()) == cfg.seq_len) break;
    const int p = static_cast<int>(out.size());
    xrow = add(embedding_lookup(tok_emb, {out.back()}), slice_rows(pos_emb, p, p + 1));
  }
  return out;
}

std::vector<int> generate_recompute(const ModelConfig& cfg, const ParamStore& params,
                                    int class_id, const SamplerConfig& sampler) {
  cfg.validate();
  sampler.validate(cfg.vocab);
  Rng rng = make_rng(sampler.seed);
  std::vector<int> out;
  out.reserve(cfg.seq_len);
  for (int j = 0; j < cfg.seq_len; ++j) {
    Tensor logits = prefix_logits(cfg, params, class_id, out);
    out.push_back(sample_from_logits(logits.data(), cfg.vocab, sampler, rng));
  }
  return out;
}

}  // namespace gfv
