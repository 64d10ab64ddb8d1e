#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "gfv/masking.hpp"
#include "gfv/rng.hpp"
#include "gfv/tensor.hpp"

namespace gfv {

// Decoder-only causal transformer over video tokens, conditioned by a
// learnable class embedding prepended to the sequence.
struct ModelConfig {
  int vocab = 64;        // token codebook size K
  int num_classes = 3;
  int seq_len = 256;     // video tokens per clip (condition row not counted)
  int dim = 128;
  int layers = 4;
  int heads = 4;
  int mlp_ratio = 4;
  double dropout = 0.0;  // kept for config parity; only 0 is supported

  int head_dim() const { return dim / heads; }
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

// Named parameter tensors in a stable registration order; the order defines
// the optimizer slot layout and the checkpoint tensor sequence.
class ParamStore {
 public:
  Tensor& add(const std::string& name, Tensor t);
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  bool contains(const std::string& name) const { return map_.count(name) > 0; }
  const std::vector<std::string>& names() const { return order_; }
  std::vector<Tensor> tensors() const;  // handles, registration order
  size_t scalar_count() const;

 private:
  std::vector<std::string> order_;
  std::unordered_map<std::string, Tensor> map_;
};

// Canonical parameter inventory: one entry per learnable tensor in
// registration order, with its initialization family. Checkpoint code uses
// it to validate structure without instantiating a model.
enum class ParamInit { kWeight, kZero, kOne };

struct ParamSpec {
  std::string name;
  std::vector<int> dims;
  ParamInit init = ParamInit::kWeight;
};

std::vector<ParamSpec> param_specs(const ModelConfig& cfg);

// Exact learnable-scalar count for a config.
size_t count_params(const ModelConfig& cfg);

// Weights ~ N(0, 0.02), biases 0, norm gains 1; every tensor requires grad.
ParamStore init_params(const ModelConfig& cfg, uint64_t seed);

struct ForwardResult {
  Tensor logits;  // seq_len x vocab; row j predicts token j
  Tensor loss;    // scalar, mean cross-entropy over the seq_len positions
};

// Teacher-forced pass: [condition row] ++ [token embeddings] + positional
// embeddings through pre-norm blocks under a causal mask. When a mask plan is
// given the token embeddings are multiplied by its 0/1 keep matrix before the
// stack; targets are always the unmasked ids. Passing no plan is bitwise
// identical to an all-keep plan.
ForwardResult forward_train(const ModelConfig& cfg, const ParamStore& params,
                            int class_id, const std::vector<int>& token_ids,
                            const MaskPlan* plan = nullptr);

// Full-recompute logits at the last input position for [condition] ++ prefix.
// Shares every numeric path with forward_train; used as the incremental
// decoder's equivalence reference.
Tensor prefix_logits(const ModelConfig& cfg, const ParamStore& params,
                     int class_id, const std::vector<int>& prefix);

struct SamplerConfig {
  double temperature = 1.0;  // < 1e-6 selects the argmax without drawing
  int top_k = 64;
  uint64_t seed = 0;

  void validate(int vocab) const;
};

// Draws one id from the top_k-truncated, temperature-scaled softmax of a
// logit row. Ties rank by lower index; a single-candidate support returns
// without consuming randomness.
int sample_from_logits(const double* logits, int vocab, const SamplerConfig& sampler,
                       Rng& rng);

// Autoregressive sampling with per-layer key/value caches. Produces exactly
// cfg.seq_len ids, bit-for-bit equal to generate_recompute for any seed.
std::vector<int> generate(const ModelConfig& cfg, const ParamStore& params,
                          int class_id, const SamplerConfig& sampler);

// Cache-free reference: recomputes the whole prefix for every step.
std::vector<int> generate_recompute(const ModelConfig& cfg, const ParamStore& params,
                                    int class_id, const SamplerConfig& sampler);

}  // namespace gfv
