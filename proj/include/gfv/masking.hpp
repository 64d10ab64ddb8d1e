#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "gfv/tensor.hpp"

namespace gfv {

// Variance-adaptive token masking: the token sequence is cut into segments
// of h consecutive tokens; low-variance segments are masked (zeroed) with
// higher probability, capped at p_max, and the highest-variance segment is
// never masked.
struct MaskPlan {
  int h = 8;
  std::vector<double> variances;  // one per segment
  std::vector<double> ratios;     // one per segment, in [0, p_max]
  std::vector<uint8_t> keep;      // one per token; 0 means zeroed
  uint64_t seed = 0;

  int num_segments() const { return static_cast<int>(ratios.size()); }
  int tokens() const { return static_cast<int>(keep.size()); }
  double masked_fraction() const;
};

// Per-segment scalar variance of an S x C embedding matrix: biased (1/h)
// per-channel variance over the segment's h tokens, averaged over channels.
std::vector<double> segment_variances(const Tensor& x, int h);

// ratio_i = clamp((1 - var_i / max var) * p_max, 0, p_max). All ratios are 0
// when every segment is constant (max var == 0).
std::vector<double> masking_ratios(const std::vector<double>& variances, double p_max);

// Draws an independent keep flag per token, Bernoulli(1 - ratio of its
// segment), and zeroes the masked rows. The input is not modified; with all
// ratios 0 the output is bitwise equal to the input.
std::pair<Tensor, MaskPlan> apply_mask(const Tensor& x, const std::vector<double>& ratios,
                                       uint64_t seed);

// variances -> ratios -> keep draw, without materializing masked embeddings.
MaskPlan make_mask_plan(const Tensor& x, int h, double p_max, uint64_t seed);

// S x cols constant of 0/1 rows mirroring plan.keep; multiplying embeddings
// by it applies the plan inside a gradient graph.
Tensor keep_matrix(const MaskPlan& plan, int cols);

}  // namespace gfv
