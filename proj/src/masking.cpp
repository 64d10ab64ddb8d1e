#include "gfv/masking.hpp"

#include <algorithm>
#include <cstring>

#include "gfv/rng.hpp"

namespace gfv {

double MaskPlan::masked_fraction() const {
  if (keep.empty()) return 0.0;
  int64_t zeros = 0;
  for (uint8_t k : keep) zeros += k == 0;
  return static_cast<double>(zeros) / static_cast<double>(keep.size());
}

std::vector<double> segment_variances(const Tensor& x, int h) {
  if (x.rank() != 2) throw ShapeError("segment_variances: embeddings must be a matrix");
  if (h < 2) throw DomainError("segment_variances: segment length must be >= 2");
  const int s = x.rows(), c = x.cols();
  if (s % h != 0)
    throw ShapeError("segment_variances: " + std::to_string(s) +
                     " tokens not divisible by segment length " + std::to_string(h));
  const int segs = s / h;
  std::vector<double> out(segs);
  const double* p = x.data();
  for (int i = 0; i < segs; ++i) {
    const double* seg = p + static_cast<size_t>(i) * h * c;
    double acc = 0.0;
    for (int ch = 0; ch < c; ++ch) {
      double mu = 0.0;
      for (int t = 0; t < h; ++t) mu += seg[static_cast<size_t>(t) * c + ch];
      mu /= h;
      double var = 0.0;
      for (int t = 0; t < h; ++t) {
        const double d = seg[static_cast<size_t>(t) * c + ch] - mu;
        var += d * d;
      }
      acc += var / h;
    }
    out[i] = acc / c;
  }
  return out;
}

std::vector<double> masking_ratios(const std::vector<double>& variances, double p_max) {
  if (p_max >= 1.0)
    throw DomainError("masking_ratios: p_max " + std::to_string(p_max) +
                      " would allow fully-masked segments, must be < 1");
  if (p_max < 0.0) throw DomainError("masking_ratios: negative p_max");
  if (variances.empty()) throw ShapeError("masking_ratios: no variances");
  const double vmax = *std::max_element(variances.begin(), variances.end());
  std::vector<double> ratios(variances.size(), 0.0);
  if (vmax <= 0.0) return ratios;  // all segments constant: no masking
  for (size_t i = 0; i < variances.size(); ++i)
    ratios[i] = std::clamp((1.0 - variances[i] / vmax) * p_max, 0.0, p_max);
  return ratios;
}

std::pair<Tensor, MaskPlan> apply_mask(const Tensor& x, const std::vector<double>& ratios,
                                       uint64_t seed) {
  if (x.rank() != 2) throw ShapeError("apply_mask: embeddings must be a matrix");
  const int s = x.rows(), c = x.cols();
  if (ratios.empty() || s % static_cast<int>(ratios.size()) != 0)
    throw ShapeError("apply_mask: " + std::to_string(ratios.size()) +
                     " ratios do not tile " + std::to_string(s) + " tokens");
  const int h = s / static_cast<int>(ratios.size());

  MaskPlan plan;
  plan.h = h;
  plan.ratios = ratios;
  plan.seed = seed;
  plan.keep.resize(s);
  Rng rng = make_rng(seed);
  for (int t = 0; t < s; ++t) {
    const double p = ratios[t / h];
    plan.keep[t] = std::bernoulli_distribution(1.0 - p)(rng) ? 1 : 0;
  }

  Tensor out = Tensor::zeros({s, c});
  std::memcpy(out.data(), x.data(), sizeof(double) * x.size());
  for (int t = 0; t < s; ++t)
    if (!plan.keep[t])
      std::fill_n(out.data() + static_cast<size_t>(t) * c, c, 0.0);
  return {out, plan};
}

MaskPlan make_mask_plan(const Tensor& x, int h, double p_max, uint64_t seed) {
  std::vector<double> vars = segment_variances(x, h);
  std::vector<double> ratios = masking_ratios(vars, p_max);
  auto [masked, plan] = apply_mask(x, ratios, seed);
  plan.variances = std::move(vars);
  return plan;
}

Tensor keep_matrix(const MaskPlan& plan, int cols) {
  if (plan.keep.empty()) throw ShapeError("keep_matrix: empty plan");
  Tensor m = Tensor::zeros({plan.tokens(), cols});
  double* p = m.data();
  for (int t = 0; t < plan.tokens(); ++t)
    if (plan.keep[t]) std::fill_n(p + static_cast<size_t>(t) * cols, cols, 1.0);
  return m;
}

}  // namespace gfv
