#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gfv/image.hpp"

namespace gfv {

// Fitted patch codebook; codewords live in [0,1] normalized pixel space.
struct CodeBook {
  int k = 0;
  int patch_h = 0;
  int patch_w = 0;
  int channels = 1;
  std::vector<double> codewords;  // k rows of patch_len()

  int patch_len() const { return patch_h * patch_w * channels; }
  const double* codeword(int i) const { return codewords.data() + static_cast<size_t>(i) * patch_len(); }
  void validate() const;
};

// Discrete token view of one image: row-major grid of codeword indices.
struct TokenGrid {
  int rows = 0;
  int cols = 0;
  std::vector<int> ids;
};

struct FitResult {
  CodeBook codebook;
  std::vector<double> inertia;  // per-iteration assignment cost, non-increasing
};

// Seeded k-means over all patches of all images: k-means++ initialization,
// fixed iteration count, empty or duplicate centroids re-seeded to the
// farthest patch. Requires at least k distinct patches.
FitResult fit_codebook(const std::vector<Image>& images, int k, int patch_h,
                       int patch_w, int iters, uint64_t seed);

// Nearest codeword per patch by squared distance; ties break to the lowest
// index.
TokenGrid encode(const Image& img, const CodeBook& cb);

// Codewords pasted back at their patch locations, clamped to [0,1] and
// scaled to 8-bit.
Image decode(const TokenGrid& tokens, const CodeBook& cb);

// 10*log10(255^2 / MSE); identical images return the 99.0 dB sentinel cap.
double psnr(const Image& a, const Image& b);

// Codebook file: magic "VQCB", u32 k/patch_h/patch_w/channels, then
// k*patch_len little-endian 64-bit reals.
void save_codebook(const std::string& path, const CodeBook& cb);
CodeBook load_codebook(const std::string& path);

// Row-major patch extraction, normalized to [0,1]. Exposed for the fitting
// oracle tests and the feature extractor.
std::vector<double> extract_patches(const Image& img, int patch_h, int patch_w);

}  // namespace gfv
