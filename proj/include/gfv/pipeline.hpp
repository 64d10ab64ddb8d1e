#pragma once

#include <vector>

#include "gfv/grid.hpp"
#include "gfv/image.hpp"
#include "gfv/vq.hpp"

namespace gfv {

// Clip -> frame mosaic -> nearest-codeword patch ids in model order. Checks
// that the clip geometry, the layout and the codebook patch size agree.
std::vector<int> tokenize_clip(const VideoClip& clip, const CodeBook& book,
                               const TokenLayout& layout, TokenOrder order);

// Inverse direction: model-order ids -> mosaic of codewords -> frames.
VideoClip clip_from_tokens(const std::vector<int>& model_ids, const CodeBook& book,
                           const TokenLayout& layout, TokenOrder order, int label);

}  // namespace gfv
