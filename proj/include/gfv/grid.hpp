#pragma once

#include <tuple>
#include <vector>

#include "gfv/image.hpp"

namespace gfv {

// Token geometry of a clip laid out as a grid of frames: T frames arranged
// row-by-row into a grid_rows x grid_cols mosaic, each frame contributing
// frame_tok_rows x frame_tok_cols tokens.
struct TokenLayout {
  int t = 16;
  int grid_rows = 4;
  int grid_cols = 4;
  int frame_tok_rows = 4;
  int frame_tok_cols = 4;

  int l() const { return frame_tok_rows * frame_tok_cols; }  // tokens per frame
  int s() const { return t * l(); }                          // tokens per clip
  int tok_rows() const { return grid_rows * frame_tok_rows; }
  int tok_cols() const { return grid_cols * frame_tok_cols; }

  void validate() const;
  bool operator==(const TokenLayout&) const = default;
};

// Builds a layout from pixel geometry, checking patch divisibility and that
// the grid is exactly filled (no padding frames).
TokenLayout make_layout(int t, int grid_rows, int grid_cols, int frame_h, int frame_w,
                        int patch_h, int patch_w);

// Mosaic of T frames; frame t occupies grid cell (t / grid_cols, t % grid_cols).
Image compose_grid(const std::vector<Image>& frames, const TokenLayout& layout);

// Exact inverse of compose_grid; frame dims are grid dims / grid extents.
std::vector<Image> decompose_grid(const Image& grid, const TokenLayout& layout);

// Raster position of token (t, r, c) when the mosaic is read row-major.
int seq_pos(int t, int r, int c, const TokenLayout& layout);

// Inverse of seq_pos.
std::tuple<int, int, int> frame_pos(int p, const TokenLayout& layout);

// Order in which the sequence model consumes tokens. kGrid is the mosaic
// raster order; kFrame concatenates frames one after another (the ablation
// arm that discards the mosaic structure).
enum class TokenOrder { kGrid, kFrame };

// Converts mosaic-raster token ids into model order and back.
std::vector<int> to_model_order(const std::vector<int>& raster_ids,
                                const TokenLayout& layout, TokenOrder order);
std::vector<int> to_raster_order(const std::vector<int>& model_ids,
                                 const TokenLayout& layout, TokenOrder order);

const char* token_order_name(TokenOrder order);
TokenOrder token_order_from_name(const std::string& name);

}  // namespace gfv
