#include "gfv/grid.hpp"

#include <string>

namespace gfv {

void TokenLayout::validate() const {
  if (t <= 0 || grid_rows <= 0 || grid_cols <= 0 || frame_tok_rows <= 0 ||
      frame_tok_cols <= 0)
    throw ShapeError("layout: non-positive extent");
  if (t != grid_rows * grid_cols)
    throw ShapeError("layout: T=" + std::to_string(t) + " does not fill a " +
                     std::to_string(grid_rows) + "x" + std::to_string(grid_cols) +
                     " grid exactly");
}

TokenLayout make_layout(int t, int grid_rows, int grid_cols, int frame_h, int frame_w,
                        int patch_h, int patch_w) {
  if (patch_h <= 0 || patch_w <= 0 || frame_h <= 0 || frame_w <= 0)
    throw ShapeError("layout: non-positive frame or patch dims");
  if (frame_h % patch_h != 0 || frame_w % patch_w != 0)
    throw ShapeError("layout: frame " + std::to_string(frame_h) + "x" +
                     std::to_string(frame_w) + " not divisible by patch " +
                     std::to_string(patch_h) + "x" + std::to_string(patch_w));
  TokenLayout lay;
  lay.t = t;
  lay.grid_rows = grid_rows;
  lay.grid_cols = grid_cols;
  lay.frame_tok_rows = frame_h / patch_h;
  lay.frame_tok_cols = frame_w / patch_w;
  lay.validate();
  return lay;
}

Image compose_grid(const std::vector<Image>& frames, const TokenLayout& layout) {
  layout.validate();
  if (static_cast<int>(frames.size()) != layout.t)
    throw ShapeError("compose_grid: " + std::to_string(frames.size()) +
                     " frames for a grid of " + std::to_string(layout.t));
  const Image& f0 = frames[0];
  for (const Image& f : frames)
    if (!f.same_dims(f0)) throw ShapeError("compose_grid: frame dims differ");
  Image grid(f0.h * layout.grid_rows, f0.w * layout.grid_cols, f0.ch);
  for (int t = 0; t < layout.t; ++t) {
    const int cell_r = t / layout.grid_cols;
    const int cell_c = t % layout.grid_cols;
    const Image& f = frames[t];
    for (int y = 0; y < f0.h; ++y) {
      const size_t src = static_cast<size_t>(y) * f0.w * f0.ch;
      const size_t dst =
          ((static_cast<size_t>(cell_r) * f0.h + y) * grid.w + static_cast<size_t>(cell_c) * f0.w) *
          f0.ch;
      std::copy_n(f.pix.data() + src, static_cast<size_t>(f0.w) * f0.ch,
                  grid.pix.data() + dst);
    }
  }
  return grid;
}

std::vector<Image> decompose_grid(const Image& grid, const TokenLayout& layout) {
  layout.validate();
  if (grid.h % layout.grid_rows != 0 || grid.w % layout.grid_cols != 0)
    throw ShapeError("decompose_grid: grid " + std::to_string(grid.h) + "x" +
                     std::to_string(grid.w) + " not divisible by " +
                     std::to_string(layout.grid_rows) + "x" +
                     std::to_string(layout.grid_cols));
  const int fh = grid.h / layout.grid_rows;
  const int fw = grid.w / layout.grid_cols;
  std::vector<Image> frames;
  frames.reserve(layout.t);
  for (int t = 0; t < layout.t; ++t) {
    const int cell_r = t / layout.grid_cols;
    const int cell_c = t % layout.grid_cols;
    Image f(fh, fw, grid.ch);
    for (int y = 0; y < fh; ++y) {
      const size_t src =
          ((static_cast<size_t>(cell_r) * fh + y) * grid.w + static_cast<size_t>(cell_c) * fw) *
          grid.ch;
      std::copy_n(grid.pix.data() + src, static_cast<size_t>(fw) * grid.ch,
                  f.pix.data() + static_cast<size_t>(y) * fw * grid.ch);
    }
    frames.push_back(std::move(f));
  }
  return frames;
}

int seq_pos(int t, int r, int c, const TokenLayout& layout) {
  layout.validate();
  if (t < 0 || t >= layout.t || r < 0 || r >= layout.frame_tok_rows || c < 0 ||
      c >= layout.frame_tok_cols)
    throw IndexError("seq_pos: (" + std::to_string(t) + "," + std::to_string(r) + "," +
                     std::to_string(c) + ") outside layout");
  const int big_r = (t / layout.grid_cols) * layout.frame_tok_rows + r;
  const int big_c = (t % layout.grid_cols) * layout.frame_tok_cols + c;
  return big_r * layout.tok_cols() + big_c;
}

std::tuple<int, int, int> frame_pos(int p, const TokenLayout& layout) {
  layout.validate();
  if (p < 0 || p >= layout.s())
    throw IndexError("frame_pos: " + std::to_string(p) + " outside [0," +
                     std::to_string(layout.s()) + ")");
  const int big_r = p / layout.tok_cols();
  const int big_c = p % layout.tok_cols();
  const int t = (big_r / layout.frame_tok_rows) * layout.grid_cols +
                big_c / layout.frame_tok_cols;
  const int r = big_r % layout.frame_tok_rows;
  const int c = big_c % layout.frame_tok_cols;
  return {t, r, c};
}

std::vector<int> to_model_order(const std::vector<int>& raster_ids,
                                const TokenLayout& layout, TokenOrder order) {
  layout.validate();
  if (static_cast<int>(raster_ids.size()) != layout.s())
    throw ShapeError("to_model_order: " + std::to_string(raster_ids.size()) +
                     " ids for layout of " + std::to_string(layout.s()));
  if (order == TokenOrder::kGrid) return raster_ids;
  std::vector<int> out(raster_ids.size());
  for (int t = 0; t < layout.t; ++t)
    for (int r = 0; r < layout.frame_tok_rows; ++r)
      for (int c = 0; c < layout.frame_tok_cols; ++c)
        out[(static_cast<size_t>(t) * layout.frame_tok_rows + r) * layout.frame_tok_cols + c] =
            raster_ids[seq_pos(t, r, c, layout)];
  return out;
}

std::vector<int> to_raster_order(const std::vector<int>& model_ids,
                                 const TokenLayout& layout, TokenOrder order) {
  layout.validate();
  if (static_cast<int>(model_ids.size()) != layout.s())
    throw ShapeError("to_raster_order: " + std::to_string(model_ids.size()) +
                     " ids for layout of " + std::to_string(layout.s()));
  if (order == TokenOrder::kGrid) return model_ids;
  std::vector<int> out(model_ids.size());
  for (int t = 0; t < layout.t; ++t)
    for (int r = 0; r < layout.frame_tok_rows; ++r)
      for (int c = 0; c < layout.frame_tok_cols; ++c)
        out[seq_pos(t, r, c, layout)] =
            model_ids[(static_cast<size_t>(t) * layout.frame_tok_rows + r) * layout.frame_tok_cols + c];
  return out;
}

const char* token_order_name(TokenOrder order) {
  return order == TokenOrder::kGrid ? "grid" : "frame";
}

TokenOrder token_order_from_name(const std::string& name) {
  if (name == "grid") return TokenOrder::kGrid;
  if (name == "frame") return TokenOrder::kFrame;
  throw ConfigError("token order must be \"grid\" or \"frame\", got \"" + name + "\"");
}

}  // namespace gfv
