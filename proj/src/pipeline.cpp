#include "gfv/pipeline.hpp"

#include <string>

#include "gfv/error.hpp"

namespace gfv {

std::vector<int> tokenize_clip(const VideoClip& clip, const CodeBook& book,
                               const TokenLayout& layout, TokenOrder order) {
  clip.validate();
  book.validate();
  layout.validate();
  if (clip.t() != layout.t)
    throw ShapeError("tokenize: clip has " + std::to_string(clip.t()) +
                     " frames, layout expects " + std::to_string(layout.t));
  const Image& f0 = clip.frames[0];
  const int want_h = layout.frame_tok_rows * book.patch_h;
  const int want_w = layout.frame_tok_cols * book.patch_w;
  if (f0.h != want_h || f0.w != want_w || f0.ch != book.channels)
    throw ShapeError("tokenize: frames are " + std::to_string(f0.h) + "x" +
                     std::to_string(f0.w) + "x" + std::to_string(f0.ch) +
                     ", layout and codebook expect " + std::to_string(want_h) + "x" +
                     std::to_string(want_w) + "x" + std::to_string(book.channels));
  const Image mosaic = compose_grid(clip.frames, layout);
  const TokenGrid tg = encode(mosaic, book);
  return to_model_order(tg.ids, layout, order);
}

VideoClip clip_from_tokens(const std::vector<int>& model_ids, const CodeBook& book,
                           const TokenLayout& layout, TokenOrder order, int label) {
  book.validate();
  layout.validate();
  for (int id : model_ids)
    if (id < 0 || id >= book.k)
      throw IndexError("detokenize: id " + std::to_string(id) + " outside [0," +
                       std::to_string(book.k) + ")");
  TokenGrid tg;
  tg.rows = layout.tok_rows();
  tg.cols = layout.tok_cols();
  tg.ids = to_raster_order(model_ids, layout, order);
  const Image mosaic = decode(tg, book);
  VideoClip clip;
  clip.frames = decompose_grid(mosaic, layout);
  clip.label = label;
  return clip;
}

}  // namespace gfv
