#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gfv/error.hpp"

namespace gfv {

// 8-bit image, row-major, channel-interleaved.
struct Image {
  int h = 0;
  int w = 0;
  int ch = 1;
  std::vector<uint8_t> pix;

  Image() = default;
  Image(int h_, int w_, int ch_ = 1, uint8_t fill = 0) : h(h_), w(w_), ch(ch_) {
    if (h <= 0 || w <= 0 || ch <= 0)
      throw ShapeError("image: non-positive dims " + std::to_string(h_) + "x" +
                       std::to_string(w_) + "x" + std::to_string(ch_));
    pix.assign(static_cast<size_t>(h) * w * ch, fill);
  }

  uint8_t& at(int y, int x, int c = 0) {
    check(y, x, c);
    return pix[(static_cast<size_t>(y) * w + x) * ch + c];
  }
  uint8_t at(int y, int x, int c = 0) const {
    check(y, x, c);
    return pix[(static_cast<size_t>(y) * w + x) * ch + c];
  }
  size_t size() const { return pix.size(); }
  bool same_dims(const Image& o) const { return h == o.h && w == o.w && ch == o.ch; }

 private:
  void check(int y, int x, int c) const {
    if (y < 0 || y >= h || x < 0 || x >= w || c < 0 || c >= ch)
      throw IndexError("image: (" + std::to_string(y) + "," + std::to_string(x) + "," +
                       std::to_string(c) + ") outside " + std::to_string(h) + "x" +
                       std::to_string(w) + "x" + std::to_string(ch));
  }
};

// A labelled clip: T frames of identical dims plus the seed it was generated
// from (0 when the clip came from outside the generator).
struct VideoClip {
  std::vector<Image> frames;
  int label = 0;
  uint64_t seed = 0;

  int t() const { return static_cast<int>(frames.size()); }

  void validate() const {
    if (frames.empty()) throw ShapeError("clip: no frames");
    for (const Image& f : frames)
      if (!f.same_dims(frames[0]))
        throw ShapeError("clip: frame dims differ from frame 0");
  }
};

}  // namespace gfv
