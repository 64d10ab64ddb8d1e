#include "gfv/vq.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <unordered_set>

#include "gfv/io.hpp"
#include "gfv/rng.hpp"

namespace gfv {

namespace {

double sq_dist(const double* a, const double* b, int n) {
  double s = 0.0;
  for (int i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

void check_patch_dims(const Image& img, int ph, int pw, const char* who) {
  if (ph <= 0 || pw <= 0)
    throw ShapeError(std::string(who) + ": non-positive patch dims");
  if (img.h % ph != 0 || img.w % pw != 0)
    throw ShapeError(std::string(who) + ": image " + std::to_string(img.h) + "x" +
                     std::to_string(img.w) + " not divisible by patch " +
                     std::to_string(ph) + "x" + std::to_string(pw));
}

}  // namespace

void CodeBook::validate() const {
  if (k < 1) throw ShapeError("codebook: k must be >= 1");
  if (patch_h <= 0 || patch_w <= 0 || channels <= 0)
    throw ShapeError("codebook: non-positive patch geometry");
  if (static_cast<int64_t>(codewords.size()) != static_cast<int64_t>(k) * patch_len())
    throw ShapeError("codebook: " + std::to_string(codewords.size()) +
                     " values for k=" + std::to_string(k) + " patch_len=" +
                     std::to_string(patch_len()));
}

std::vector<double> extract_patches(const Image& img, int patch_h, int patch_w) {
  check_patch_dims(img, patch_h, patch_w, "extract_patches");
  const int pr = img.h / patch_h, pc = img.w / patch_w;
  const int plen = patch_h * patch_w * img.ch;
  std::vector<double> out(static_cast<size_t>(pr) * pc * plen);
  size_t o = 0;
  for (int br = 0; br < pr; ++br)
    for (int bc = 0; bc < pc; ++bc)
      for (int y = 0; y < patch_h; ++y)
        for (int x = 0; x < patch_w; ++x)
          for (int c = 0; c < img.ch; ++c)
            out[o++] = img.at(br * patch_h + y, bc * patch_w + x, c) / 255.0;
  return out;
}

FitResult fit_codebook(const std::vector<Image>& images, int k, int patch_h,
                       int patch_w, int iters, uint64_t seed) {
  if (k < 1) throw DomainError("fit_codebook: k must be >= 1");
  if (iters < 1) throw DomainError("fit_codebook: iters must be >= 1");
  if (images.empty()) throw DomainError("fit_codebook: no images");
  const int ch = images[0].ch;
  const int plen = patch_h * patch_w * ch;

  std::vector<double> patches;
  for (const Image& img : images) {
    if (img.ch != ch) throw ShapeError("fit_codebook: mixed channel counts");
    std::vector<double> p = extract_patches(img, patch_h, patch_w);
    patches.insert(patches.end(), p.begin(), p.end());
  }
  const int64_t n = static_cast<int64_t>(patches.size()) / plen;

  {
    std::unordered_set<std::string> distinct;
    for (int64_t i = 0; i < n && static_cast<int>(distinct.size()) < k; ++i)
      distinct.emplace(reinterpret_cast<const char*>(patches.data() + i * plen),
                       sizeof(double) * plen);
    if (static_cast<int>(distinct.size()) < k)
      throw DomainError("fit_codebook: only " + std::to_string(distinct.size()) +
                        " distinct patches for k=" + std::to_string(k));
  }

  auto patch = [&](int64_t i) { return patches.data() + i * plen; };

  // k-means++ seeding: first pick uniform, then proportional to the squared
  // distance to the nearest already-chosen centroid.
  Rng rng = make_rng(seed);
  std::vector<double> centroids(static_cast<size_t>(k) * plen);
  std::vector<double> best_d(n, std::numeric_limits<double>::infinity());
  {
    const int64_t first = std::uniform_int_distribution<int64_t>(0, n - 1)(rng);
    std::memcpy(centroids.data(), patch(first), sizeof(double) * plen);
    for (int chosen = 1; chosen < k; ++chosen) {
      const double* last = centroids.data() + static_cast<size_t>(chosen - 1) * plen;
      double total = 0.0;
      for (int64_t i = 0; i < n; ++i) {
        best_d[i] = std::min(best_d[i], sq_dist(patch(i), last, plen));
        total += best_d[i];
      }
      const double u = std::uniform_real_distribution<double>(0.0, total)(rng);
      double cum = 0.0;
      int64_t pick = n - 1;
      for (int64_t i = 0; i < n; ++i) {
        cum += best_d[i];
        if (cum > u) {
          pick = i;
          break;
        }
      }
      std::memcpy(centroids.data() + static_cast<size_t>(chosen) * plen, patch(pick),
                  sizeof(double) * plen);
    }
  }

  // Re-seeds centroid `c` to the patch currently farthest from its assigned
  // centroid; the moved centroid gains that patch at distance zero, so the
  // next assignment cost cannot increase.
  std::vector<int> assign(n, 0);
  std::vector<double> dist(n, 0.0);
  std::vector<char> taken(n, 0);
  auto reseed = [&](int c) {
    int64_t far = -1;
    double far_d = -1.0;
    for (int64_t i = 0; i < n; ++i)
      if (!taken[i] && dist[i] > far_d) {
        far_d = dist[i];
        far = i;
      }
    if (far >= 0) {
      std::memcpy(centroids.data() + static_cast<size_t>(c) * plen, patch(far),
                  sizeof(double) * plen);
      taken[far] = 1;
    }
  };

  std::vector<double> inertia;
  std::vector<double> sums(static_cast<size_t>(k) * plen);
  std::vector<int64_t> counts(k);
  for (int it = 0; it < iters; ++it) {
    double cost = 0.0;
    for (int64_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      int who = 0;
      for (int c = 0; c < k; ++c) {
        const double d = sq_dist(patch(i), centroids.data() + static_cast<size_t>(c) * plen, plen);
        if (d < best) {  // strict: ties stay with the lowest index
          best = d;
          who = c;
        }
      }
      assign[i] = who;
      dist[i] = best;
      cost += best;
    }
    inertia.push_back(cost);

    std::fill(sums.begin(), sums.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (int64_t i = 0; i < n; ++i) {
      double* s = sums.data() + static_cast<size_t>(assign[i]) * plen;
      const double* p = patch(i);
      for (int j = 0; j < plen; ++j) s[j] += p[j];
      ++counts[assign[i]];
    }
    std::fill(taken.begin(), taken.end(), 0);
    for (int c = 0; c < k; ++c) {
      if (counts[c] > 0) {
        double* dst = centroids.data() + static_cast<size_t>(c) * plen;
        const double* s = sums.data() + static_cast<size_t>(c) * plen;
        for (int j = 0; j < plen; ++j) dst[j] = s[j] / counts[c];
      } else {
        reseed(c);
      }
    }
    // Bitwise-duplicate centroids would make the lower index absorb every
    // shared point forever; re-seed the higher one.
    for (int c = 1; c < k; ++c)
      for (int prev = 0; prev < c; ++prev)
        if (std::memcmp(centroids.data() + static_cast<size_t>(c) * plen,
                        centroids.data() + static_cast<size_t>(prev) * plen,
                        sizeof(double) * plen) == 0) {
          reseed(c);
          break;
        }
  }

  FitResult res;
  res.codebook.k = k;
  res.codebook.patch_h = patch_h;
  res.codebook.patch_w = patch_w;
  res.codebook.channels = ch;
  res.codebook.codewords = std::move(centroids);
  res.inertia = std::move(inertia);
  return res;
}

TokenGrid encode(const Image& img, const CodeBook& cb) {
  cb.validate();
  check_patch_dims(img, cb.patch_h, cb.patch_w, "encode");
  if (img.ch != cb.channels)
    throw ShapeError("encode: image has " + std::to_string(img.ch) +
                     " channels, codebook " + std::to_string(cb.channels));
  const int plen = cb.patch_len();
  std::vector<double> patches = extract_patches(img, cb.patch_h, cb.patch_w);
  TokenGrid grid;
  grid.rows = img.h / cb.patch_h;
  grid.cols = img.w / cb.patch_w;
  grid.ids.resize(static_cast<size_t>(grid.rows) * grid.cols);
  for (size_t i = 0; i < grid.ids.size(); ++i) {
    const double* p = patches.data() + i * plen;
    double best = std::numeric_limits<double>::infinity();
    int who = 0;
    for (int c = 0; c < cb.k; ++c) {
      const double d = sq_dist(p, cb.codeword(c), plen);
      if (d < best) {
        best = d;
        who = c;
      }
    }
    grid.ids[i] = who;
  }
  return grid;
}

Image decode(const TokenGrid& tokens, const CodeBook& cb) {
  cb.validate();
  if (tokens.rows <= 0 || tokens.cols <= 0 ||
      static_cast<int64_t>(tokens.ids.size()) !=
          static_cast<int64_t>(tokens.rows) * tokens.cols)
    throw ShapeError("decode: token grid " + std::to_string(tokens.rows) + "x" +
                     std::to_string(tokens.cols) + " with " +
                     std::to_string(tokens.ids.size()) + " ids");
  Image img(tokens.rows * cb.patch_h, tokens.cols * cb.patch_w, cb.channels);
  for (int br = 0; br < tokens.rows; ++br)
    for (int bc = 0; bc < tokens.cols; ++bc) {
      const int id = tokens.ids[static_cast<size_t>(br) * tokens.cols + bc];
      if (id < 0 || id >= cb.k)
        throw IndexError("decode: token id " + std::to_string(id) + " outside [0," +
                         std::to_string(cb.k) + ")");
      const double* cw = cb.codeword(id);
      int j = 0;
      for (int y = 0; y < cb.patch_h; ++y)
        for (int x = 0; x < cb.patch_w; ++x)
          for (int c = 0; c < cb.channels; ++c) {
            const double v = std::clamp(cw[j++], 0.0, 1.0);
            img.at(br * cb.patch_h + y, bc * cb.patch_w + x, c) =
                static_cast<uint8_t>(std::lround(v * 255.0));
          }
    }
  return img;
}

double psnr(const Image& a, const Image& b) {
  if (!a.same_dims(b))
    throw ShapeError("psnr: dims " + std::to_string(a.h) + "x" + std::to_string(a.w) +
                     "x" + std::to_string(a.ch) + " vs " + std::to_string(b.h) + "x" +
                     std::to_string(b.w) + "x" + std::to_string(b.ch));
  double mse = 0.0;
  for (size_t i = 0; i < a.pix.size(); ++i) {
    const double d = static_cast<double>(a.pix[i]) - b.pix[i];
    mse += d * d;
  }
  mse /= static_cast<double>(a.pix.size());
  if (mse == 0.0) return 99.0;
  return 10.0 * std::log10(255.0 * 255.0 / mse);
}

void save_codebook(const std::string& path, const CodeBook& cb) {
  cb.validate();
  io::ByteWriter w;
  w.magic("VQCB");
  w.u32(static_cast<uint32_t>(cb.k));
  w.u32(static_cast<uint32_t>(cb.patch_h));
  w.u32(static_cast<uint32_t>(cb.patch_w));
  w.u32(static_cast<uint32_t>(cb.channels));
  for (double v : cb.codewords) w.f64(v);
  w.save(path);
}

CodeBook load_codebook(const std::string& path) {
  io::ByteReader r = io::ByteReader::from_file(path);
  r.expect_magic("VQCB");
  CodeBook cb;
  cb.k = static_cast<int>(r.u32());
  cb.patch_h = static_cast<int>(r.u32());
  cb.patch_w = static_cast<int>(r.u32());
  cb.channels = static_cast<int>(r.u32());
  if (cb.k < 1 || cb.patch_h <= 0 || cb.patch_w <= 0 || cb.channels <= 0)
    throw FormatError(path + ": invalid codebook header (k=" + std::to_string(cb.k) +
                      " patch=" + std::to_string(cb.patch_h) + "x" +
                      std::to_string(cb.patch_w) + "x" + std::to_string(cb.channels) + ")");
  cb.codewords.resize(static_cast<size_t>(cb.k) * cb.patch_len());
  for (double& v : cb.codewords) {
    v = r.f64();
    if (!(v >= 0.0 && v <= 1.0))
      throw FormatError(path + ": codeword value " + std::to_string(v) +
                        " outside [0,1] at offset " + std::to_string(r.offset() - 8));
  }
  r.expect_exhausted();
  return cb;
}

}  // namespace gfv
