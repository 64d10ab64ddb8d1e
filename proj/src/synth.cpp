#include "gfv/synth.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>

#include "gfv/io.hpp"
#include "gfv/rng.hpp"

namespace gfv {

namespace {

constexpr uint64_t kBackgroundStream = 11;
constexpr uint64_t kOffsetStream = 12;
constexpr uint8_t kForeground = 230;
constexpr int kNoiseLo = 6, kNoiseHi = 23;

// Mean position on a ring of size n under weights, computed on the circle so
// wraparound does not tear the estimate.
class CircularMean {
 public:
  explicit CircularMean(int n) : n_(n) {}
  void add(double pos, double weight) {
    const double th = 2.0 * std::numbers::pi * pos / n_;
    c_ += weight * std::cos(th);
    s_ += weight * std::sin(th);
  }
  double value() const {
    double pos = std::atan2(s_, c_) * n_ / (2.0 * std::numbers::pi);
    if (pos < 0) pos += n_;
    return pos;
  }

 private:
  int n_;
  double c_ = 0.0, s_ = 0.0;
};

// Signed shortest displacement a-b on a ring of size n.
double circ_diff(double a, double b, int n) {
  double d = a - b;
  d -= n * std::round(d / n);
  return d;
}

void paint_square(Image& f, int top, int left, int side, bool wrap_x, bool wrap_y) {
  for (int dy = 0; dy < side; ++dy) {
    int y = top + dy;
    if (wrap_y) y = ((y % f.h) + f.h) % f.h;
    if (y < 0 || y >= f.h) continue;
    for (int dx = 0; dx < side; ++dx) {
      int x = left + dx;
      if (wrap_x) x = ((x % f.w) + f.w) % f.w;
      if (x < 0 || x >= f.w) continue;
      for (int c = 0; c < f.ch; ++c) f.at(y, x, c) = kForeground;
    }
  }
}

}  // namespace

const std::vector<MotionClass>& motion_registry() {
  static const std::vector<MotionClass> reg = {
      {0, MotionClass::kHorizontalDrift, 2, 1.0},
      {1, MotionClass::kVerticalDrift, 2, 1.0},
      {2, MotionClass::kPulse, 0, 1.0},
  };
  return reg;
}

VideoClip generate_clip(int class_id, uint64_t seed, int t, int hpx, int wpx) {
  const auto& reg = motion_registry();
  if (class_id < 0 || class_id >= static_cast<int>(reg.size()))
    throw DomainError("generate_clip: unknown class " + std::to_string(class_id));
  if (t < 8 || hpx < 8 || wpx < 8)
    throw DomainError("generate_clip: T, Hpx, Wpx must each be >= 8, got T=" +
                      std::to_string(t) + " Hpx=" + std::to_string(hpx) +
                      " Wpx=" + std::to_string(wpx));
  const MotionClass& mc = reg[class_id];

  Image background(hpx, wpx, 1);
  {
    Rng rng = make_rng(derive_seed(seed, kBackgroundStream, class_id));
    std::uniform_int_distribution<int> noise(kNoiseLo, kNoiseHi);
    for (uint8_t& p : background.pix) p = static_cast<uint8_t>(noise(rng));
  }

  Rng rng = make_rng(derive_seed(seed, kOffsetStream, class_id));
  const int drift_side = hpx / 4;
  int x0 = 0, y0 = 0;
  if (mc.kind == MotionClass::kHorizontalDrift) {
    x0 = std::uniform_int_distribution<int>(0, wpx - 1)(rng);
    y0 = std::uniform_int_distribution<int>(0, hpx - drift_side)(rng);
  } else if (mc.kind == MotionClass::kVerticalDrift) {
    x0 = std::uniform_int_distribution<int>(0, wpx - drift_side)(rng);
    y0 = std::uniform_int_distribution<int>(0, hpx - 1)(rng);
  }

  VideoClip clip;
  clip.label = class_id;
  clip.seed = seed;
  clip.frames.reserve(t);
  for (int ti = 0; ti < t; ++ti) {
    Image f = background;
    switch (mc.kind) {
      case MotionClass::kHorizontalDrift:
        paint_square(f, y0, (x0 + mc.velocity_px * ti) % wpx, drift_side, true, false);
        break;
      case MotionClass::kVerticalDrift:
        paint_square(f, (y0 + mc.velocity_px * ti) % hpx, x0, drift_side, false, true);
        break;
      case MotionClass::kPulse: {
        const double phase = 2.0 * std::numbers::pi * ti / t;
        const int side = static_cast<int>(
            std::lround(hpx / 8.0 * mc.amplitude * (1.5 + std::sin(phase))));
        if (side > 0) paint_square(f, (hpx - side) / 2, (wpx - side) / 2, side, false, false);
        break;
      }
    }
    clip.frames.push_back(std::move(f));
  }
  return clip;
}

MotionStats motion_stats(const VideoClip& clip) {
  clip.validate();
  if (clip.t() < 2) throw DomainError("motion_stats: need at least 2 frames");
  const Image& f0 = clip.frames[0];
  const int pairs = clip.t() - 1;

  std::vector<double> mass(pairs, 0.0);
  std::vector<double> cx(pairs, 0.0), cy(pairs, 0.0);
  for (int p = 0; p < pairs; ++p) {
    const Image& a = clip.frames[p];
    const Image& b = clip.frames[p + 1];
    CircularMean mx(f0.w), my(f0.h);
    double m = 0.0;
    for (int y = 0; y < f0.h; ++y)
      for (int x = 0; x < f0.w; ++x)
        for (int c = 0; c < f0.ch; ++c) {
          const double d = std::fabs(static_cast<double>(a.at(y, x, c)) - b.at(y, x, c));
          if (d == 0.0) continue;
          m += d;
          mx.add(x, d);
          my.add(y, d);
        }
    mass[p] = m;
    if (m > 0.0) {
      cx[p] = mx.value();
      cy[p] = my.value();
    }
  }

  MotionStats st;
  double mass_total = 0.0;
  for (double m : mass) mass_total += m;
  st.any_change = mass_total > 0.0;
  if (!st.any_change) return st;

  int disp_n = 0;
  double sdx = 0.0, sdy = 0.0;
  for (int p = 0; p + 1 < pairs; ++p) {
    if (mass[p] == 0.0 || mass[p + 1] == 0.0) continue;
    sdx += circ_diff(cx[p + 1], cx[p], f0.w);
    sdy += circ_diff(cy[p + 1], cy[p], f0.h);
    ++disp_n;
  }
  if (disp_n > 0) {
    st.drift_x = std::fabs(sdx / disp_n);
    st.drift_y = std::fabs(sdy / disp_n);
  }

  if (pairs > 1) {
    double dmass = 0.0;
    for (int p = 0; p + 1 < pairs; ++p) dmass += std::fabs(mass[p + 1] - mass[p]);
    st.rel_mass_change = (dmass / (pairs - 1)) / (mass_total / pairs);
  }
  return st;
}

int label_oracle(const VideoClip& clip, const OracleThresholds& thr) {
  const MotionStats st = motion_stats(clip);
  if (!st.any_change) return kUnclassifiable;
  const double dom = std::max(st.drift_x, st.drift_y);
  if (dom < thr.disp_px)
    return st.rel_mass_change > thr.area_rel ? 2 : kUnclassifiable;
  return st.drift_x >= st.drift_y ? 0 : 1;
}

std::string make_dataset(int n_per_class, uint64_t seed, int t, int hpx, int wpx,
                         const std::string& out_dir) {
  if (n_per_class < 1) throw DomainError("make_dataset: n_per_class must be >= 1");
  std::filesystem::create_directories(out_dir);
  io::Manifest manifest;
  manifest.meta["frames"] = std::to_string(t);
  manifest.meta["height"] = std::to_string(hpx);
  manifest.meta["width"] = std::to_string(wpx);
  manifest.meta["classes"] = std::to_string(num_motion_classes());
  manifest.meta["per_class"] = std::to_string(n_per_class);
  for (int c = 0; c < num_motion_classes(); ++c)
    for (int i = 0; i < n_per_class; ++i) {
      const uint64_t clip_seed = derive_seed(seed, c, i);
      char name[64];
      std::snprintf(name, sizeof name, "clip_%d_%04d.gfv", c, i);
      io::write_clip(out_dir + "/" + name, generate_clip(c, clip_seed, t, hpx, wpx));
      manifest.rows.push_back({name, c, clip_seed});
    }
  const std::string manifest_path = out_dir + "/manifest.tsv";
  io::write_manifest(manifest_path, manifest);
  return manifest_path;
}

}  // namespace gfv
