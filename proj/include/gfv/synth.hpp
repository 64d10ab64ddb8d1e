#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gfv/image.hpp"

namespace gfv {

// Registry entry for one synthetic motion class.
struct MotionClass {
  int id = 0;
  enum Kind { kHorizontalDrift, kVerticalDrift, kPulse } kind = kHorizontalDrift;
  int velocity_px = 2;     // drift classes: pixels per frame
  double amplitude = 1.0;  // pulse class: scales the oscillating side
};

// Contiguous class ids 0..2: rightward drift, downward drift, pulsing size.
const std::vector<MotionClass>& motion_registry();
inline int num_motion_classes() { return 3; }

// Deterministic clip synthesis. The background is a per-clip static noise
// pattern; the foreground is a bright square whose motion depends on the
// class. Initial offsets come from the seeded generator.
VideoClip generate_clip(int class_id, uint64_t seed, int t, int hpx, int wpx);

// Wrap-aware motion summary used by the label oracle and the feature
// extractor. Statistics are computed on absolute inter-frame differences:
// their brightness-weighted circular centroid tracks where change happens,
// and their mass tracks how much of the image changed. Drift is the magnitude
// of the signed average centroid step, so coherent motion survives while
// oscillation (a square growing then shrinking in place) cancels to near 0.
struct MotionStats {
  double drift_x = 0.0;          // px/frame, |mean signed horizontal step|
  double drift_y = 0.0;          // px/frame, |mean signed vertical step|
  double rel_mass_change = 0.0;  // mean |Δmass| / mean mass over frame pairs
  bool any_change = false;       // false for an all-constant clip
};

MotionStats motion_stats(const VideoClip& clip);

// Classification thresholds; kept in config files so the evaluation
// instrument is auditable rather than baked in.
struct OracleThresholds {
  double disp_px = 1.0;     // min dominant displacement for a drift class
  double area_rel = 0.15;   // min relative mass change for the pulse class
};

constexpr int kUnclassifiable = -1;

// Analytic classifier: drift direction dominance for classes 0/1, low
// displacement with high mass change for class 2, kUnclassifiable otherwise.
int label_oracle(const VideoClip& clip, const OracleThresholds& thr = {});

// Writes n_per_class clips per class plus manifest.tsv into out_dir.
// Returns the manifest path.
std::string make_dataset(int n_per_class, uint64_t seed, int t, int hpx, int wpx,
                         const std::string& out_dir);

}  // namespace gfv
