#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "gfv/pipeline.hpp"
#include "gfv/synth.hpp"

namespace gfv {

// Fixed-length clip summary used by the Fréchet distance: mean and variance
// of pixel intensity averaged over frames, mean absolute inter-frame
// difference, displacement-centroid statistics (drift per axis, relative
// mass change), and a code-usage histogram pooled to at most 16 bins.
std::vector<double> clip_features(const VideoClip& clip, const CodeBook& book,
                                  const TokenLayout& layout, TokenOrder order);
int feature_length(const CodeBook& book);

// Square root of a symmetric PSD matrix (row-major d x d) by
// eigendecomposition. Eigenvalues below -1e-8 fail; small negatives from
// roundoff are clamped to zero.
std::vector<double> matrix_sqrt_psd(const std::vector<double>& m, int d);

// ||mu_A - mu_B||^2 + Tr(S_A + S_B - 2 (S_A^{1/2} S_B S_A^{1/2})^{1/2}) with
// unbiased covariances. Each set needs at least dim+1 samples.
double frechet_distance(const std::vector<std::vector<double>>& a,
                        const std::vector<std::vector<double>>& b);

// Per-class Fréchet comparison: `matched` averages FD(real_c, generated_c)
// over classes; `mismatched` repeats this after reassigning every generated
// feature to the next class cyclically, the strongest misassignment that
// keeps class sizes intact. Conditional control shows as matched < mismatched.
// Every class needs at least dim+1 members on both sides.
struct ConditionalFd {
  std::vector<double> per_class;  // FD of class c real vs class c generated
  double matched = 0.0;           // mean of per_class
  double mismatched = 0.0;        // mean after the cyclic reassignment
};

ConditionalFd class_conditional_fd(const std::vector<std::vector<double>>& real_feats,
                                   const std::vector<int>& real_labels,
                                   const std::vector<std::vector<double>>& gen_feats,
                                   const std::vector<int>& gen_labels,
                                   int num_classes);

struct FidelityReport {
  std::vector<double> class_accuracy;  // correct fraction per requested class
  std::vector<int> class_total;
  double accuracy = 0.0;  // overall; unclassifiable clips count as incorrect
};

// Fraction of clips whose analytic motion label matches the label they were
// requested with.
FidelityReport conditional_fidelity(const std::vector<VideoClip>& clips,
                                    const std::vector<int>& requested,
                                    int num_classes,
                                    const OracleThresholds& thresholds = {});

// Mean over consecutive frame pairs of the mean absolute pixel difference,
// scaled into [0,1] by the 8-bit range.
double temporal_consistency(const VideoClip& clip);

struct EvalReport {
  std::vector<double> class_accuracy;
  double accuracy = 0.0;
  double fd = 0.0;         // real-vs-generated feature distance, artifact scale
  // Filled only when every class has enough samples for a per-class Gaussian
  // fit on both sides; NaN (and absent from the report file) otherwise.
  std::vector<double> fd_class;
  double fd_matched = std::numeric_limits<double>::quiet_NaN();
  double fd_mismatched = std::numeric_limits<double>::quiet_NaN();
  double mean_psnr = 0.0;  // codebook round-trip on the real clips, dB
  double consistency = 0.0;  // mean temporal consistency of the generated clips
  int real_count = 0;
  int generated_count = 0;
  std::map<std::string, std::string> config;  // echoed into the report file
};

EvalReport evaluate(const std::vector<VideoClip>& real,
                    const std::vector<VideoClip>& generated,
                    const std::vector<int>& requested, int num_classes,
                    const CodeBook& book, const TokenLayout& layout, TokenOrder order,
                    const OracleThresholds& thresholds = {});

// Tab-separated metric/value rows under a header, then one '#' comment line
// echoing the config map.
void write_eval_report(const std::string& path, const EvalReport& report);

struct AblationEntry {
  double p_max = 0.0;  // row label: the masking cap the checkpoint was trained with
  std::string checkpoint;
};

struct AblationRow {
  double p_max = 0.0;
  double fd = 0.0;
  double accuracy = 0.0;
  double consistency = 0.0;
};

struct AblationConfig {
  int per_class = 10;
  double temperature = 1.0;
  int top_k = 64;
  uint64_t seed = 0;  // one seed; per-clip sampler seeds derive from (class, index)
  OracleThresholds thresholds;
};

// Generates clips from every checkpoint under the same derived seeds and
// evaluates them against the same real set, one row per checkpoint.
// Checkpoints must agree on vocab, layout and token order.
std::vector<AblationRow> ablation_report(const std::vector<AblationEntry>& entries,
                                         const std::vector<VideoClip>& real,
                                         const CodeBook& book,
                                         const AblationConfig& acfg);

void write_ablation_table(const std::string& path,
                          const std::vector<AblationRow>& rows,
                          const AblationConfig& acfg);

}  // namespace gfv
