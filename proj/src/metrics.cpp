#include "gfv/metrics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "gfv/error.hpp"
#include "gfv/io.hpp"
#include "gfv/rng.hpp"
#include "gfv/train.hpp"

namespace gfv {

namespace {

int pooled_bins(int k) { return std::min(16, k); }

using RowMat =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Eigendecomposition of the symmetrized input; eigenvalues below -1e-8 are a
// hard failure, small negatives from roundoff flatten to zero.
Eigen::VectorXd psd_eigen(const Eigen::MatrixXd& m, Eigen::MatrixXd* vectors,
                          const char* what) {
  const Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  if (es.info() != Eigen::Success)
    throw NumericError(std::string(what) + ": eigendecomposition failed");
  Eigen::VectorXd ev = es.eigenvalues();
  for (int i = 0; i < ev.size(); ++i) {
    if (ev[i] < -1e-8)
      throw NumericError(std::string(what) + ": eigenvalue " + std::to_string(ev[i]) +
                         " below -1e-8; matrix is not PSD");
    ev[i] = std::max(ev[i], 0.0);
  }
  if (vectors) *vectors = es.eigenvectors();
  return ev;
}

struct Moments {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;  // unbiased
};

Moments moments(const std::vector<std::vector<double>>& set, const char* name) {
  if (set.empty()) throw DomainError(std::string("frechet: ") + name + " is empty");
  const int n = static_cast<int>(set.size());
  const int d = static_cast<int>(set.front().size());
  for (const auto& row : set)
    if (static_cast<int>(row.size()) != d)
      throw ShapeError(std::string("frechet: ragged feature rows in ") + name);
  if (n < d + 1)
    throw DomainError(std::string("frechet: ") + name + " has " + std::to_string(n) +
                      " samples for dimension " + std::to_string(d) + "; need at least " +
                      std::to_string(d + 1));
  Moments m;
  m.mean = Eigen::VectorXd::Zero(d);
  for (const auto& row : set)
    for (int j = 0; j < d; ++j) m.mean[j] += row[j];
  m.mean /= n;
  m.cov = Eigen::MatrixXd::Zero(d, d);
  Eigen::VectorXd c(d);
  for (const auto& row : set) {
    for (int j = 0; j < d; ++j) c[j] = row[j] - m.mean[j];
    m.cov += c * c.transpose();
  }
  m.cov /= n - 1;
  return m;
}

}  // namespace

int feature_length(const CodeBook& book) {
  book.validate();
  return 6 + pooled_bins(book.k);
}

std::vector<double> clip_features(const VideoClip& clip, const CodeBook& book,
                                  const TokenLayout& layout, TokenOrder order) {
  const std::vector<int> ids = tokenize_clip(clip, book, layout, order);

  std::vector<double> f;
  f.reserve(feature_length(book));
  double mean_sum = 0.0, var_sum = 0.0;
  for (const Image& fr : clip.frames) {
    const double n = static_cast<double>(fr.pix.size());
    double s = 0.0;
    for (uint8_t p : fr.pix) s += p / 255.0;
    const double mu = s / n;
    double sq = 0.0;
    for (uint8_t p : fr.pix) {
      const double d = p / 255.0 - mu;
      sq += d * d;
    }
    mean_sum += mu;
    var_sum += sq / n;
  }
  f.push_back(mean_sum / clip.t());
  f.push_back(var_sum / clip.t());
  f.push_back(temporal_consistency(clip));

  const MotionStats st = motion_stats(clip);
  f.push_back(st.drift_x);
  f.push_back(st.drift_y);
  f.push_back(st.rel_mass_change);

  const int bins = pooled_bins(book.k);
  std::vector<double> hist(bins, 0.0);
  for (int id : ids) hist[static_cast<size_t>(id) * bins / book.k] += 1.0;
  for (double h : hist) f.push_back(h / static_cast<double>(ids.size()));
  return f;
}

std::vector<double> matrix_sqrt_psd(const std::vector<double>& m, int d) {
  if (d <= 0 || m.size() != static_cast<size_t>(d) * d)
    throw ShapeError("matrix_sqrt_psd: " + std::to_string(m.size()) +
                     " values for a " + std::to_string(d) + "x" + std::to_string(d) +
                     " matrix");
  Eigen::Map<const RowMat> a(m.data(), d, d);
  Eigen::MatrixXd vec;
  Eigen::VectorXd ev = psd_eigen(a, &vec, "matrix_sqrt_psd");
  for (int i = 0; i < d; ++i) ev[i] = std::sqrt(ev[i]);
  const Eigen::MatrixXd root = vec * ev.asDiagonal() * vec.transpose();
  std::vector<double> out(static_cast<size_t>(d) * d);
  Eigen::Map<RowMat>(out.data(), d, d) = root;
  return out;
}

double frechet_distance(const std::vector<std::vector<double>>& a,
                        const std::vector<std::vector<double>>& b) {
  const Moments ma = moments(a, "set A");
  const Moments mb = moments(b, "set B");
  if (ma.mean.size() != mb.mean.size())
    throw ShapeError("frechet: feature dims " + std::to_string(ma.mean.size()) +
                     " vs " + std::to_string(mb.mean.size()));
  const int d = static_cast<int>(ma.mean.size());

  Eigen::MatrixXd vec;
  Eigen::VectorXd ev = psd_eigen(ma.cov, &vec, "frechet: covariance of set A");
  for (int i = 0; i < d; ++i) ev[i] = std::sqrt(ev[i]);
  const Eigen::MatrixXd root_a = vec * ev.asDiagonal() * vec.transpose();

  // Tr((S_A^{1/2} S_B S_A^{1/2})^{1/2}) is the sum of the root eigenvalues
  // of the inner product, so the second square root never needs assembling.
  const Eigen::MatrixXd inner = root_a * mb.cov * root_a;
  Eigen::VectorXd inner_ev = psd_eigen(inner, nullptr, "frechet: cross term");
  double tr_root = 0.0;
  for (int i = 0; i < d; ++i) tr_root += std::sqrt(inner_ev[i]);

  const double fd = (ma.mean - mb.mean).squaredNorm() + ma.cov.trace() +
                    mb.cov.trace() - 2.0 * tr_root;
  return std::max(fd, 0.0);
}

namespace {

std::vector<std::vector<std::vector<double>>> group_by_label(
    const std::vector<std::vector<double>>& feats, const std::vector<int>& labels,
    int num_classes, int shift, const char* side) {
  if (feats.size() != labels.size())
    throw ShapeError(std::string("conditional fd: ") + side + " has " +
                     std::to_string(feats.size()) + " features but " +
                     std::to_string(labels.size()) + " labels");
  std::vector<std::vector<std::vector<double>>> groups(num_classes);
  for (size_t i = 0; i < feats.size(); ++i) {
    const int l = labels[i];
    if (l < 0 || l >= num_classes)
      throw IndexError(std::string("conditional fd: ") + side + " label " +
                       std::to_string(l) + " outside [0," +
                       std::to_string(num_classes) + ")");
    groups[(l + shift) % num_classes].push_back(feats[i]);
  }
  return groups;
}

}  // namespace

ConditionalFd class_conditional_fd(const std::vector<std::vector<double>>& real_feats,
                                   const std::vector<int>& real_labels,
                                   const std::vector<std::vector<double>>& gen_feats,
                                   const std::vector<int>& gen_labels,
                                   int num_classes) {
  if (num_classes < 2)
    throw DomainError("conditional fd: needs at least 2 classes, got " +
                      std::to_string(num_classes));
  if (real_feats.empty() || gen_feats.empty())
    throw DomainError("conditional fd: empty feature set");
  const size_t d = real_feats[0].size();

  const auto real_g = group_by_label(real_feats, real_labels, num_classes, 0, "real");
  const auto gen_g = group_by_label(gen_feats, gen_labels, num_classes, 0, "generated");
  const auto gen_rot = group_by_label(gen_feats, gen_labels, num_classes, 1, "generated");
  for (int c = 0; c < num_classes; ++c)
    if (real_g[c].size() <= d || gen_g[c].size() <= d)
      throw DomainError("conditional fd: class " + std::to_string(c) +
                        " needs at least " + std::to_string(d + 1) +
                        " samples per side, has " + std::to_string(real_g[c].size()) +
                        " real and " + std::to_string(gen_g[c].size()) + " generated");

  ConditionalFd out;
  out.per_class.reserve(num_classes);
  double mism_sum = 0.0;
  for (int c = 0; c < num_classes; ++c) {
    out.per_class.push_back(frechet_distance(real_g[c], gen_g[c]));
    mism_sum += frechet_distance(real_g[c], gen_rot[c]);
  }
  double match_sum = 0.0;
  for (double v : out.per_class) match_sum += v;
  out.matched = match_sum / num_classes;
  out.mismatched = mism_sum / num_classes;
  return out;
}

FidelityReport conditional_fidelity(const std::vector<VideoClip>& clips,
                                    const std::vector<int>& requested,
                                    int num_classes,
                                    const OracleThresholds& thresholds) {
  if (clips.empty()) throw DomainError("conditional_fidelity: no clips");
  if (clips.size() != requested.size())
    throw ShapeError("conditional_fidelity: " + std::to_string(clips.size()) +
                     " clips for " + std::to_string(requested.size()) + " labels");
  if (num_classes < 1)
    throw DomainError("conditional_fidelity: num_classes must be >= 1");

  FidelityReport rep;
  rep.class_accuracy.assign(num_classes, 0.0);
  rep.class_total.assign(num_classes, 0);
  std::vector<int> correct(num_classes, 0);
  for (size_t i = 0; i < clips.size(); ++i) {
    const int want = requested[i];
    if (want < 0 || want >= num_classes)
      throw IndexError("conditional_fidelity: requested label " + std::to_string(want) +
                       " outside [0," + std::to_string(num_classes) + ")");
    ++rep.class_total[want];
    if (label_oracle(clips[i], thresholds) == want) ++correct[want];
  }
  int total_correct = 0;
  for (int c = 0; c < num_classes; ++c) {
    total_correct += correct[c];
    if (rep.class_total[c] > 0)
      rep.class_accuracy[c] = static_cast<double>(correct[c]) / rep.class_total[c];
  }
  rep.accuracy = static_cast<double>(total_correct) / clips.size();
  return rep;
}

double temporal_consistency(const VideoClip& clip) {
  clip.validate();
  if (clip.t() < 2)
    throw DomainError("temporal_consistency: need at least 2 frames, got " +
                      std::to_string(clip.t()));
  double total = 0.0;
  for (int t = 0; t + 1 < clip.t(); ++t) {
    const Image& a = clip.frames[t];
    const Image& b = clip.frames[t + 1];
    double s = 0.0;
    for (size_t i = 0; i < a.pix.size(); ++i)
      s += std::fabs(static_cast<double>(a.pix[i]) - b.pix[i]);
    total += s / static_cast<double>(a.pix.size());
  }
  return total / (clip.t() - 1) / 255.0;
}

EvalReport evaluate(const std::vector<VideoClip>& real,
                    const std::vector<VideoClip>& generated,
                    const std::vector<int>& requested, int num_classes,
                    const CodeBook& book, const TokenLayout& layout, TokenOrder order,
                    const OracleThresholds& thresholds) {
  if (real.empty()) throw DomainError("evaluate: no real clips");

  std::vector<std::vector<double>> real_f, gen_f;
  real_f.reserve(real.size());
  for (const VideoClip& c : real) real_f.push_back(clip_features(c, book, layout, order));
  gen_f.reserve(generated.size());
  for (const VideoClip& c : generated)
    gen_f.push_back(clip_features(c, book, layout, order));

  EvalReport rep;
  rep.fd = frechet_distance(real_f, gen_f);

  // The per-class comparison needs a Gaussian fit per class per side, so it
  // only runs when every class can support one; otherwise the fields stay NaN
  // and the report omits them.
  if (num_classes >= 2) {
    std::vector<int> real_labels(real.size());
    for (size_t i = 0; i < real.size(); ++i) real_labels[i] = real[i].label;
    std::vector<size_t> rc(num_classes, 0), gc(num_classes, 0);
    bool feasible = requested.size() == generated.size();
    for (int l : real_labels)
      if (l >= 0 && l < num_classes) ++rc[l]; else feasible = false;
    for (int l : requested)
      if (l >= 0 && l < num_classes) ++gc[l]; else feasible = false;
    const size_t need = real_f[0].size() + 1;
    for (int c = 0; c < num_classes && feasible; ++c)
      feasible = rc[c] >= need && gc[c] >= need;
    if (feasible) {
      const ConditionalFd cfd =
          class_conditional_fd(real_f, real_labels, gen_f, requested, num_classes);
      rep.fd_class = cfd.per_class;
      rep.fd_matched = cfd.matched;
      rep.fd_mismatched = cfd.mismatched;
    }
  }

  const FidelityReport fid =
      conditional_fidelity(generated, requested, num_classes, thresholds);
  rep.class_accuracy = fid.class_accuracy;
  rep.accuracy = fid.accuracy;

  double psnr_sum = 0.0;
  for (const VideoClip& c : real) {
    const Image mosaic = compose_grid(c.frames, layout);
    psnr_sum += psnr(mosaic, decode(encode(mosaic, book), book));
  }
  rep.mean_psnr = psnr_sum / real.size();

  double cons_sum = 0.0;
  for (const VideoClip& c : generated) cons_sum += temporal_consistency(c);
  rep.consistency = cons_sum / generated.size();

  rep.real_count = static_cast<int>(real.size());
  rep.generated_count = static_cast<int>(generated.size());
  rep.config["classes"] = std::to_string(num_classes);
  rep.config["vocab"] = std::to_string(book.k);
  rep.config["feature_len"] = std::to_string(feature_length(book));
  return rep;
}

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_label(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

}  // namespace

void write_eval_report(const std::string& path, const EvalReport& report) {
  std::ostringstream ss;
  ss << "metric\tvalue\n";
  ss << "accuracy\t" << fmt(report.accuracy) << "\n";
  for (size_t c = 0; c < report.class_accuracy.size(); ++c)
    ss << "class_" << c << "_accuracy\t" << fmt(report.class_accuracy[c]) << "\n";
  ss << "fd_artifact_scale\t" << fmt(report.fd) << "\n";
  if (std::isfinite(report.fd_matched)) {
    for (size_t c = 0; c < report.fd_class.size(); ++c)
      ss << "fd_class_" << c << "\t" << fmt(report.fd_class[c]) << "\n";
    ss << "fd_matched\t" << fmt(report.fd_matched) << "\n";
    ss << "fd_mismatched\t" << fmt(report.fd_mismatched) << "\n";
  }
  ss << "mean_psnr_db\t" << fmt(report.mean_psnr) << "\n";
  ss << "temporal_consistency\t" << fmt(report.consistency) << "\n";
  ss << "real_clips\t" << report.real_count << "\n";
  ss << "generated_clips\t" << report.generated_count << "\n";
  ss << "#";
  for (const auto& [k, v] : report.config) ss << " " << k << "=" << v;
  ss << "\n";
  io::write_file(path, ss.str());
}

std::vector<AblationRow> ablation_report(const std::vector<AblationEntry>& entries,
                                         const std::vector<VideoClip>& real,
                                         const CodeBook& book,
                                         const AblationConfig& acfg) {
  if (entries.empty()) throw DomainError("ablation: no checkpoints");
  if (acfg.per_class < 1) throw DomainError("ablation: per_class must be >= 1");

  std::vector<AblationRow> rows;
  ModelConfig ref_model;
  TokenLayout ref_layout;
  TokenOrder ref_order = TokenOrder::kGrid;
  for (size_t e = 0; e < entries.size(); ++e) {
    const Checkpoint ckpt = load_checkpoint(entries[e].checkpoint);
    if (ckpt.model.vocab != book.k)
      throw IncompatibilityError("ablation: " + entries[e].checkpoint + " has vocab " +
                                 std::to_string(ckpt.model.vocab) +
                                 ", codebook has k " + std::to_string(book.k));
    if (e == 0) {
      ref_model = ckpt.model;
      ref_layout = ckpt.layout;
      ref_order = ckpt.order;
    } else if (ckpt.model.vocab != ref_model.vocab || !(ckpt.layout == ref_layout) ||
               ckpt.order != ref_order) {
      throw IncompatibilityError("ablation: " + entries[e].checkpoint +
                                 " disagrees with the first checkpoint on vocab, "
                                 "layout or token order");
    }

    std::vector<VideoClip> gen;
    std::vector<int> req;
    for (int c = 0; c < ckpt.model.num_classes; ++c)
      for (int i = 0; i < acfg.per_class; ++i) {
        SamplerConfig sampler;
        sampler.temperature = acfg.temperature;
        sampler.top_k = acfg.top_k;
        sampler.seed = derive_seed(acfg.seed, c, i);
        const std::vector<int> ids = generate(ckpt.model, ckpt.params, c, sampler);
        gen.push_back(clip_from_tokens(ids, book, ckpt.layout, ckpt.order, c));
        req.push_back(c);
      }

    const EvalReport rep = evaluate(real, gen, req, ckpt.model.num_classes, book,
                                    ckpt.layout, ckpt.order, acfg.thresholds);
    rows.push_back({entries[e].p_max, rep.fd, rep.accuracy, rep.consistency});
  }
  return rows;
}

void write_ablation_table(const std::string& path,
                          const std::vector<AblationRow>& rows,
                          const AblationConfig& acfg) {
  std::ostringstream ss;
  ss << "p_max\tfd\taccuracy\tconsistency\n";
  for (const AblationRow& r : rows)
    ss << fmt_label(r.p_max) << "\t" << fmt(r.fd) << "\t" << fmt(r.accuracy) << "\t"
       << fmt(r.consistency) << "\n";
  ss << "# per_class=" << acfg.per_class << " temperature=" << fmt_label(acfg.temperature)
     << " top_k=" << acfg.top_k << " seed=" << acfg.seed << " grid=";
  for (size_t i = 0; i < rows.size(); ++i) {
    if (i) ss << ",";
    ss << fmt_label(rows[i].p_max);
  }
  ss << "\n";
  io::write_file(path, ss.str());
}

}  // namespace gfv
