#include <cmath>
#include <cstring>
#include <filesystem>
#include <numeric>

#include "doctest.h"
#include "gfv/io.hpp"
#include "gfv/metrics.hpp"
#include "gfv/rng.hpp"
#include "gfv/train.hpp"

using namespace gfv;

namespace {

std::string tmp_dir() {
  static int counter = 0;
  auto d = std::filesystem::temp_directory_path() /
           ("gfv_metrics_test_" + std::to_string(counter++));
  std::filesystem::remove_all(d);
  std::filesystem::create_directories(d);
  return d.string();
}

// Codebook of k constant patches with values evenly spaced over [0,1].
CodeBook ladder_book(int k, int patch) {
  CodeBook cb;
  cb.k = k;
  cb.patch_h = patch;
  cb.patch_w = patch;
  cb.channels = 1;
  cb.codewords.assign(static_cast<size_t>(k) * patch * patch, 0.0);
  for (int i = 0; i < k; ++i) {
    const double v = k == 1 ? 0.0 : static_cast<double>(i) / (k - 1);
    for (int j = 0; j < patch * patch; ++j)
      cb.codewords[static_cast<size_t>(i) * patch * patch + j] = v;
  }
  return cb;
}

VideoClip flat_clip(const std::vector<int>& levels, int hw, int label = 0) {
  VideoClip clip;
  clip.label = label;
  for (int lv : levels)
    clip.frames.emplace_back(hw, hw, 1, static_cast<uint8_t>(lv));
  return clip;
}

std::vector<std::vector<double>> gauss_set(int n, int d, double mu, double sigma,
                                           uint64_t seed) {
  Rng rng = make_rng(seed);
  std::normal_distribution<double> g(mu, sigma);
  std::vector<std::vector<double>> set(n, std::vector<double>(d));
  for (auto& row : set)
    for (double& v : row) v = g(rng);
  return set;
}

double frob(const std::vector<double>& m) {
  double s = 0.0;
  for (double v : m) s += v * v;
  return std::sqrt(s);
}

}  // namespace

TEST_CASE("frechet distance is zero on identical sets and symmetric") {
  const auto x = gauss_set(40, 5, 0.3, 1.1, 17);
  const double self = frechet_distance(x, x);
  CHECK(self >= 0.0);
  CHECK(self < 1e-8);

  const auto y = gauss_set(35, 5, -0.2, 0.8, 18);
  const double ab = frechet_distance(x, y);
  const double ba = frechet_distance(y, x);
  CHECK(ab > 0.0);
  CHECK(std::fabs(ab - ba) < 1e-8);
}

TEST_CASE("one-dimensional frechet distance matches the closed form") {
  const auto a = gauss_set(500, 1, 0.0, 1.0, 5);
  const auto b = gauss_set(400, 1, 2.0, 0.5, 6);

  auto stats = [](const std::vector<std::vector<double>>& s) {
    double mu = 0.0;
    for (const auto& r : s) mu += r[0];
    mu /= s.size();
    double var = 0.0;
    for (const auto& r : s) var += (r[0] - mu) * (r[0] - mu);
    var /= s.size() - 1;
    return std::pair<double, double>(mu, std::sqrt(var));
  };
  const auto [mu_a, sd_a] = stats(a);
  const auto [mu_b, sd_b] = stats(b);
  const double want = (mu_a - mu_b) * (mu_a - mu_b) + (sd_a - sd_b) * (sd_a - sd_b);
  CHECK(frechet_distance(a, b) == doctest::Approx(want).epsilon(1e-9));

  // With matched population moments the sampled distance concentrates on
  // the mean gap: N(0,1) vs N(1,1) -> 1.
  const auto p = gauss_set(10000, 1, 0.0, 1.0, 7);
  const auto q = gauss_set(10000, 1, 1.0, 1.0, 8);
  CHECK(frechet_distance(p, q) == doctest::Approx(1.0).epsilon(0.1));
}

TEST_CASE("frechet distance validates sample counts and shapes") {
  const auto ok = gauss_set(10, 4, 0.0, 1.0, 9);
  auto thin = gauss_set(4, 4, 0.0, 1.0, 10);
  CHECK_THROWS_AS(frechet_distance(thin, ok), DomainError);
  CHECK_THROWS_AS(frechet_distance(ok, thin), DomainError);
  CHECK_THROWS_AS(frechet_distance({}, ok), DomainError);

  auto ragged = ok;
  ragged[2].push_back(0.0);
  CHECK_THROWS_AS(frechet_distance(ragged, ok), ShapeError);
  const auto narrow = gauss_set(10, 3, 0.0, 1.0, 11);
  CHECK_THROWS_AS(frechet_distance(ok, narrow), ShapeError);
}

TEST_CASE("psd square root reconstructs the input") {
  const int d = 8;
  Rng rng = make_rng(23);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> b(static_cast<size_t>(d) * d);
  for (double& v : b) v = u(rng);
  std::vector<double> a(static_cast<size_t>(d) * d, 0.0);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      double s = 0.0;
      for (int k = 0; k < d; ++k) s += b[k * d + i] * b[k * d + j];
      a[i * d + j] = s;
    }

  const std::vector<double> root = matrix_sqrt_psd(a, d);
  std::vector<double> back(static_cast<size_t>(d) * d, 0.0);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      double s = 0.0;
      for (int k = 0; k < d; ++k) s += root[i * d + k] * root[k * d + j];
      back[i * d + j] = s;
    }
  std::vector<double> diff(a.size());
  for (size_t i = 0; i < a.size(); ++i) diff[i] = back[i] - a[i];
  CHECK(frob(diff) / frob(a) < 1e-8);
}

TEST_CASE("psd square root rejects clearly negative eigenvalues, clamps dust") {
  CHECK_THROWS_AS(matrix_sqrt_psd({1.0, 0.0, 0.0, -1e-6}, 2), NumericError);
  const auto root = matrix_sqrt_psd({1.0, 0.0, 0.0, -1e-9}, 2);
  CHECK(root[0] == doctest::Approx(1.0));
  CHECK(std::fabs(root[3]) < 1e-12);
  CHECK_THROWS_AS(matrix_sqrt_psd({1.0, 2.0, 3.0}, 2), ShapeError);
}

TEST_CASE("conditional fidelity is perfect on clean clips and chance on shuffled labels") {
  std::vector<VideoClip> clips;
  std::vector<int> truth;
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < 5; ++i) {
      clips.push_back(generate_clip(c, derive_seed(31, c, i), 16, 32, 32));
      truth.push_back(c);
    }
  const FidelityReport clean = conditional_fidelity(clips, truth, 3);
  CHECK(clean.accuracy == 1.0);
  for (int c = 0; c < 3; ++c) {
    CHECK(clean.class_accuracy[c] == 1.0);
    CHECK(clean.class_total[c] == 5);
  }

  std::vector<VideoClip> many;
  std::vector<int> random_req;
  Rng rng = make_rng(77);
  std::uniform_int_distribution<int> pick(0, 2);
  for (int i = 0; i < 1000; ++i) {
    many.push_back(generate_clip(i % 3, derive_seed(32, 0, i), 16, 32, 32));
    random_req.push_back(pick(rng));
  }
  const FidelityReport chance = conditional_fidelity(many, random_req, 3);
  CHECK(chance.accuracy == doctest::Approx(1.0 / 3.0).epsilon(0.15));
  CHECK(std::fabs(chance.accuracy - 1.0 / 3.0) < 0.05);
}

TEST_CASE("conditional fidelity counts unclassifiable clips as incorrect") {
  std::vector<VideoClip> clips(4, flat_clip({40, 40, 40, 40}, 16));
  const FidelityReport rep = conditional_fidelity(clips, {0, 1, 2, 0}, 3);
  CHECK(rep.accuracy == 0.0);

  CHECK_THROWS_AS(conditional_fidelity({}, {}, 3), DomainError);
  CHECK_THROWS_AS(conditional_fidelity(clips, {0, 1}, 3), ShapeError);
  CHECK_THROWS_AS(conditional_fidelity(clips, {0, 1, 2, 3}, 3), IndexError);
}

TEST_CASE("temporal consistency spans its unit range") {
  CHECK(temporal_consistency(flat_clip({90, 90, 90, 90}, 8)) == 0.0);
  CHECK(temporal_consistency(flat_clip({0, 255, 0, 255}, 8)) == 1.0);
  CHECK_THROWS_AS(temporal_consistency(flat_clip({10}, 8)), DomainError);

  const VideoClip clip = generate_clip(0, 51, 16, 32, 32);
  double want = 0.0;
  for (int t = 0; t + 1 < clip.t(); ++t) {
    const Image& a = clip.frames[t];
    const Image& b = clip.frames[t + 1];
    double s = 0.0;
    for (size_t i = 0; i < a.pix.size(); ++i)
      s += std::fabs(static_cast<double>(a.pix[i]) - b.pix[i]) / 255.0;
    want += s / a.pix.size();
  }
  want /= clip.t() - 1;
  CHECK(temporal_consistency(clip) == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("clip features match a hand-computed staircase clip") {
  const CodeBook book = ladder_book(4, 2);
  TokenLayout layout;
  layout.t = 4;
  layout.grid_rows = 2;
  layout.grid_cols = 2;
  layout.frame_tok_rows = 2;
  layout.frame_tok_cols = 2;
  CHECK(feature_length(book) == 10);

  const VideoClip clip = flat_clip({0, 85, 170, 255}, 4);
  const auto f = clip_features(clip, book, layout, TokenOrder::kGrid);
  REQUIRE(f.size() == 10);
  CHECK(f[0] == doctest::Approx((0.0 + 85.0 / 255 + 170.0 / 255 + 1.0) / 4).epsilon(1e-12));
  CHECK(std::fabs(f[1]) < 1e-12);  // flat frames
  CHECK(f[2] == doctest::Approx(85.0 / 255).epsilon(1e-12));
  CHECK(f[3] == 0.0);  // uniform change has a centered, motionless centroid
  CHECK(f[4] == 0.0);
  CHECK(std::fabs(f[5]) < 1e-12);  // equal masses
  for (int b = 0; b < 4; ++b) CHECK(f[6 + b] == doctest::Approx(0.25).epsilon(1e-12));

  for (double v : f) CHECK(std::isfinite(v));
  CHECK(f == clip_features(clip, book, layout, TokenOrder::kGrid));
}

TEST_CASE("token round-trip reproduces codeword-built clips exactly") {
  const CodeBook book = ladder_book(4, 2);
  TokenLayout layout;
  layout.t = 4;
  layout.grid_rows = 2;
  layout.grid_cols = 2;
  layout.frame_tok_rows = 2;
  layout.frame_tok_cols = 2;

  Rng rng = make_rng(41);
  std::uniform_int_distribution<int> pick(0, 3);
  std::vector<int> ids(16);
  for (int& v : ids) v = pick(rng);

  const VideoClip clip = clip_from_tokens(ids, book, layout, TokenOrder::kGrid, 2);
  CHECK(clip.t() == 4);
  CHECK(clip.label == 2);
  CHECK(tokenize_clip(clip, book, layout, TokenOrder::kGrid) == ids);

  const VideoClip again = clip_from_tokens(ids, book, layout, TokenOrder::kFrame, 2);
  CHECK(tokenize_clip(again, book, layout, TokenOrder::kFrame) == ids);

  SUBCASE("geometry mismatches are named") {
    VideoClip bad = clip;
    bad.frames.pop_back();
    CHECK_THROWS_AS(tokenize_clip(bad, book, layout, TokenOrder::kGrid), ShapeError);
    CHECK_THROWS_AS(tokenize_clip(flat_clip({1, 2, 3, 4}, 8), book, layout,
                                  TokenOrder::kGrid),
                    ShapeError);
    CHECK_THROWS_AS(clip_from_tokens({0, 1}, book, layout, TokenOrder::kGrid, 0),
                    ShapeError);
    CHECK_THROWS_AS(clip_from_tokens(std::vector<int>(16, 9), book, layout,
                                     TokenOrder::kGrid, 0),
                    IndexError);
  }
}

TEST_CASE("evaluate composes the metrics and echoes config") {
  const CodeBook book = ladder_book(4, 2);
  TokenLayout layout;
  layout.t = 4;
  layout.grid_rows = 2;
  layout.grid_cols = 2;
  layout.frame_tok_rows = 2;
  layout.frame_tok_cols = 2;

  Rng rng = make_rng(59);
  std::uniform_int_distribution<int> pick(0, 3);
  std::vector<VideoClip> real;
  std::vector<int> labels;
  for (int i = 0; i < 12; ++i) {
    std::vector<int> ids(16);
    for (int& v : ids) v = pick(rng);
    real.push_back(clip_from_tokens(ids, book, layout, TokenOrder::kGrid, i % 3));
    labels.push_back(i % 3);
  }

  const EvalReport rep =
      evaluate(real, real, labels, 3, book, layout, TokenOrder::kGrid);
  CHECK(rep.fd >= 0.0);
  CHECK(rep.fd < 1e-8);
  CHECK(rep.real_count == 12);
  CHECK(rep.generated_count == 12);
  CHECK(rep.mean_psnr == doctest::Approx(99.0));  // codeword-built clips round-trip
  CHECK(rep.consistency >= 0.0);
  CHECK(rep.config.at("classes") == "3");
  CHECK(rep.config.at("vocab") == "4");

  const std::string dir = tmp_dir();
  write_eval_report(dir + "/a.tsv", rep);
  write_eval_report(dir + "/b.tsv", rep);
  const std::string text = io::read_file(dir + "/a.tsv");
  CHECK(text == io::read_file(dir + "/b.tsv"));
  CHECK(text.rfind("metric\tvalue\n", 0) == 0);
  CHECK(text.find("fd_artifact_scale\t") != std::string::npos);
  CHECK(text.find("\n# ") != std::string::npos);

  // Four clips per class cannot support a 10-dimensional per-class Gaussian,
  // so the conditional fields stay NaN and the report omits their rows.
  CHECK(!std::isfinite(rep.fd_matched));
  CHECK(text.find("fd_matched") == std::string::npos);
}

TEST_CASE("class-conditional fd separates matched labels from rotated ones") {
  // One-dimensional features, unit-variance Gaussians per class: the rotated
  // pairing compares N(0,1) against N(5,1), closed-form distance 25.
  Rng rng = make_rng(101);
  std::normal_distribution<double> noise(0.0, 1.0);
  auto set = [&](double mu, int n) {
    std::vector<std::vector<double>> v;
    for (int i = 0; i < n; ++i) v.push_back({mu + noise(rng)});
    return v;
  };
  std::vector<std::vector<double>> real_f, gen_f;
  std::vector<int> real_l, gen_l;
  for (int c = 0; c < 2; ++c) {
    for (auto& f : set(5.0 * c, 4000)) real_f.push_back(f), real_l.push_back(c);
    for (auto& f : set(5.0 * c, 4000)) gen_f.push_back(f), gen_l.push_back(c);
  }

  const ConditionalFd cfd = class_conditional_fd(real_f, real_l, gen_f, gen_l, 2);
  REQUIRE(cfd.per_class.size() == 2);
  CHECK(cfd.matched < 0.05);
  CHECK(cfd.mismatched == doctest::Approx(25.0).epsilon(0.05));
  CHECK(cfd.matched < cfd.mismatched);

  CHECK_THROWS_AS(class_conditional_fd(real_f, real_l, gen_f, gen_l, 1), DomainError);
  const std::vector<int> short_l(real_l.begin(), real_l.end() - 1);
  CHECK_THROWS_AS(class_conditional_fd(real_f, short_l, gen_f, gen_l, 2), ShapeError);
  std::vector<int> bad_l = real_l;
  bad_l[0] = 7;
  CHECK_THROWS_AS(class_conditional_fd(real_f, bad_l, gen_f, gen_l, 2), IndexError);
  CHECK_THROWS_WITH_AS(
      class_conditional_fd(set(0.0, 3), {0, 0, 1}, set(0.0, 3), {0, 1, 1}, 2),
      "conditional fd: class 0 needs at least 2 samples per side, has 2 real "
      "and 1 generated",
      DomainError);
}

TEST_CASE("evaluate fills the per-class fd fields when counts allow") {
  const CodeBook book = ladder_book(4, 2);
  TokenLayout layout;
  layout.t = 4;
  layout.grid_rows = 2;
  layout.grid_cols = 2;
  layout.frame_tok_rows = 2;
  layout.frame_tok_cols = 2;

  // Constant clips at one grey level per class: identical features within a
  // class make the matched distance exactly zero, while the rotated baseline
  // measures the level gaps.
  std::vector<VideoClip> real;
  std::vector<int> labels;
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < 11; ++i) {
      real.push_back(clip_from_tokens(std::vector<int>(16, c), book, layout,
                                      TokenOrder::kGrid, c));
      labels.push_back(c);
    }

  const EvalReport rep =
      evaluate(real, real, labels, 3, book, layout, TokenOrder::kGrid);
  REQUIRE(rep.fd_class.size() == 3);
  CHECK(std::isfinite(rep.fd_matched));
  CHECK(rep.fd_matched < 1e-8);
  CHECK(rep.fd_mismatched > 0.1);
  CHECK(rep.fd_matched < rep.fd_mismatched);

  const std::string dir = tmp_dir();
  write_eval_report(dir + "/r.tsv", rep);
  const std::string text = io::read_file(dir + "/r.tsv");
  CHECK(text.find("fd_class_2\t") != std::string::npos);
  CHECK(text.find("fd_matched\t") != std::string::npos);
  CHECK(text.find("fd_mismatched\t") != std::string::npos);
}

TEST_CASE("ablation rows depend on the checkpoint, not its label") {
  TrainConfig cfg;
  cfg.model.vocab = 8;
  cfg.model.num_classes = 2;
  cfg.model.seq_len = 8;
  cfg.model.dim = 8;
  cfg.model.layers = 1;
  cfg.model.heads = 2;
  cfg.model.mlp_ratio = 2;
  cfg.layout.t = 2;
  cfg.layout.grid_rows = 1;
  cfg.layout.grid_cols = 2;
  cfg.layout.frame_tok_rows = 2;
  cfg.layout.frame_tok_cols = 2;
  cfg.batch_size = 2;
  cfg.steps = 2;
  cfg.h = 4;
  cfg.seed = 3;
  cfg.ckpt_every = 0;
  cfg.out_dir = tmp_dir();

  TokenDataset data;
  data.vocab = 8;
  Rng rng = make_rng(61);
  std::uniform_int_distribution<int> pick(0, 7);
  for (int i = 0; i < 4; ++i) {
    std::vector<int> ids(8);
    for (int& v : ids) v = pick(rng);
    data.ids.push_back(ids);
    data.labels.push_back(i % 2);
  }
  const TrainResult tr = train(cfg, data);

  const CodeBook book = ladder_book(8, 2);
  std::vector<VideoClip> real;
  std::uniform_int_distribution<int> pick8(0, 7);
  for (int i = 0; i < 16; ++i) {
    std::vector<int> ids(8);
    for (int& v : ids) v = pick8(rng);
    real.push_back(clip_from_tokens(ids, book, cfg.layout, cfg.order, i % 2));
  }

  AblationConfig acfg;
  acfg.per_class = 8;
  acfg.top_k = 8;
  acfg.seed = 4;

  const std::vector<AblationEntry> entries = {{0.3, tr.checkpoint_path},
                                              {0.1, tr.checkpoint_path}};
  const auto rows = ablation_report(entries, real, book, acfg);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].p_max == 0.3);
  CHECK(rows[1].p_max == 0.1);
  CHECK(rows[0].fd == rows[1].fd);
  CHECK(rows[0].accuracy == rows[1].accuracy);
  CHECK(rows[0].consistency == rows[1].consistency);

  const auto rows2 = ablation_report(entries, real, book, acfg);
  CHECK(rows2[0].fd == rows[0].fd);

  const std::string dir = tmp_dir();
  write_ablation_table(dir + "/a.tsv", rows, acfg);
  write_ablation_table(dir + "/b.tsv", rows2, acfg);
  const std::string text = io::read_file(dir + "/a.tsv");
  CHECK(text == io::read_file(dir + "/b.tsv"));
  CHECK(text.rfind("p_max\tfd\taccuracy\tconsistency\n", 0) == 0);
  CHECK(text.find("grid=0.3,0.1") != std::string::npos);

  SUBCASE("codebook and checkpoint must agree") {
    CHECK_THROWS_AS(ablation_report(entries, real, ladder_book(4, 2), acfg),
                    IncompatibilityError);
  }
  SUBCASE("empty entry list is rejected") {
    CHECK_THROWS_AS(ablation_report({}, real, book, acfg), DomainError);
  }
}
