#include "gfv/cli.hpp"

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "gfv/error.hpp"
#include "gfv/io.hpp"
#include "gfv/metrics.hpp"
#include "gfv/model.hpp"
#include "gfv/pipeline.hpp"
#include "gfv/rng.hpp"
#include "gfv/synth.hpp"
#include "gfv/train.hpp"
#include "gfv/vq.hpp"

namespace gfv {
namespace {

constexpr const char* kUsageLine =
    "usage: gfv <make-data|train-vq|encode|train-ar|generate|decode|eval|ablate> "
    "[options]";

constexpr const char* kEnvFooter =
    "Environment:\n"
    "  THREADS  requested worker-thread count; every kernel in this build runs\n"
    "           on one thread, so any accepted value behaves like 1. No other\n"
    "           environment variables are consulted.";

// The only environment consult. Unparseable or non-positive values fall back
// to 1 rather than failing: an env var should not be able to break a run.
int requested_threads() {
  const char* env = std::getenv("THREADS");
  if (!env) return 1;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (end == env || *end != '\0' || v < 1) return 1;
  return static_cast<int>(v);
}

// Usage mistakes detected before CLI11 gets to parse.
struct UsageFailure {
  std::string message;
};

std::string fmt_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string one_line(std::string s) {
  for (char& c : s)
    if (c == '\n') c = ' ';
  return s;
}

// --- config file expansion -------------------------------------------------

std::vector<std::string> collect_config_paths(const std::vector<std::string>& args) {
  std::vector<std::string> paths;
  for (size_t i = 0; i < args.size(); ++i) {
    const std::string& a = args[i];
    if (a == "--config") {
      if (i + 1 >= args.size()) throw UsageFailure{"--config needs a file path"};
      paths.push_back(args[++i]);
    } else if (a.rfind("--config=", 0) == 0) {
      paths.push_back(a.substr(9));
    }
  }
  return paths;
}

bool flag_mentioned(const std::vector<std::string>& args, const std::string& flag) {
  const std::string eq = flag + "=";
  for (const std::string& a : args)
    if (a == flag || a.rfind(eq, 0) == 0) return true;
  return false;
}

struct ConfigExpansion {
  std::vector<std::string> prefix;               // synthetic argv before the real one
  std::map<std::string, std::string> source;     // "--flag" -> config path, for blame
};

// Turns config files into argv tokens placed before the user's arguments, so
// explicit flags win. Later files override earlier ones; a key the user also
// passed on the command line is skipped entirely.
ConfigExpansion expand_configs(const CLI::App& app, const std::vector<std::string>& args) {
  ConfigExpansion ex;
  std::map<std::string, std::pair<std::string, std::string>> merged;  // key -> (value, file)
  for (const std::string& path : collect_config_paths(args))
    for (const auto& [k, v] : io::read_config(path)) merged[k] = {v, path};

  for (const auto& [key, vf] : merged) {
    if (key == "config" || key == "help")
      throw DomainError(vf.second + ": key '" + key + "' cannot be set from a config file");
    const std::string flag = "--" + key;
    if (app.get_option_no_throw(flag) == nullptr)
      throw DomainError(vf.second + ": unknown key '" + key + "'");
    if (flag_mentioned(args, flag)) continue;
    ex.prefix.push_back(flag);
    ex.prefix.push_back(vf.first);
    ex.source[flag] = vf.second;
  }
  return ex;
}

// Parses and runs one subcommand, mapping every failure class onto the exit
// code contract.
int dispatch(CLI::App& app, const std::string& cmd, const std::vector<std::string>& args,
             const std::function<void()>& body) {
  std::map<std::string, std::string> config_source;
  try {
    ConfigExpansion ex = expand_configs(app, args);
    config_source = std::move(ex.source);
    std::vector<std::string> full = std::move(ex.prefix);
    full.insert(full.end(), args.begin(), args.end());

    const std::string prog = "gfv " + cmd;
    std::vector<const char*> argv;
    argv.reserve(full.size() + 1);
    argv.push_back(prog.c_str());
    for (const std::string& a : full) argv.push_back(a.c_str());
    app.parse(static_cast<int>(argv.size()), argv.data());

    body();
    return 0;
  } catch (const CLI::CallForHelp&) {
    std::fputs(app.help().c_str(), stdout);
    return 0;
  } catch (const CLI::ParseError& e) {
    // A value injected from a config file that fails option parsing is a file
    // problem, not a usage problem.
    const std::string what = one_line(e.what());
    for (const auto& [flag, file] : config_source)
      if (what.find(flag) != std::string::npos) {
        std::fprintf(stderr, "gfv %s: %s: %s\n", cmd.c_str(), file.c_str(), what.c_str());
        return 2;
      }
    std::fprintf(stderr, "usage: gfv %s [options] -- %s (run 'gfv %s --help')\n",
                 cmd.c_str(), what.c_str(), cmd.c_str());
    return 1;
  } catch (const UsageFailure& e) {
    std::fprintf(stderr, "usage: gfv %s [options] -- %s (run 'gfv %s --help')\n",
                 cmd.c_str(), e.message.c_str(), cmd.c_str());
    return 1;
  } catch (const Error& e) {
    std::fprintf(stderr, "gfv %s: %s\n", cmd.c_str(), one_line(e.what()).c_str());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "gfv %s: %s\n", cmd.c_str(), one_line(e.what()).c_str());
    return 2;
  }
}

// Options shared by every subcommand. The config option is consumed by the
// pre-pass above; registering it keeps --help accurate and parsing strict.
void add_common(CLI::App& app, uint64_t& seed, std::vector<std::string>& config_paths) {
  app.add_option("--seed", seed, "master random seed")->capture_default_str();
  app.add_option("--config", config_paths,
                 "flat 'key = value' file; later keys override earlier ones, "
                 "command-line flags override the file");
  app.footer(kEnvFooter);
}

// --- manifest helpers ------------------------------------------------------

std::string meta_str(const io::Manifest& m, const std::string& key,
                     const std::string& path) {
  const auto it = m.meta.find(key);
  if (it == m.meta.end())
    throw FormatError(path + ": manifest missing meta key '" + key + "'");
  return it->second;
}

int meta_int(const io::Manifest& m, const std::string& key, const std::string& path) {
  const std::string s = meta_str(m, key, path);
  try {
    size_t pos = 0;
    const int v = std::stoi(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw FormatError(path + ": meta key '" + key + "' is not an integer: '" + s + "'");
  }
}

std::vector<VideoClip> load_clips(const io::Manifest& m, const std::string& manifest_path) {
  if (m.rows.empty()) throw FormatError(manifest_path + ": manifest lists no clips");
  std::vector<VideoClip> clips;
  clips.reserve(m.rows.size());
  for (const io::ManifestRow& row : m.rows) {
    const std::string path = io::sibling_path(manifest_path, row.path);
    VideoClip clip = io::read_clip(path);
    if (clip.label != row.label)
      throw FormatError(path + ": clip label " + std::to_string(clip.label) +
                        " disagrees with manifest label " + std::to_string(row.label));
    clips.push_back(std::move(clip));
  }
  return clips;
}

// Token-manifest meta keys written by encode, consumed by train-ar and
// decode: everything needed to rebuild the layout and ordering.
TokenLayout layout_from_meta(const io::Manifest& m, const std::string& path) {
  TokenLayout layout;
  layout.t = meta_int(m, "frames", path);
  layout.grid_rows = meta_int(m, "grid_rows", path);
  layout.grid_cols = meta_int(m, "grid_cols", path);
  layout.frame_tok_rows = meta_int(m, "frame_tok_rows", path);
  layout.frame_tok_cols = meta_int(m, "frame_tok_cols", path);
  layout.validate();
  return layout;
}

// --- subcommands -----------------------------------------------------------

int cmd_make_data(const std::vector<std::string>& args) {
  CLI::App app{"Synthesizes the labeled motion-class clip dataset."};
  int classes = num_motion_classes();
  int per_class = 50, frames = 16, size = 32;
  uint64_t seed = 0;
  std::string out;
  std::vector<std::string> config_paths;
  app.add_option("--classes", classes, "number of motion classes (this build defines 3)")
      ->capture_default_str();
  app.add_option("--per-class", per_class, "clips per class")->capture_default_str();
  app.add_option("--frames", frames, "frames per clip")->capture_default_str();
  app.add_option("--size", size, "frame height and width in pixels")->capture_default_str();
  app.add_option("--out", out, "output directory")->required();
  add_common(app, seed, config_paths);

  return dispatch(app, "make-data", args, [&] {
    if (classes != num_motion_classes())
      throw DomainError("--classes must be " + std::to_string(num_motion_classes()) +
                        ": the motion-class registry is fixed");
    const std::string manifest = make_dataset(per_class, seed, frames, size, size, out);
    std::printf("make-data: wrote %d clips and %s\n", classes * per_class,
                manifest.c_str());
  });
}

int cmd_train_vq(const std::vector<std::string>& args) {
  CLI::App app{"Fits the patch codebook with seeded k-means."};
  std::string data, out;
  int k = 64, patch = 8, iters = 25;
  uint64_t seed = 0;
  std::vector<std::string> config_paths;
  app.add_option("--data", data, "clip manifest")->required();
  app.add_option("--k", k, "codebook size")->capture_default_str();
  app.add_option("--patch", patch, "square patch edge in pixels")->capture_default_str();
  app.add_option("--iters", iters, "k-means iterations")->capture_default_str();
  app.add_option("--out", out, "codebook output file")->required();
  add_common(app, seed, config_paths);

  return dispatch(app, "train-vq", args, [&] {
    const io::Manifest man = io::read_manifest(data);
    std::vector<Image> frames;
    for (const VideoClip& clip : load_clips(man, data))
      for (const Image& f : clip.frames) frames.push_back(f);
    const FitResult fit = fit_codebook(frames, k, patch, patch, iters, seed);
    save_codebook(out, fit.codebook);
    std::printf("train-vq: k=%d patch=%dx%d inertia %.6g -> %.6g over %zu iterations\n",
                k, patch, patch, fit.inertia.front(), fit.inertia.back(),
                fit.inertia.size());
    std::printf("train-vq: wrote %s\n", out.c_str());
  });
}

int cmd_encode(const std::vector<std::string>& args) {
  CLI::App app{"Tokenizes clips into model-order token files."};
  std::string data, codebook, out, order_name = "grid";
  int grid_rows = 4, grid_cols = 4;
  uint64_t seed = 0;
  std::vector<std::string> config_paths;
  app.add_option("--data", data, "clip manifest")->required();
  app.add_option("--codebook", codebook, "fitted codebook file")->required();
  app.add_option("--grid-rows", grid_rows, "frame rows in the mosaic")->capture_default_str();
  app.add_option("--grid-cols", grid_cols, "frame columns in the mosaic")->capture_default_str();
  app.add_option("--order", order_name, "token order consumed by the model")
      ->check(CLI::IsMember({"grid", "frame"}))
      ->capture_default_str();
  app.add_option("--out", out, "output directory")->required();
  add_common(app, seed, config_paths);

  return dispatch(app, "encode", args, [&] {
    const io::Manifest man = io::read_manifest(data);
    if (man.rows.empty()) throw FormatError(data + ": manifest lists no clips");
    const CodeBook book = load_codebook(codebook);
    const TokenOrder order = token_order_from_name(order_name);

    const std::string first_path = io::sibling_path(data, man.rows[0].path);
    const VideoClip first = io::read_clip(first_path);
    const Image& f0 = first.frames[0];
    const TokenLayout layout =
        make_layout(first.t(), grid_rows, grid_cols, f0.h, f0.w, book.patch_h,
                    book.patch_w);

    std::filesystem::create_directories(out);
    io::Manifest outm;
    outm.meta = man.meta;
    outm.meta["vocab"] = std::to_string(book.k);
    outm.meta["order"] = token_order_name(order);
    outm.meta["grid_rows"] = std::to_string(layout.grid_rows);
    outm.meta["grid_cols"] = std::to_string(layout.grid_cols);
    outm.meta["frame_tok_rows"] = std::to_string(layout.frame_tok_rows);
    outm.meta["frame_tok_cols"] = std::to_string(layout.frame_tok_cols);
    outm.meta["patch_h"] = std::to_string(book.patch_h);
    outm.meta["patch_w"] = std::to_string(book.patch_w);
    outm.meta["channels"] = std::to_string(book.channels);

    for (const io::ManifestRow& row : man.rows) {
      const std::string path = io::sibling_path(data, row.path);
      const VideoClip clip = io::read_clip(path);
      if (clip.label != row.label)
        throw FormatError(path + ": clip label " + std::to_string(clip.label) +
                          " disagrees with manifest label " + std::to_string(row.label));
      if (clip.t() != first.t() || clip.frames[0].h != f0.h || clip.frames[0].w != f0.w ||
          clip.frames[0].ch != f0.ch)
        throw FormatError(path + ": clip geometry differs from " + first_path);
      const std::vector<int> ids = tokenize_clip(clip, book, layout, order);
      const std::string name =
          std::filesystem::path(row.path).stem().string() + ".tok";
      io::write_tokens(out + "/" + name, {ids, book.k, row.label});
      outm.rows.push_back({name, row.label, row.seed});
    }
    io::write_manifest(out + "/manifest.tsv", outm);
    std::printf("encode: wrote %zu token files and %s/manifest.tsv\n", man.rows.size(),
                out.c_str());
  });
}

int cmd_train_ar(const std::vector<std::string>& args) {
  CLI::App app{"Trains the conditional token transformer."};
  TrainConfig cfg;
  std::string data, out, resume;
  std::vector<std::string> config_paths;
  app.add_option("--data", data, "token manifest written by encode")->required();
  app.add_option("--steps", cfg.steps, "optimizer steps")->capture_default_str();
  app.add_option("--batch", cfg.batch_size, "clips per step")->capture_default_str();
  app.add_option("--lr", cfg.lr, "learning rate")->capture_default_str();
  app.add_option("--wd", cfg.weight_decay, "decoupled weight decay")->capture_default_str();
  app.add_option("--p-max", cfg.p_max, "masking-rate cap; 0 disables masking")
      ->capture_default_str();
  app.add_option("--segment", cfg.h, "masking segment height in tokens")->capture_default_str();
  app.add_option("--dim", cfg.model.dim, "embedding width")->capture_default_str();
  app.add_option("--layers", cfg.model.layers, "transformer blocks")->capture_default_str();
  app.add_option("--heads", cfg.model.heads, "attention heads")->capture_default_str();
  app.add_option("--mlp-ratio", cfg.model.mlp_ratio, "feed-forward width multiplier")
      ->capture_default_str();
  app.add_option("--ckpt-every", cfg.ckpt_every,
                 "periodic checkpoint interval in steps; 0 disables")
      ->capture_default_str();
  app.add_option("--resume", resume, "checkpoint to continue from");
  app.add_option("--out", out, "output directory")->required();
  add_common(app, cfg.seed, config_paths);

  return dispatch(app, "train-ar", args, [&] {
    const io::Manifest man = io::read_manifest(data);
    const TokenDataset dataset = load_token_dataset(data);
    cfg.model.vocab = dataset.vocab;
    cfg.model.num_classes = meta_int(man, "classes", data);
    cfg.layout = layout_from_meta(man, data);
    cfg.model.seq_len = cfg.layout.s();
    cfg.order = token_order_from_name(meta_str(man, "order", data));
    cfg.out_dir = out;
    const TrainResult res = train(cfg, dataset, resume);
    std::printf("train-ar: %llu steps, final loss %.17g\n",
                static_cast<unsigned long long>(res.steps_done), res.final_loss);
    std::printf("train-ar: wrote %s and %s\n", res.checkpoint_path.c_str(),
                res.log_path.c_str());
  });
}

int cmd_generate(const std::vector<std::string>& args) {
  CLI::App app{"Samples clips from a trained checkpoint."};
  std::string ckpt_path, codebook, out;
  std::vector<int> classes;
  int num = 8, top_k = 64;
  double temperature = 1.0;
  uint64_t seed = 0;
  std::vector<std::string> config_paths;
  app.add_option("--ckpt", ckpt_path, "trained checkpoint")->required();
  app.add_option("--codebook", codebook, "codebook for pixel reconstruction")->required();
  app.add_option("--class", classes, "class id to condition on; repeatable")
      ->required()
      ->delimiter(',');
  app.add_option("--num", num, "clips per requested class")->capture_default_str();
  app.add_option("--temperature", temperature, "softmax temperature; < 1e-6 is argmax")
      ->capture_default_str();
  app.add_option("--top-k", top_k, "candidate cutoff per sampling step")
      ->capture_default_str();
  app.add_option("--out", out, "output directory")->required();
  add_common(app, seed, config_paths);

  return dispatch(app, "generate", args, [&] {
    const Checkpoint ckpt = load_checkpoint(ckpt_path);
    const CodeBook book = load_codebook(codebook);
    if (book.k != ckpt.model.vocab)
      throw IncompatibilityError(codebook + ": codebook size " + std::to_string(book.k) +
                                 " but " + ckpt_path + " expects vocab " +
                                 std::to_string(ckpt.model.vocab));
    if (num < 1) throw DomainError("--num must be >= 1, got " + std::to_string(num));
    for (size_t i = 0; i < classes.size(); ++i) {
      if (classes[i] < 0 || classes[i] >= ckpt.model.num_classes)
        throw IndexError("--class " + std::to_string(classes[i]) + " outside [0," +
                         std::to_string(ckpt.model.num_classes) + ")");
      for (size_t j = 0; j < i; ++j)
        if (classes[j] == classes[i])
          throw DomainError("--class lists " + std::to_string(classes[i]) + " twice");
    }

    std::filesystem::create_directories(out);
    io::Manifest man;
    man.meta["classes"] = std::to_string(ckpt.model.num_classes);
    man.meta["frames"] = std::to_string(ckpt.layout.t);
    man.meta["height"] = std::to_string(ckpt.layout.frame_tok_rows * book.patch_h);
    man.meta["width"] = std::to_string(ckpt.layout.frame_tok_cols * book.patch_w);
    man.meta["vocab"] = std::to_string(book.k);
    man.meta["order"] = token_order_name(ckpt.order);
    man.meta["temperature"] = fmt_g17(temperature);
    man.meta["top_k"] = std::to_string(top_k);

    for (const int c : classes)
      for (int i = 0; i < num; ++i) {
        SamplerConfig sampler;
        sampler.temperature = temperature;
        sampler.top_k = top_k;
        sampler.seed = derive_seed(seed, static_cast<uint64_t>(c), static_cast<uint64_t>(i));
        sampler.validate(book.k);
        const std::vector<int> ids = generate(ckpt.model, ckpt.params, c, sampler);
        char name[48];
        std::snprintf(name, sizeof name, "gen_%d_%04d.gfv", c, i);
        io::write_clip(out + "/" + name,
                       clip_from_tokens(ids, book, ckpt.layout, ckpt.order, c));
        man.rows.push_back({name, c, sampler.seed});
      }
    io::write_manifest(out + "/manifest.tsv", man);
    std::printf("generate: wrote %zu clips and %s/manifest.tsv\n",
                classes.size() * static_cast<size_t>(num), out.c_str());
  });
}

int cmd_decode(const std::vector<std::string>& args) {
  CLI::App app{"Reconstructs clips from token files via the codebook."};
  std::string data, codebook, out;
  uint64_t seed = 0;
  std::vector<std::string> config_paths;
  app.add_option("--data", data, "token manifest written by encode")->required();
  app.add_option("--codebook", codebook, "codebook used to encode")->required();
  app.add_option("--out", out, "output directory")->required();
  add_common(app, seed, config_paths);

  return dispatch(app, "decode", args, [&] {
    const io::Manifest man = io::read_manifest(data);
    if (man.rows.empty()) throw FormatError(data + ": manifest lists no token files");
    const CodeBook book = load_codebook(codebook);
    const TokenLayout layout = layout_from_meta(man, data);
    const TokenOrder order = token_order_from_name(meta_str(man, "order", data));

    std::filesystem::create_directories(out);
    io::Manifest outm;
    outm.meta = man.meta;
    for (const io::ManifestRow& row : man.rows) {
      const std::string path = io::sibling_path(data, row.path);
      const io::TokenRecord rec = io::read_tokens(path);
      if (rec.vocab != book.k)
        throw IncompatibilityError(path + ": vocab " + std::to_string(rec.vocab) +
                                   " but codebook has " + std::to_string(book.k) +
                                   " codewords");
      if (rec.label != row.label)
        throw FormatError(path + ": record label " + std::to_string(rec.label) +
                          " disagrees with manifest label " + std::to_string(row.label));
      if (static_cast<int>(rec.ids.size()) != layout.s())
        throw FormatError(path + ": " + std::to_string(rec.ids.size()) +
                          " tokens but the layout holds " + std::to_string(layout.s()));
      const std::string name =
          std::filesystem::path(row.path).stem().string() + ".gfv";
      io::write_clip(out + "/" + name,
                     clip_from_tokens(rec.ids, book, layout, order, rec.label));
      outm.rows.push_back({name, row.label, row.seed});
    }
    io::write_manifest(out + "/manifest.tsv", outm);
    std::printf("decode: wrote %zu clips and %s/manifest.tsv\n", man.rows.size(),
                out.c_str());
  });
}

int cmd_eval(const std::vector<std::string>& args) {
  CLI::App app{"Scores generated clips against real ones."};
  std::string real_path, gen_path, codebook, out, order_name = "grid";
  int grid_rows = 4, grid_cols = 4;
  OracleThresholds thr;
  uint64_t seed = 0;
  std::vector<std::string> config_paths;
  app.add_option("--real", real_path, "real clip manifest")->required();
  app.add_option("--generated", gen_path, "generated clip manifest")->required();
  app.add_option("--codebook", codebook, "codebook for token features")->required();
  app.add_option("--grid-rows", grid_rows, "frame rows in the mosaic")->capture_default_str();
  app.add_option("--grid-cols", grid_cols, "frame columns in the mosaic")->capture_default_str();
  app.add_option("--order", order_name, "token order for feature extraction")
      ->check(CLI::IsMember({"grid", "frame"}))
      ->capture_default_str();
  app.add_option("--disp-px", thr.disp_px, "oracle: min drift displacement, px/frame")
      ->capture_default_str();
  app.add_option("--area-rel", thr.area_rel, "oracle: min relative mass change")
      ->capture_default_str();
  app.add_option("--out", out, "report file")->required();
  add_common(app, seed, config_paths);

  return dispatch(app, "eval", args, [&] {
    const io::Manifest rman = io::read_manifest(real_path);
    const io::Manifest gman = io::read_manifest(gen_path);
    const CodeBook book = load_codebook(codebook);
    const std::vector<VideoClip> real = load_clips(rman, real_path);
    const std::vector<VideoClip> generated = load_clips(gman, gen_path);
    std::vector<int> requested;
    requested.reserve(gman.rows.size());
    for (const io::ManifestRow& row : gman.rows) requested.push_back(row.label);

    const int num_classes = meta_int(rman, "classes", real_path);
    const Image& f0 = real[0].frames[0];
    const TokenLayout layout = make_layout(real[0].t(), grid_rows, grid_cols, f0.h,
                                           f0.w, book.patch_h, book.patch_w);
    const TokenOrder order = token_order_from_name(order_name);

    EvalReport rep = evaluate(real, generated, requested, num_classes, book, layout,
                              order, thr);
    rep.config["order"] = token_order_name(order);
    rep.config["disp_px"] = fmt_g17(thr.disp_px);
    rep.config["area_rel"] = fmt_g17(thr.area_rel);
    rep.config["seed"] = std::to_string(seed);
    write_eval_report(out, rep);
    std::printf("eval: accuracy %.17g fd %.17g\n", rep.accuracy, rep.fd);
    std::printf("eval: wrote %s\n", out.c_str());
  });
}

std::vector<double> parse_sweep_grid(const std::string& s) {
  std::vector<double> grid;
  size_t start = 0;
  while (start <= s.size()) {
    const size_t comma = s.find(',', start);
    const std::string item =
        s.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    try {
      size_t pos = 0;
      grid.push_back(std::stod(item, &pos));
      if (pos != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw DomainError("--grid: '" + item + "' is not a number");
    }
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return grid;
}

int cmd_ablate(const std::vector<std::string>& args) {
  CLI::App app{"Sweeps the masking cap: one training run and report row per value."};
  TrainConfig base;
  base.ckpt_every = 0;  // sweep arms keep only their final checkpoint
  std::string data, real_path, codebook, out, grid_s = "0,0.1,0.2,0.3,0.4";
  int per_class = 10, top_k = 64;
  double temperature = 1.0;
  std::vector<std::string> config_paths;
  app.add_option("--data", data, "token manifest written by encode")->required();
  app.add_option("--real", real_path, "real clip manifest for the report")->required();
  app.add_option("--codebook", codebook, "codebook for generation and features")->required();
  app.add_option("--grid", grid_s, "comma-separated masking caps to sweep")
      ->capture_default_str();
  app.add_option("--steps", base.steps, "optimizer steps per arm")->capture_default_str();
  app.add_option("--batch", base.batch_size, "clips per step")->capture_default_str();
  app.add_option("--lr", base.lr, "learning rate")->capture_default_str();
  app.add_option("--wd", base.weight_decay, "decoupled weight decay")->capture_default_str();
  app.add_option("--segment", base.h, "masking segment height in tokens")->capture_default_str();
  app.add_option("--dim", base.model.dim, "embedding width")->capture_default_str();
  app.add_option("--layers", base.model.layers, "transformer blocks")->capture_default_str();
  app.add_option("--heads", base.model.heads, "attention heads")->capture_default_str();
  app.add_option("--mlp-ratio", base.model.mlp_ratio, "feed-forward width multiplier")
      ->capture_default_str();
  app.add_option("--per-class", per_class, "generated clips per class per arm")
      ->capture_default_str();
  app.add_option("--temperature", temperature, "sampling temperature")->capture_default_str();
  app.add_option("--top-k", top_k, "sampling candidate cutoff")->capture_default_str();
  app.add_option("--out", out, "output directory")->required();
  add_common(app, base.seed, config_paths);

  return dispatch(app, "ablate", args, [&] {
    const std::vector<double> grid = parse_sweep_grid(grid_s);
    const io::Manifest man = io::read_manifest(data);
    const TokenDataset dataset = load_token_dataset(data);
    base.model.vocab = dataset.vocab;
    base.model.num_classes = meta_int(man, "classes", data);
    base.layout = layout_from_meta(man, data);
    base.model.seq_len = base.layout.s();
    base.order = token_order_from_name(meta_str(man, "order", data));

    const CodeBook book = load_codebook(codebook);
    const io::Manifest rman = io::read_manifest(real_path);
    const std::vector<VideoClip> real = load_clips(rman, real_path);

    std::vector<AblationEntry> entries;
    entries.reserve(grid.size());
    for (const double p : grid) {
      TrainConfig cfg = base;  // shared seed across arms: paired comparison
      cfg.p_max = p;
      char label[32];
      std::snprintf(label, sizeof label, "%g", p);
      cfg.out_dir = out + "/pmax_" + label;
      const TrainResult res = train(cfg, dataset);
      std::printf("ablate: p_max %s trained, final loss %.6g\n", label, res.final_loss);
      entries.push_back({p, res.checkpoint_path});
    }

    AblationConfig acfg;
    acfg.per_class = per_class;
    acfg.temperature = temperature;
    acfg.top_k = top_k;
    acfg.seed = base.seed;
    const std::vector<AblationRow> rows = ablation_report(entries, real, book, acfg);
    write_ablation_table(out + "/ablation.tsv", rows, acfg);
    for (const AblationRow& r : rows)
      std::printf("ablate: p_max %g fd %.6g accuracy %.6g consistency %.6g\n", r.p_max,
                  r.fd, r.accuracy, r.consistency);
    std::printf("ablate: wrote %s/ablation.tsv\n", out.c_str());
  });
}

}  // namespace

int cli_run(const std::vector<std::string>& args) {
  (void)requested_threads();
  if (args.empty()) {
    std::fprintf(stderr, "%s\n", kUsageLine);
    return 1;
  }
  const std::string& cmd = args[0];
  const std::vector<std::string> rest(args.begin() + 1, args.end());

  if (cmd == "--help" || cmd == "-h" || cmd == "help") {
    std::printf(
        "%s\n\n"
        "  make-data  synthesize the labeled motion-class clip dataset\n"
        "  train-vq   fit the patch codebook with seeded k-means\n"
        "  encode     tokenize clips into model-order token files\n"
        "  train-ar   train the conditional token transformer\n"
        "  generate   sample clips from a trained checkpoint\n"
        "  decode     reconstruct clips from token files\n"
        "  eval       score generated clips against real ones\n"
        "  ablate     sweep the masking cap and report one row per value\n\n"
        "Run 'gfv <subcommand> --help' for options.\n\n%s\n",
        kUsageLine, kEnvFooter);
    return 0;
  }
  if (cmd == "make-data") return cmd_make_data(rest);
  if (cmd == "train-vq") return cmd_train_vq(rest);
  if (cmd == "encode") return cmd_encode(rest);
  if (cmd == "train-ar") return cmd_train_ar(rest);
  if (cmd == "generate") return cmd_generate(rest);
  if (cmd == "decode") return cmd_decode(rest);
  if (cmd == "eval") return cmd_eval(rest);
  if (cmd == "ablate") return cmd_ablate(rest);

  std::fprintf(stderr, "%s -- unknown subcommand '%s'\n", kUsageLine, cmd.c_str());
  return 1;
}

}  // namespace gfv
