#include "gfv/train.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>

#include "gfv/io.hpp"
#include "gfv/masking.hpp"
#include "gfv/optim.hpp"

namespace gfv {

TokenDataset load_token_dataset(const std::string& manifest_path) {
  const io::Manifest manifest = io::read_manifest(manifest_path);
  if (manifest.rows.empty())
    throw FormatError("dataset: no rows in " + manifest_path);
  TokenDataset data;
  for (const io::ManifestRow& row : manifest.rows) {
    const std::string path = io::sibling_path(manifest_path, row.path);
    io::TokenRecord rec = io::read_tokens(path);
    if (rec.label != row.label)
      throw FormatError("dataset: " + path + " carries label " +
                        std::to_string(rec.label) + ", manifest says " +
                        std::to_string(row.label));
    if (data.ids.empty()) {
      data.vocab = rec.vocab;
    } else {
      if (rec.vocab != data.vocab)
        throw FormatError("dataset: " + path + " vocab " + std::to_string(rec.vocab) +
                          " differs from " + std::to_string(data.vocab));
      if (rec.ids.size() != data.ids.front().size())
        throw FormatError("dataset: " + path + " has " + std::to_string(rec.ids.size()) +
                          " tokens, expected " + std::to_string(data.ids.front().size()));
    }
    data.ids.push_back(std::move(rec.ids));
    data.labels.push_back(rec.label);
  }
  return data;
}

void TrainConfig::validate() const {
  model.validate();
  layout.validate();
  if (layout.s() != model.seq_len)
    throw IncompatibilityError("train: layout yields " + std::to_string(layout.s()) +
                               " tokens but model.seq_len is " +
                               std::to_string(model.seq_len));
  if (!(lr > 0.0)) throw DomainError("train: lr must be > 0");
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
    throw DomainError("train: betas must lie in [0,1)");
  if (!(eps > 0.0)) throw DomainError("train: eps must be > 0");
  if (weight_decay < 0.0) throw DomainError("train: weight_decay must be >= 0");
  if (batch_size < 1) throw DomainError("train: batch_size must be >= 1");
  if (steps < 0) throw DomainError("train: steps must be >= 0");
  if (p_max < 0.0 || p_max >= 1.0)
    throw DomainError("train: p_max must lie in [0,1), got " + std::to_string(p_max));
  if (h < 2) throw DomainError("train: h must be >= 2, got " + std::to_string(h));
  if (model.seq_len % h != 0)
    throw DomainError("train: h " + std::to_string(h) + " does not divide seq_len " +
                      std::to_string(model.seq_len));
  if (ckpt_every < 0) throw DomainError("train: ckpt_every must be >= 0");
}

uint32_t TrainConfig::config_hash() const {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "vocab=%d;classes=%d;seq=%d;dim=%d;layers=%d;heads=%d;mlp=%d;"
                "t=%d;gr=%d;gc=%d;fr=%d;fc=%d;order=%s;"
                "lr=%.17g;b1=%.17g;b2=%.17g;eps=%.17g;wd=%.17g;"
                "batch=%d;pmax=%.17g;h=%d;seed=%llu",
                model.vocab, model.num_classes, model.seq_len, model.dim, model.layers,
                model.heads, model.mlp_ratio, layout.t, layout.grid_rows, layout.grid_cols,
                layout.frame_tok_rows, layout.frame_tok_cols, token_order_name(order), lr,
                beta1, beta2, eps, weight_decay, batch_size, p_max, h,
                static_cast<unsigned long long>(seed));
  uint32_t hash = 2166136261u;
  for (const char* p = buf; *p != '\0'; ++p) {
    hash ^= static_cast<uint8_t>(*p);
    hash *= 16777619u;
  }
  return hash;
}

namespace {

constexpr uint16_t kCheckpointVersion = 1;

void write_record(io::ByteWriter& w, const std::string& name,
                  const std::vector<int>& dims, const double* data) {
  w.u16(static_cast<uint16_t>(name.size()));
  w.bytes(name.data(), name.size());
  w.u8(static_cast<uint8_t>(dims.size()));
  size_t n = 1;
  for (int d : dims) {
    w.u32(static_cast<uint32_t>(d));
    n *= static_cast<size_t>(d);
  }
  for (size_t i = 0; i < n; ++i) w.f64(data[i]);
}

void write_scalars(io::ByteWriter& w, const std::string& name,
                   const std::vector<double>& vals) {
  write_record(w, name, {static_cast<int>(vals.size())}, vals.data());
}

struct RawRecord {
  std::vector<int> dims;
  std::vector<double> values;
};

// Reads a value that must be an exactly-representable integer (checkpoint
// metadata travels in the f64 framing).
int64_t as_int(double v, const std::string& what) {
  if (!std::isfinite(v) || v != std::floor(v) || std::fabs(v) > 9e15)
    throw FormatError("checkpoint: " + what + " is not an integer: " + std::to_string(v));
  return static_cast<int64_t>(v);
}

const RawRecord& pick(const std::map<std::string, RawRecord>& records,
                      const std::string& name, size_t expect_len) {
  auto it = records.find(name);
  if (it == records.end()) throw FormatError("checkpoint: missing tensor " + name);
  if (expect_len != 0 && it->second.values.size() != expect_len)
    throw FormatError("checkpoint: tensor " + name + " has " +
                      std::to_string(it->second.values.size()) + " values, expected " +
                      std::to_string(expect_len));
  return it->second;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  const std::vector<std::string>& names = ckpt.params.names();
  if (ckpt.adam_m.size() != names.size() || ckpt.adam_v.size() != names.size())
    throw ContractError("checkpoint: optimizer moments misaligned with parameters");

  io::ByteWriter w;
  w.magic("CKPT");
  w.u16(ckpt.version);
  w.u32(ckpt.config_hash);
  w.u64(ckpt.step);
  w.u32(static_cast<uint32_t>(3 * names.size() + 5));

  const ModelConfig& m = ckpt.model;
  write_scalars(w, "meta.model",
                {static_cast<double>(m.vocab), static_cast<double>(m.num_classes),
                 static_cast<double>(m.seq_len), static_cast<double>(m.dim),
                 static_cast<double>(m.layers), static_cast<double>(m.heads),
                 static_cast<double>(m.mlp_ratio)});
  const TokenLayout& l = ckpt.layout;
  write_scalars(w, "meta.layout",
                {static_cast<double>(l.t), static_cast<double>(l.grid_rows),
                 static_cast<double>(l.grid_cols), static_cast<double>(l.frame_tok_rows),
                 static_cast<double>(l.frame_tok_cols)});
  write_scalars(w, "meta.order", {ckpt.order == TokenOrder::kGrid ? 0.0 : 1.0});

  for (const std::string& name : names) {
    const Tensor& t = ckpt.params.at(name);
    write_record(w, name, t.dims(), t.data());
  }
  write_scalars(w, "adam.step", {static_cast<double>(ckpt.adam_step)});
  for (size_t i = 0; i < names.size(); ++i) {
    const std::vector<int>& dims = ckpt.params.at(names[i]).dims();
    write_record(w, "adam.m." + names[i], dims, ckpt.adam_m[i].data());
    write_record(w, "adam.v." + names[i], dims, ckpt.adam_v[i].data());
  }
  write_scalars(w, "rng.master",
                {static_cast<double>(ckpt.master_seed & 0xffffffffULL),
                 static_cast<double>(ckpt.master_seed >> 32)});
  w.save(path);
}

Checkpoint load_checkpoint(const std::string& path) {
  io::ByteReader r = io::ByteReader::from_file(path);
  r.expect_magic("CKPT");
  Checkpoint ckpt;
  ckpt.version = r.u16();
  if (ckpt.version != kCheckpointVersion)
    throw IncompatibilityError("checkpoint: " + path + " has version " +
                               std::to_string(ckpt.version) + ", this build reads " +
                               std::to_string(kCheckpointVersion));
  ckpt.config_hash = r.u32();
  ckpt.step = r.u64();
  const uint32_t count = r.u32();

  std::map<std::string, RawRecord> records;
  for (uint32_t i = 0; i < count; ++i) {
    const uint16_t name_len = r.u16();
    std::string name(name_len, '\0');
    r.bytes(name.data(), name_len);
    const uint8_t rank = r.u8();
    if (rank == 0 || rank > 2)
      throw FormatError("checkpoint: tensor " + name + " has rank " + std::to_string(rank));
    RawRecord rec;
    size_t n = 1;
    for (int dd = 0; dd < rank; ++dd) {
      const uint32_t dim = r.u32();
      if (dim == 0) throw FormatError("checkpoint: tensor " + name + " has a zero dim");
      rec.dims.push_back(static_cast<int>(dim));
      n *= dim;
    }
    rec.values.resize(n);
    for (size_t v = 0; v < n; ++v) rec.values[v] = r.f64();
    if (!records.emplace(std::move(name), std::move(rec)).second)
      throw FormatError("checkpoint: duplicate tensor name in " + path);
  }
  r.expect_exhausted();

  const RawRecord& mm = pick(records, "meta.model", 7);
  ckpt.model.vocab = static_cast<int>(as_int(mm.values[0], "meta.model vocab"));
  ckpt.model.num_classes = static_cast<int>(as_int(mm.values[1], "meta.model num_classes"));
  ckpt.model.seq_len = static_cast<int>(as_int(mm.values[2], "meta.model seq_len"));
  ckpt.model.dim = static_cast<int>(as_int(mm.values[3], "meta.model dim"));
  ckpt.model.layers = static_cast<int>(as_int(mm.values[4], "meta.model layers"));
  ckpt.model.heads = static_cast<int>(as_int(mm.values[5], "meta.model heads"));
  ckpt.model.mlp_ratio = static_cast<int>(as_int(mm.values[6], "meta.model mlp_ratio"));
  ckpt.model.validate();

  const RawRecord& ml = pick(records, "meta.layout", 5);
  ckpt.layout.t = static_cast<int>(as_int(ml.values[0], "meta.layout t"));
  ckpt.layout.grid_rows = static_cast<int>(as_int(ml.values[1], "meta.layout grid_rows"));
  ckpt.layout.grid_cols = static_cast<int>(as_int(ml.values[2], "meta.layout grid_cols"));
  ckpt.layout.frame_tok_rows =
      static_cast<int>(as_int(ml.values[3], "meta.layout frame_tok_rows"));
  ckpt.layout.frame_tok_cols =
      static_cast<int>(as_int(ml.values[4], "meta.layout frame_tok_cols"));
  ckpt.layout.validate();

  const int64_t order = as_int(pick(records, "meta.order", 1).values[0], "meta.order");
  if (order != 0 && order != 1)
    throw FormatError("checkpoint: meta.order is " + std::to_string(order));
  ckpt.order = order == 0 ? TokenOrder::kGrid : TokenOrder::kFrame;

  ckpt.adam_step = static_cast<uint64_t>(
      as_int(pick(records, "adam.step", 1).values[0], "adam.step"));
  const RawRecord& rm = pick(records, "rng.master", 2);
  ckpt.master_seed = static_cast<uint64_t>(as_int(rm.values[0], "rng.master lo")) |
                     (static_cast<uint64_t>(as_int(rm.values[1], "rng.master hi")) << 32);

  size_t used = 5;
  for (const ParamSpec& spec : param_specs(ckpt.model)) {
    size_t expect = 1;
    for (int d : spec.dims) expect *= static_cast<size_t>(d);
    const RawRecord& rec = pick(records, spec.name, expect);
    if (rec.dims != spec.dims)
      throw FormatError("checkpoint: tensor " + spec.name + " has unexpected dims");
    ckpt.params.add(spec.name, Tensor::from_data(spec.dims, rec.values, true));
    ckpt.adam_m.push_back(pick(records, "adam.m." + spec.name, expect).values);
    ckpt.adam_v.push_back(pick(records, "adam.v." + spec.name, expect).values);
    used += 3;
  }
  if (used != records.size())
    throw FormatError("checkpoint: " + path + " carries " +
                      std::to_string(records.size() - used) + " unexpected tensors");
  return ckpt;
}

namespace {

Checkpoint snapshot(const TrainConfig& cfg, const ParamStore& params, AdamW& opt,
                    uint64_t step) {
  Checkpoint ckpt;
  ckpt.version = kCheckpointVersion;
  ckpt.config_hash = cfg.config_hash();
  ckpt.step = step;
  ckpt.model = cfg.model;
  ckpt.layout = cfg.layout;
  ckpt.order = cfg.order;
  for (const std::string& name : params.names())
    ckpt.params.add(name, params.at(name));
  ckpt.adam_step = opt.step_count();
  for (size_t i = 0; i < opt.param_count(); ++i) {
    ckpt.adam_m.push_back(opt.moment1(i));
    ckpt.adam_v.push_back(opt.moment2(i));
  }
  ckpt.master_seed = cfg.seed;
  return ckpt;
}

std::string ckpt_path(const std::string& dir, uint64_t step) {
  char name[32];
  std::snprintf(name, sizeof name, "ckpt_%06llu.ckpt",
                static_cast<unsigned long long>(step));
  return dir + "/" + name;
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const TokenDataset& data,
                  const std::string& resume_from) {
  cfg.validate();
  if (data.ids.empty()) throw DomainError("train: dataset is empty");
  if (data.vocab != cfg.model.vocab)
    throw IncompatibilityError("train: dataset vocab " + std::to_string(data.vocab) +
                               " vs model.vocab " + std::to_string(cfg.model.vocab));
  for (size_t i = 0; i < data.ids.size(); ++i) {
    if (static_cast<int>(data.ids[i].size()) != cfg.model.seq_len)
      throw IncompatibilityError("train: clip " + std::to_string(i) + " has " +
                                 std::to_string(data.ids[i].size()) +
                                 " tokens, model.seq_len is " +
                                 std::to_string(cfg.model.seq_len));
    if (data.labels[i] < 0 || data.labels[i] >= cfg.model.num_classes)
      throw IncompatibilityError("train: clip " + std::to_string(i) + " label " +
                                 std::to_string(data.labels[i]) +
                                 " outside model.num_classes " +
                                 std::to_string(cfg.model.num_classes));
  }

  ParamStore params;
  uint64_t start_step = 0;
  AdamW::Config oc{cfg.lr, cfg.beta1, cfg.beta2, cfg.eps, cfg.weight_decay};
  std::vector<std::vector<double>> resume_m, resume_v;
  uint64_t resume_adam_step = 0;
  if (resume_from.empty()) {
    params = init_params(cfg.model, cfg.seed);
  } else {
    Checkpoint ckpt = load_checkpoint(resume_from);
    if (!(ckpt.model == cfg.model))
      throw IncompatibilityError(
          "train: checkpoint model config differs from the requested config");
    if (!(ckpt.layout == cfg.layout) || ckpt.order != cfg.order)
      throw IncompatibilityError(
          "train: checkpoint token layout differs from the requested layout");
    if (ckpt.config_hash != cfg.config_hash())
      throw IncompatibilityError(
          "train: checkpoint config hash " + std::to_string(ckpt.config_hash) +
          " vs requested " + std::to_string(cfg.config_hash()));
    params = ckpt.params;
    start_step = ckpt.step;
    resume_m = std::move(ckpt.adam_m);
    resume_v = std::move(ckpt.adam_v);
    resume_adam_step = ckpt.adam_step;
  }

  AdamW opt(params.tensors(), oc);
  if (!resume_from.empty()) {
    opt.set_step_count(resume_adam_step);
    for (size_t i = 0; i < opt.param_count(); ++i) {
      opt.moment1(i) = resume_m[i];
      opt.moment2(i) = resume_v[i];
    }
  }

  std::filesystem::create_directories(cfg.out_dir);
  TrainResult result;
  result.steps_done = start_step;
  result.log_path = cfg.out_dir + "/train_log.tsv";
  std::ofstream log(result.log_path, std::ios::app);
  if (!log) throw IoError("train: cannot open " + result.log_path);

  const Tensor tok_emb = params.at("tok_emb");
  for (uint64_t step = start_step + 1; step <= static_cast<uint64_t>(cfg.steps); ++step) {
    const auto t0 = std::chrono::steady_clock::now();
    opt.zero_grad();
    Rng batch_rng = make_rng(derive_seed(cfg.seed, rng_stream::kBatch, step));
    std::uniform_int_distribution<size_t> pick_clip(0, data.ids.size() - 1);
    double loss_sum = 0.0, mask_sum = 0.0;
    for (int slot = 0; slot < cfg.batch_size; ++slot) {
      const size_t idx = pick_clip(batch_rng);
      const uint64_t mask_seed =
          derive_seed(derive_seed(cfg.seed, rng_stream::kMask, step), slot);
      MaskPlan plan = make_mask_plan(embedding_lookup(tok_emb, data.ids[idx]), cfg.h,
                                     cfg.p_max, mask_seed);
      Tape tape;
      ForwardResult fwd =
          forward_train(cfg.model, params, data.labels[idx], data.ids[idx], &plan);
      loss_sum += fwd.loss.item();
      mask_sum += plan.masked_fraction();
      tape.run_backward(scale(fwd.loss, 1.0 / cfg.batch_size));
    }
    opt.step();
    const auto wall = std::chrono::duration_cast<std::chrono::milliseconds>(
                          std::chrono::steady_clock::now() - t0)
                          .count();

    result.final_loss = loss_sum / cfg.batch_size;
    char line[128];
    std::snprintf(line, sizeof line, "%llu\t%.17g\t%.17g\t%lld\n",
                  static_cast<unsigned long long>(step), result.final_loss,
                  mask_sum / cfg.batch_size, static_cast<long long>(wall));
    log << line;
    log.flush();
    result.steps_done = step;

    if (cfg.ckpt_every > 0 && step % static_cast<uint64_t>(cfg.ckpt_every) == 0 &&
        step != static_cast<uint64_t>(cfg.steps))
      save_checkpoint(snapshot(cfg, params, opt, step), ckpt_path(cfg.out_dir, step));
  }

  result.checkpoint_path = cfg.out_dir + "/model.ckpt";
  save_checkpoint(snapshot(cfg, params, opt, result.steps_done),
                  result.checkpoint_path);
  return result;
}

}  // namespace gfv
