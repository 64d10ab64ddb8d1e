#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gfv/grid.hpp"
#include "gfv/model.hpp"

namespace gfv {

// In-memory token sequences with labels; the unit the trainer consumes.
struct TokenDataset {
  std::vector<std::vector<int>> ids;  // one sequence per clip, uniform length
  std::vector<int> labels;
  int vocab = 0;

  size_t size() const { return ids.size(); }
};

// Loads every token file named by a manifest; validates that vocab and
// sequence length agree across files and that record labels match the
// manifest rows.
TokenDataset load_token_dataset(const std::string& manifest_path);

struct TrainConfig {
  ModelConfig model;
  TokenLayout layout;
  TokenOrder order = TokenOrder::kGrid;

  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.95;
  double eps = 1e-8;
  double weight_decay = 0.05;
  int batch_size = 8;
  int steps = 2000;
  double p_max = 0.3;  // masking cap; 0 disables masking entirely
  int h = 8;           // masking segment height
  uint64_t seed = 0;
  int ckpt_every = 500;  // 0 disables periodic checkpoints
  std::string out_dir = ".";

  void validate() const;

  // FNV-1a over the semantic fields (model, layout, order, optimizer,
  // batch, masking, seed). Step budget and paths are excluded so a resumed
  // run may extend training without changing identity.
  uint32_t config_hash() const;
};

// Serialized training state: model parameters, optimizer moments and the
// master seed. All randomness is derived statelessly from (seed, step), so
// seed plus step fully determine the generator on resume.
struct Checkpoint {
  uint16_t version = 1;
  uint32_t config_hash = 0;
  uint64_t step = 0;
  ModelConfig model;
  TokenLayout layout;
  TokenOrder order = TokenOrder::kGrid;
  ParamStore params;
  uint64_t adam_step = 0;
  std::vector<std::vector<double>> adam_m;  // aligned with params order
  std::vector<std::vector<double>> adam_v;
  uint64_t master_seed = 0;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

struct TrainResult {
  uint64_t steps_done = 0;
  double final_loss = 0.0;
  std::string log_path;
  std::string checkpoint_path;
};

// Runs the training loop: per step, a seed-derived batch with replacement,
// per-item mask plans on the current input embeddings, per-item backward
// with the loss scaled by 1/batch_size, one optimizer step. Appends
// "step<TAB>loss<TAB>masked_fraction<TAB>wall_ms" to out_dir/train_log.tsv,
// checkpoints every ckpt_every steps and finally to out_dir/model.ckpt.
// `resume_from` names a checkpoint to continue; its version and config hash
// must match or the call fails before touching any state.
TrainResult train(const TrainConfig& cfg, const TokenDataset& data,
                  const std::string& resume_from = "");

}  // namespace gfv
