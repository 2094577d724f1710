#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <torch/torch.h>

#include "footgan/audio.hpp"
#include "footgan/discriminators.hpp"
#include "footgan/generator.hpp"
#include "footgan/signal_ops.hpp"
#include "json.hpp"

namespace footgan {

enum class Regime { wgan_gp, lsgan_fm };
enum class OptimizerKind { adam, adamw };

std::string_view to_string(Regime r);
Regime regime_from_string(std::string_view s);
std::string_view to_string(OptimizerKind k);
OptimizerKind optimizer_from_string(std::string_view s);

struct TrainingConfig {
  Regime regime = Regime::lsgan_fm;
  int64_t total_batches = 120000;
  int batch_size = 16;
  double learning_rate = 1e-4;
  int d_steps_per_g_step = 1;
  double gp_lambda = 10.0;
  double lambda_fm = 2.0;
  OptimizerKind optimizer = OptimizerKind::adamw;
  std::pair<double, double> betas{0.8, 0.99};
  double weight_decay = 0.01;  // AdamW only
  uint64_t seed = 0;
  int64_t checkpoint_every = 5000;

  GeneratorConfig generator;
  WaveDiscConfig wave_disc;
  HiFiDiscConfig hifi_disc = HiFiDiscConfig::compact();

  /// WGAN-GP: Adam (0.5, 0.9), 5 critic updates per generator update.
  /// LS-GAN + FM: AdamW (0.8, 0.99), 1:1 updates.
  static TrainingConfig defaults(Regime regime);

  /// Throws InvalidConfig; also rejects regime/optimizer pairings other
  /// than adam+wgan_gp and adamw+lsgan_fm.
  void validate() const;
};

void to_json(nlohmann::json& j, const TrainingConfig& c);
/// Missing keys fall back to TrainingConfig::defaults(regime).
void from_json(const nlohmann::json& j, TrainingConfig& c);

struct LossReport {
  int64_t step = 0;
  double l_g = 0.0;
  double l_d = 0.0;
  std::map<std::string, double> components;

  double component(const std::string& name) const;
  bool all_finite() const;
};

struct UpdateCounters {
  int64_t critic_updates = 0;
  int64_t generator_updates = 0;
};

struct RealBatch {
  torch::Tensor audio;   // (B, 1, L)
  torch::Tensor labels;  // (B, 7) one-hot
  std::vector<int> class_ids;
};

/// Draws real clips with replacement: a class uniformly among those present,
/// then a clip uniformly within that class.
class BatchSampler {
 public:
  explicit BatchSampler(const LabeledDataset& dataset, int num_classes = kNumSurfaceClasses);
  RealBatch sample(int batch_size, Rng& rng) const;
  /// Labels only, drawn uniformly over the classes present.
  std::vector<int> sample_classes(int batch_size, Rng& rng) const;

 private:
  torch::Tensor audio_;  // (N, L)
  std::vector<std::vector<int64_t>> by_class_;
  std::vector<int> present_;
  int num_classes_;
};

/// Model and optimizer state for one training run.
struct GanState {
  Regime regime;
  WaveGanGenerator generator{nullptr};
  WaveGanDiscriminator wave_critic{nullptr};
  HiFiDiscriminator hifi_critic{nullptr};
  std::unique_ptr<torch::optim::Optimizer> generator_opt;
  std::unique_ptr<torch::optim::Optimizer> critic_opt;
  UpdateCounters counters;

  /// Seeds torch with cfg.seed, builds modules and optimizers.
  static GanState create(const TrainingConfig& cfg);
  torch::nn::Module& critic();
};

/// cfg.d_steps_per_g_step critic updates on E[D(fake)] - E[D(real)] + lambda * GP,
/// then a generator update on -E[D(fake)]. Throws NonFiniteLoss before any
/// optimizer step if a loss is not finite.
LossReport wgan_gp_step(GanState& state, const BatchSampler& sampler, const TrainingConfig& cfg, Rng& rng);

/// One critic update on the summed least-squares loss of all sub-critics,
/// then one generator update on adv + lambda_fm * feature matching.
LossReport hifi_wavegan_step(GanState& state, const BatchSampler& sampler, const TrainingConfig& cfg, Rng& rng);

class Trainer {
 public:
  Trainer(TrainingConfig cfg, const LabeledDataset& dataset);

  LossReport step();

  int64_t step_count() const { return step_; }
  const UpdateCounters& counters() const { return state_.counters; }
  const TrainingConfig& config() const { return cfg_; }
  GanState& state() { return state_; }
  WaveGanGenerator& generator() { return state_.generator; }
  void reseed(uint64_t seed) { rng_.seed(seed); }

  /// Writes generator, critic, optimizer and trainer state into `dir`.
  void save_checkpoint(const std::filesystem::path& dir) const;
  /// Restores a checkpoint written by save_checkpoint. The config must match
  /// except for total_batches and checkpoint_every.
  void load_checkpoint(const std::filesystem::path& dir);

 private:
  TrainingConfig cfg_;
  BatchSampler sampler_;
  GanState state_;
  Rng rng_;
  int64_t step_ = 0;
};

inline constexpr const char* kLossLogHeader = "step,L_G,L_D,adv_g,adv_d,gp,fm";
std::string format_loss_row(const LossReport& r);
std::vector<LossReport> read_loss_log(const std::filesystem::path& csv);

struct TrainOptions {
  bool resume = false;
  std::function<void(const LossReport&)> on_step;
  std::function<void(int64_t step, const std::filesystem::path& checkpoint_dir)> on_checkpoint;
};

struct TrainResult {
  std::filesystem::path final_checkpoint;
  std::filesystem::path loss_log;
  std::vector<std::filesystem::path> checkpoints;
  UpdateCounters counters;
};

/// Runs the configured regime for total_batches engine steps. Layout of
/// out_dir: loss_log.csv, config.json, checkpoints/step_<N>/, latest.txt.
/// With resume=true, continues from the checkpoint named in latest.txt.
TrainResult train(const LabeledDataset& dataset, const TrainingConfig& cfg, const std::filesystem::path& out_dir,
                  const TrainOptions& opts = {});

}  // namespace footgan
