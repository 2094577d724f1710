#include "footgan/training.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "footgan/checkpoint.hpp"
#include "footgan/error.hpp"
#include "footgan/losses.hpp"

namespace footgan {
namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(Regime r) { return r == Regime::wgan_gp ? "wgan_gp" : "lsgan_fm"; }

Regime regime_from_string(std::string_view s) {
  if (s == "wgan_gp") return Regime::wgan_gp;
  if (s == "lsgan_fm") return Regime::lsgan_fm;
  throw Error(Errc::InvalidConfig, "unknown regime '" + std::string(s) + "'");
}

std::string_view to_string(OptimizerKind k) { return k == OptimizerKind::adam ? "adam" : "adamw"; }

OptimizerKind optimizer_from_string(std::string_view s) {
  if (s == "adam") return OptimizerKind::adam;
  if (s == "adamw") return OptimizerKind::adamw;
  throw Error(Errc::InvalidConfig, "unknown optimizer '" + std::string(s) + "'");
}

TrainingConfig TrainingConfig::defaults(Regime regime) {
  TrainingConfig c;
  c.regime = regime;
  if (regime == Regime::wgan_gp) {
    c.d_steps_per_g_step = 5;
    c.optimizer = OptimizerKind::adam;
    c.betas = {0.5, 0.9};
    c.weight_decay = 0.0;
  } else {
    c.d_steps_per_g_step = 1;
    c.optimizer = OptimizerKind::adamw;
    c.betas = {0.8, 0.99};
    c.weight_decay = 0.01;
  }
  return c;
}

void TrainingConfig::validate() const {
  auto fail = [](const std::string& m) { throw Error(Errc::InvalidConfig, "training: " + m); };
  if (total_batches < 1) fail("total_batches must be positive");
  if (batch_size < 1) fail("batch_size must be positive");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) fail("learning_rate must be finite and >= 0");
  if (d_steps_per_g_step < 1) fail("d_steps_per_g_step must be positive");
  if (regime == Regime::lsgan_fm && d_steps_per_g_step != 1) fail("lsgan_fm alternates 1:1 updates");
  if (gp_lambda < 0.0 || lambda_fm < 0.0) fail("loss weights must be >= 0");
  if (checkpoint_every < 1) fail("checkpoint_every must be positive");
  if (regime == Regime::wgan_gp && optimizer != OptimizerKind::adam) fail("wgan_gp is paired with adam");
  if (regime == Regime::lsgan_fm && optimizer != OptimizerKind::adamw) fail("lsgan_fm is paired with adamw");
  const auto [b1, b2] = betas;
  if (b1 < 0.0 || b1 >= 1.0 || b2 < 0.0 || b2 >= 1.0) fail("betas must lie in [0, 1)");
  generator.validate();
  if (regime == Regime::wgan_gp) {
    wave_disc.validate();
    if (wave_disc.input_len != generator.output_len()) fail("critic input_len must equal generator output_len");
    if (wave_disc.num_classes != generator.num_classes) fail("critic and generator class counts differ");
  } else {
    hifi_disc.validate();
    if (hifi_disc.num_classes != generator.num_classes) fail("critic and generator class counts differ");
  }
}

void to_json(json& j, const TrainingConfig& c) {
  j = {{"regime", std::string(to_string(c.regime))},
       {"total_batches", c.total_batches},
       {"batch_size", c.batch_size},
       {"learning_rate", c.learning_rate},
       {"d_steps_per_g_step", c.d_steps_per_g_step},
       {"gp_lambda", c.gp_lambda},
       {"lambda_fm", c.lambda_fm},
       {"optimizer", std::string(to_string(c.optimizer))},
       {"betas", {c.betas.first, c.betas.second}},
       {"weight_decay", c.weight_decay},
       {"seed", c.seed},
       {"checkpoint_every", c.checkpoint_every},
       {"generator", c.generator},
       {"wave_disc", c.wave_disc},
       {"hifi_disc", c.hifi_disc}};
}

void from_json(const json& j, TrainingConfig& c) {
  const Regime regime = regime_from_string(j.value("regime", std::string("lsgan_fm")));
  const TrainingConfig d = TrainingConfig::defaults(regime);
  c = d;
  c.total_batches = j.value("total_batches", d.total_batches);
  c.batch_size = j.value("batch_size", d.batch_size);
  c.learning_rate = j.value("learning_rate", d.learning_rate);
  c.d_steps_per_g_step = j.value("d_steps_per_g_step", d.d_steps_per_g_step);
  c.gp_lambda = j.value("gp_lambda", d.gp_lambda);
  c.lambda_fm = j.value("lambda_fm", d.lambda_fm);
  c.optimizer = optimizer_from_string(j.value("optimizer", std::string(to_string(d.optimizer))));
  if (j.contains("betas")) c.betas = {j.at("betas").at(0).get<double>(), j.at("betas").at(1).get<double>()};
  c.weight_decay = j.value("weight_decay", d.weight_decay);
  c.seed = j.value("seed", d.seed);
  c.checkpoint_every = j.value("checkpoint_every", d.checkpoint_every);
  if (j.contains("generator")) c.generator = j.at("generator").get<GeneratorConfig>();
  if (j.contains("wave_disc")) c.wave_disc = j.at("wave_disc").get<WaveDiscConfig>();
  if (j.contains("hifi_disc")) c.hifi_disc = j.at("hifi_disc").get<HiFiDiscConfig>();
}

double LossReport::component(const std::string& name) const {
  auto it = components.find(name);
  return it == components.end() ? 0.0 : it->second;
}

bool LossReport::all_finite() const {
  if (!std::isfinite(l_g) || !std::isfinite(l_d)) return false;
  for (const auto& [_, v] : components) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

// ---- sampling ---------------------------------------------------------------

BatchSampler::BatchSampler(const LabeledDataset& dataset, int num_classes) : num_classes_(num_classes) {
  if (dataset.clips.empty()) throw Error(Errc::EmptyDataset, "no clips to sample from");
  const auto len = static_cast<int64_t>(dataset.clips.front().size());
  audio_ = torch::empty({static_cast<int64_t>(dataset.size()), len});
  by_class_.resize(static_cast<size_t>(num_classes));
  for (size_t i = 0; i < dataset.size(); ++i) {
    const auto& clip = dataset.clips[i];
    if (static_cast<int64_t>(clip.size()) != len) throw Error(Errc::ShapeMismatch, "clips differ in length");
    if (!clip.label || *clip.label < 0 || *clip.label >= num_classes) {
      throw Error(Errc::InvalidClass, "clip " + std::to_string(i) + " has no valid label");
    }
    std::memcpy(audio_[static_cast<int64_t>(i)].data_ptr<float>(), clip.samples.data(), sizeof(float) * clip.size());
    by_class_[static_cast<size_t>(*clip.label)].push_back(static_cast<int64_t>(i));
  }
  for (int c = 0; c < num_classes; ++c) {
    if (!by_class_[static_cast<size_t>(c)].empty()) present_.push_back(c);
  }
}

std::vector<int> BatchSampler::sample_classes(int batch_size, Rng& rng) const {
  std::uniform_int_distribution<size_t> pick(0, present_.size() - 1);
  std::vector<int> ids(static_cast<size_t>(batch_size));
  for (auto& id : ids) id = present_[pick(rng)];
  return ids;
}

RealBatch BatchSampler::sample(int batch_size, Rng& rng) const {
  RealBatch batch;
  batch.class_ids = sample_classes(batch_size, rng);
  std::vector<int64_t> rows;
  rows.reserve(batch.class_ids.size());
  for (int c : batch.class_ids) {
    const auto& pool = by_class_[static_cast<size_t>(c)];
    std::uniform_int_distribution<size_t> pick(0, pool.size() - 1);
    rows.push_back(pool[pick(rng)]);
  }
  batch.audio = audio_.index_select(0, torch::tensor(rows, torch::kLong)).unsqueeze(1);
  batch.labels = one_hot(batch.class_ids, num_classes_);
  return batch;
}

// ---- model state -------------------------------------------------------------

namespace {

std::unique_ptr<torch::optim::Optimizer> make_optimizer(const std::vector<torch::Tensor>& params,
                                                        const TrainingConfig& cfg) {
  if (cfg.optimizer == OptimizerKind::adam) {
    return std::make_unique<torch::optim::Adam>(
        params, torch::optim::AdamOptions(cfg.learning_rate).betas({cfg.betas.first, cfg.betas.second}));
  }
  return std::make_unique<torch::optim::AdamW>(
      params, torch::optim::AdamWOptions(cfg.learning_rate)
                  .betas({cfg.betas.first, cfg.betas.second})
                  .weight_decay(cfg.weight_decay));
}

void set_requires_grad(torch::nn::Module& m, bool on) {
  for (auto& p : m.parameters()) p.requires_grad_(on);
}

// Critic parameters are frozen while the generator loss is back-propagated.
class FrozenParameters {
 public:
  explicit FrozenParameters(torch::nn::Module& m) : m_(m) { set_requires_grad(m_, false); }
  ~FrozenParameters() { set_requires_grad(m_, true); }
  FrozenParameters(const FrozenParameters&) = delete;
  FrozenParameters& operator=(const FrozenParameters&) = delete;

 private:
  torch::nn::Module& m_;
};

void require_finite(const torch::Tensor& loss, const char* what) {
  if (!std::isfinite(loss.item<double>())) {
    throw Error(Errc::NonFiniteLoss, std::string(what) + " is not finite");
  }
}

}  // namespace

GanState GanState::create(const TrainingConfig& cfg) {
  cfg.validate();
  torch::manual_seed(cfg.seed);
  GanState s;
  s.regime = cfg.regime;
  s.generator = WaveGanGenerator(cfg.generator);
  s.generator_opt = make_optimizer(s.generator->parameters(), cfg);
  if (cfg.regime == Regime::wgan_gp) {
    s.wave_critic = WaveGanDiscriminator(cfg.wave_disc);
    s.critic_opt = make_optimizer(s.wave_critic->parameters(), cfg);
  } else {
    s.hifi_critic = HiFiDiscriminator(cfg.hifi_disc);
    s.critic_opt = make_optimizer(s.hifi_critic->parameters(), cfg);
  }
  return s;
}

torch::nn::Module& GanState::critic() {
  if (regime == Regime::wgan_gp) return *wave_critic;
  return *hifi_critic;
}

LossReport wgan_gp_step(GanState& s, const BatchSampler& sampler, const TrainingConfig& cfg, Rng& rng) {
  if (cfg.regime != Regime::wgan_gp || !s.wave_critic) {
    throw Error(Errc::InvalidConfig, "wgan_gp_step requires the wgan_gp regime");
  }
  auto& G = s.generator;
  auto& D = s.wave_critic;
  G->train();
  D->train();
  const int num_classes = cfg.generator.num_classes;
  auto augment = [&](const torch::Tensor& audio, const torch::Tensor& labels) {
    auto x = as_mono_channel(audio);
    return num_classes > 0 ? condition_inject(x, labels) : x;
  };

  LossReport report;
  double adv_d = 0.0, gp_value = 0.0;
  for (int i = 0; i < cfg.d_steps_per_g_step; ++i) {
    const RealBatch real = sampler.sample(cfg.batch_size, rng);
    torch::Tensor fake;
    {
      torch::NoGradGuard no_grad;
      fake = G->forward(sample_latent(cfg.batch_size, cfg.generator.d_z, rng), real.labels);
    }
    const auto real_in = augment(real.audio, real.labels);
    const auto fake_in = augment(fake, real.labels);
    power_iteration(*D);
    auto d_real = D->forward(real_in, &rng).mean().to(torch::kDouble);
    auto d_fake = D->forward(fake_in, &rng).mean().to(torch::kDouble);
    auto gp = gradient_penalty([&](const torch::Tensor& x) { return D->forward(x, &rng); }, real_in, fake_in, rng)
                  .to(torch::kDouble);
    auto adv = d_fake - d_real;
    auto loss = adv + cfg.gp_lambda * gp;
    require_finite(loss, "critic loss");
    s.critic_opt->zero_grad();
    loss.backward();
    s.critic_opt->step();
    ++s.counters.critic_updates;
    adv_d = adv.item<double>();
    gp_value = gp.item<double>();
  }

  const auto labels = one_hot(sampler.sample_classes(cfg.batch_size, rng), num_classes);
  const auto z = sample_latent(cfg.batch_size, cfg.generator.d_z, rng);
  torch::Tensor adv_g;
  {
    FrozenParameters frozen(*D);
    auto fake = G->forward(z, labels);
    adv_g = -D->forward(augment(fake, labels), &rng).mean().to(torch::kDouble);
    require_finite(adv_g, "generator loss");
    s.generator_opt->zero_grad();
    adv_g.backward();
  }
  s.generator_opt->step();
  ++s.counters.generator_updates;

  report.components = {{"adv_g", adv_g.item<double>()}, {"adv_d", adv_d}, {"gp", gp_value}};
  report.l_g = report.components["adv_g"];
  report.l_d = adv_d + cfg.gp_lambda * gp_value;
  return report;
}

LossReport hifi_wavegan_step(GanState& s, const BatchSampler& sampler, const TrainingConfig& cfg, Rng& rng) {
  if (cfg.regime != Regime::lsgan_fm || !s.hifi_critic) {
    throw Error(Errc::InvalidConfig, "hifi_wavegan_step requires the lsgan_fm regime");
  }
  auto& G = s.generator;
  auto& D = s.hifi_critic;
  G->train();
  D->train();

  const RealBatch real = sampler.sample(cfg.batch_size, rng);
  const auto z = sample_latent(cfg.batch_size, cfg.generator.d_z, rng);
  const auto fake = G->forward(z, real.labels);

  // critic update
  power_iteration(*D);
  auto out_real = D->forward(real.audio, real.labels);
  auto out_fake = D->forward(fake.detach(), real.labels);
  auto loss_d = lsgan_d_loss(out_real.scores, out_fake.scores);
  require_finite(loss_d, "critic loss");
  s.critic_opt->zero_grad();
  loss_d.backward();
  s.critic_opt->step();
  ++s.counters.critic_updates;

  // generator update
  torch::Tensor adv_g, fm, loss_g;
  {
    FrozenParameters frozen(*D);
    CriticOutput ref;
    {
      torch::NoGradGuard no_grad;
      ref = D->forward(real.audio, real.labels);
    }
    auto gen = D->forward(fake, real.labels);
    adv_g = lsgan_g_loss(gen.scores);
    fm = feature_matching_loss(ref, gen);
    loss_g = adv_g + cfg.lambda_fm * fm;
    require_finite(loss_g, "generator loss");
    s.generator_opt->zero_grad();
    loss_g.backward();
  }
  s.generator_opt->step();
  ++s.counters.generator_updates;

  LossReport report;
  report.components = {{"adv_g", adv_g.item<double>()}, {"adv_d", loss_d.item<double>()}, {"fm", fm.item<double>()}};
  report.l_g = loss_g.item<double>();
  report.l_d = loss_d.item<double>();
  return report;
}

// ---- trainer -------------------------------------------------------------------

Trainer::Trainer(TrainingConfig cfg, const LabeledDataset& dataset)
    : cfg_(std::move(cfg)),
      sampler_(dataset, cfg_.generator.num_classes > 0 ? cfg_.generator.num_classes : kNumSurfaceClasses),
      state_(GanState::create(cfg_)),
      rng_(cfg_.seed) {
  if (!dataset.clips.empty() && static_cast<int64_t>(dataset.clips.front().size()) != cfg_.generator.output_len()) {
    throw Error(Errc::ShapeMismatch, "dataset clip length differs from generator output_len");
  }
}

LossReport Trainer::step() {
  LossReport r = cfg_.regime == Regime::wgan_gp ? wgan_gp_step(state_, sampler_, cfg_, rng_)
                                                : hifi_wavegan_step(state_, sampler_, cfg_, rng_);
  r.step = ++step_;
  if (!r.all_finite()) throw Error(Errc::NonFiniteLoss, "non-finite loss at step " + std::to_string(r.step));
  return r;
}

namespace {
void save_optimizer(torch::optim::Optimizer& opt, const fs::path& path) {
  try {
    torch::serialize::OutputArchive archive;
    opt.save(archive);
    archive.save_to(path.string());
  } catch (const c10::Error& e) {
    throw Error(Errc::DiskFull, "saving " + path.string() + ": " + e.what_without_backtrace());
  }
}
void load_optimizer(torch::optim::Optimizer& opt, const fs::path& path) {
  try {
    torch::serialize::InputArchive archive;
    archive.load_from(path.string());
    opt.load(archive);
  } catch (const c10::Error& e) {
    throw Error(Errc::IncompatibleCheckpoint, "loading " + path.string() + ": " + e.what_without_backtrace());
  }
}
const char* critic_kind(Regime r) { return r == Regime::wgan_gp ? "wavegan_critic" : "hifi_critic"; }
}  // namespace

void Trainer::save_checkpoint(const fs::path& dir) const {
  fs::create_directories(dir);
  auto& st = const_cast<GanState&>(state_);
  save_generator(st.generator, dir / "generator.pt", step_);
  json critic_cfg = cfg_.regime == Regime::wgan_gp ? json(cfg_.wave_disc) : json(cfg_.hifi_disc);
  save_module(st.critic(), dir / (std::string(critic_kind(cfg_.regime)) + ".pt"),
              module_manifest(critic_kind(cfg_.regime), critic_cfg, step_, surface_class_names()));
  save_optimizer(*st.generator_opt, dir / "generator_opt.pt");
  save_optimizer(*st.critic_opt, dir / "critic_opt.pt");
  std::ostringstream rng_state;
  rng_state << rng_;
  write_json_file(dir / "trainer_state.json", {{"format_version", kCheckpointFormatVersion},
                                               {"step", step_},
                                               {"critic_updates", state_.counters.critic_updates},
                                               {"generator_updates", state_.counters.generator_updates},
                                               {"rng", rng_state.str()},
                                               {"config", cfg_}});
}

void Trainer::load_checkpoint(const fs::path& dir) {
  const json st = read_json_file(dir / "trainer_state.json");
  if (st.value("format_version", -1) != kCheckpointFormatVersion) {
    throw Error(Errc::IncompatibleCheckpoint, "unsupported trainer state version");
  }
  // Run length and checkpoint cadence may change between resumes.
  auto trajectory = [](json j) {
    j.erase("total_batches");
    j.erase("checkpoint_every");
    return j;
  };
  if (trajectory(json(cfg_)) != trajectory(st.at("config"))) {
    throw Error(Errc::IncompatibleCheckpoint, "checkpoint was written with a different training config");
  }
  read_manifest(dir / "generator.pt", "generator");
  read_manifest(dir / (std::string(critic_kind(cfg_.regime)) + ".pt"), critic_kind(cfg_.regime));
  load_module(*state_.generator, dir / "generator.pt");
  load_module(state_.critic(), dir / (std::string(critic_kind(cfg_.regime)) + ".pt"));
  load_optimizer(*state_.generator_opt, dir / "generator_opt.pt");
  load_optimizer(*state_.critic_opt, dir / "critic_opt.pt");
  step_ = st.at("step").get<int64_t>();
  state_.counters.critic_updates = st.at("critic_updates").get<int64_t>();
  state_.counters.generator_updates = st.at("generator_updates").get<int64_t>();
  std::istringstream rng_state(st.at("rng").get<std::string>());
  rng_state >> rng_;
}

// ---- loss log ---------------------------------------------------------------------

std::string format_loss_row(const LossReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%lld,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g", static_cast<long long>(r.step), r.l_g,
                r.l_d, r.component("adv_g"), r.component("adv_d"), r.component("gp"), r.component("fm"));
  return buf;
}

std::vector<LossReport> read_loss_log(const fs::path& csv) {
  std::ifstream in(csv);
  if (!in) throw Error(Errc::UnreadableFile, "cannot open " + csv.string());
  std::string line;
  std::getline(in, line);
  if (line != kLossLogHeader) throw Error(Errc::UnreadableFile, csv.string() + ": unexpected header");
  std::vector<LossReport> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string cell;
    std::vector<double> v;
    while (std::getline(ss, cell, ',')) v.push_back(std::stod(cell));
    if (v.size() != 7) throw Error(Errc::UnreadableFile, csv.string() + ": malformed row");
    LossReport r;
    r.step = static_cast<int64_t>(v[0]);
    r.l_g = v[1];
    r.l_d = v[2];
    r.components = {{"adv_g", v[3]}, {"adv_d", v[4]}, {"gp", v[5]}, {"fm", v[6]}};
    rows.push_back(std::move(r));
  }
  return rows;
}

TrainResult train(const LabeledDataset& dataset, const TrainingConfig& cfg, const fs::path& out_dir,
                  const TrainOptions& opts) {
  cfg.validate();
  fs::create_directories(out_dir / "checkpoints");
  Trainer trainer(cfg, dataset);
  TrainResult result;
  result.loss_log = out_dir / "loss_log.csv";

  std::vector<std::string> kept_rows;
  if (opts.resume && fs::exists(out_dir / "latest.txt")) {
    std::ifstream latest(out_dir / "latest.txt");
    std::string name;
    std::getline(latest, name);
    trainer.load_checkpoint(out_dir / "checkpoints" / name);
    if (fs::exists(result.loss_log)) {
      for (const auto& r : read_loss_log(result.loss_log)) {
        if (r.step <= trainer.step_count()) kept_rows.push_back(format_loss_row(r));
      }
    }
  }
  write_json_file(out_dir / "config.json", cfg);

  std::ofstream log(result.loss_log, std::ios::trunc);
  if (!log) throw Error(Errc::DiskFull, "cannot open " + result.loss_log.string());
  log << kLossLogHeader << '\n';
  for (const auto& row : kept_rows) log << row << '\n';

  auto checkpoint = [&]() {
    const std::string name = "step_" + std::to_string(trainer.step_count());
    const fs::path dir = out_dir / "checkpoints" / name;
    trainer.save_checkpoint(dir);
    std::ofstream latest(out_dir / "latest.txt", std::ios::trunc);
    latest << name << '\n';
    if (!latest) throw Error(Errc::DiskFull, "cannot update latest.txt");
    result.checkpoints.push_back(dir);
    if (opts.on_checkpoint) opts.on_checkpoint(trainer.step_count(), dir);
    return dir;
  };

  fs::path last;
  while (trainer.step_count() < cfg.total_batches) {
    const LossReport r = trainer.step();
    log << format_loss_row(r) << '\n';
    if (!log) throw Error(Errc::DiskFull, "short write to " + result.loss_log.string());
    if (opts.on_step) opts.on_step(r);
    if (r.step % cfg.checkpoint_every == 0) {
      log.flush();
      last = checkpoint();
    }
  }
  log.flush();
  if (last.empty() || last.filename() != "step_" + std::to_string(trainer.step_count())) last = checkpoint();
  result.final_checkpoint = last;
  result.counters = trainer.counters();
  return result;
}

}  // namespace footgan
