// footgan: data preparation, training, generation, evaluation, stimuli and
// listening-test analysis from the command line.

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "footgan/checkpoint.hpp"
#include "footgan/classifier.hpp"
#include "footgan/dataset.hpp"
#include "footgan/error.hpp"
#include "footgan/evaluate.hpp"
#include "footgan/ratings.hpp"
#include "footgan/stimuli.hpp"
#include "footgan/training.hpp"
#include "footgan/wav.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace footgan;

namespace {

LabeledDataset load_any_dataset(const fs::path& dir) {
  if (fs::exists(dir / "manifest.json")) return load_prepared_dataset(dir);
  return build_dataset(dir);
}

void write_text(const fs::path& path, const std::string& text) {
  write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

// "name=dir" or plain "dir" (named after its last component).
ClipSet load_clip_set(const std::string& arg, bool generated) {
  ClipSet s;
  fs::path dir = arg;
  if (const auto eq = arg.find('='); eq != std::string::npos) {
    s.name = arg.substr(0, eq);
    dir = arg.substr(eq + 1);
  } else {
    s.name = fs::path(arg).lexically_normal().filename().string();
    if (s.name.empty()) s.name = fs::path(arg).lexically_normal().parent_path().filename().string();
  }
  s.clips = load_clip_pool(dir);
  s.generated = generated;
  if (s.clips.empty()) throw Error(Errc::EmptyDataset, "no WAV files in " + dir.string());
  return s;
}

ResultsServer* g_server = nullptr;
void handle_signal(int) {
  if (g_server != nullptr) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Conditional footstep GAN toolkit"};
  app.require_subcommand(1);

  // prepare
  auto* prep = app.add_subcommand("prepare", "Resample, normalize and align a class-per-folder WAV corpus");
  std::string prep_in, prep_out;
  PrepareOptions prep_opts;
  prep->add_option("--in", prep_in, "Directory with one sub-folder per surface class")->required();
  prep->add_option("--out", prep_out, "Output directory")->required();
  prep->add_option("--onset-threshold", prep_opts.align.onset_threshold, "Onset threshold as a fraction of peak");
  prep->add_option("--target-dbfs", prep_opts.target_dbfs, "Peak level in dBFS");

  // train
  auto* tr = app.add_subcommand("train", "Train a conditional generator");
  std::string tr_data, tr_out, tr_regime = "lsgan_fm", tr_config, tr_norm;
  std::optional<int64_t> tr_batches, tr_every;
  std::optional<int> tr_bs, tr_base;
  std::optional<double> tr_lr;
  std::optional<uint64_t> tr_seed;
  bool tr_resume = false, tr_quiet = false;
  tr->add_option("--data", tr_data, "Prepared dataset directory")->required();
  tr->add_option("--regime", tr_regime, "wgan_gp or lsgan_fm")->check(CLI::IsMember({"wgan_gp", "lsgan_fm"}));
  tr->add_option("--out", tr_out, "Run directory")->required();
  tr->add_option("--config", tr_config, "JSON file with TrainingConfig keys");
  tr->add_option("--batches", tr_batches, "Total training batches");
  tr->add_option("--batch-size", tr_bs, "Batch size");
  tr->add_option("--lr", tr_lr, "Learning rate");
  tr->add_option("--seed", tr_seed, "Random seed");
  tr->add_option("--checkpoint-every", tr_every, "Checkpoint interval in batches");
  tr->add_option("--generator-channels", tr_base, "Channels after the dense layer (c0)");
  tr->add_option("--critic-norm", tr_norm, "Critic conv normalization: none, weight or spectral")
      ->check(CLI::IsMember({"none", "weight", "spectral"}));
  tr->add_flag("--resume", tr_resume, "Continue from the latest checkpoint in --out");
  tr->add_flag("--quiet", tr_quiet, "Only report checkpoints");

  // classifier
  auto* cl = app.add_subcommand("classifier", "Train the 5-class evaluation classifier");
  std::string cl_data, cl_out;
  ClassifierConfig cl_cfg;
  cl->add_option("--data", cl_data, "Prepared dataset directory (surface classes are merged)")->required();
  cl->add_option("--out", cl_out, "Output weight file (.pt)")->required();
  cl->add_option("--epochs", cl_cfg.epochs, "Training epochs");
  cl->add_option("--lr", cl_cfg.learning_rate, "Learning rate");
  cl->add_option("--batch-size", cl_cfg.batch_size, "Batch size");
  cl->add_option("--val-fraction", cl_cfg.val_fraction, "Held-out fraction per class");
  cl->add_option("--seed", cl_cfg.seed, "Random seed");

  // generate
  auto* gen = app.add_subcommand("generate", "Synthesize clips for one class");
  std::string gen_ckpt, gen_class, gen_out;
  int gen_n = 1000;
  uint64_t gen_seed = 0;
  gen->add_option("--ckpt", gen_ckpt, "generator.pt")->required();
  gen->add_option("--class", gen_class, "Surface class name or id")->required();
  gen->add_option("-n", gen_n, "Number of clips");
  gen->add_option("--seed", gen_seed, "Random seed");
  gen->add_option("--out", gen_out, "Output directory")->required();

  // walks
  auto* wk = app.add_subcommand("walks", "Assemble listening-test series of walks");
  std::string wk_map, wk_out;
  int wk_series = 10;
  WalkSpec wk_spec;
  wk->add_option("--conditions", wk_map, "JSON object mapping condition name to clip folder")->required();
  wk->add_option("--series", wk_series, "Number of series");
  wk->add_option("--interval", wk_spec.interval_s, "Seconds between footsteps");
  wk->add_option("--duration", wk_spec.duration_s, "Walk length in seconds");
  wk->add_option("--seed", wk_spec.seed, "Seed of the first series");
  wk->add_option("--out", wk_out, "Output directory")->required();

  // eval
  auto* ev = app.add_subcommand("eval", "Objective metrics over real and generated sets");
  std::vector<std::string> ev_real, ev_gen;
  std::string ev_classifier, ev_out, ev_models;
  EvalConfig ev_cfg;
  std::string ev_fad = to_string(ev_cfg.fad_extractor), ev_kid = to_string(ev_cfg.kid_extractor),
              ev_mmd = to_string(ev_cfg.mmd_extractor), ev_pca = to_string(ev_cfg.pca_extractor);
  ev->add_option("--real", ev_real, "Real clip folders ([name=]dir)")->required();
  ev->add_option("--generated", ev_gen, "Generated clip folders ([name=]dir)");
  ev->add_option("--classifier", ev_classifier, "Classifier weight file")->required();
  ev->add_option("--out", ev_out, "Report JSON path")->required();
  ev->add_option("--model-dir", ev_models, "Folder with TorchScript extractors (default $FOOTGAN_MODEL_DIR)");
  ev->add_option("--is-samples", ev_cfg.is_samples, "Clips per set for the inception score");
  ev->add_option("--fad-extractor", ev_fad, "Embedding for FAD");
  ev->add_option("--kid-extractor", ev_kid, "Embedding for KID");
  ev->add_option("--mmd-extractor", ev_mmd, "Embedding for MMD");
  ev->add_option("--pca-extractor", ev_pca, "Embedding for PCA");

  // analyze
  auto* an = app.add_subcommand("analyze", "Apply exclusion rules and summarize listening-test ratings");
  std::vector<std::string> an_in;
  std::string an_out;
  ExclusionRules an_rules;
  bool an_lenient = false;
  an->add_option("--ratings", an_in, "Ratings files or folders")->required();
  an->add_option("--out", an_out, "Summary JSON path (CSV written beside it)")->required();
  an->add_option("--anchor", an_rules.anchor, "Anchor condition");
  an->add_option("--anchor-max", an_rules.anchor_max, "Exclude pages rating the anchor above this");
  an->add_option("--reference", an_rules.reference, "Reference condition");
  an->add_option("--reference-min", an_rules.reference_min, "Exclude pages rating the reference below this");
  an->add_flag("--require-experience", an_rules.require_experience, "Keep only critical listeners");
  an->add_flag("--lenient", an_lenient, "Skip malformed pages instead of failing");

  // serve
  auto* sv = app.add_subcommand("serve", "Collect ratings via POST /results");
  std::string sv_dir, sv_host = "127.0.0.1", sv_static;
  int sv_port = 8080;
  sv->add_option("--out", sv_dir, "Folder receiving one file per submission")->required();
  sv->add_option("--host", sv_host, "Bind address");
  sv->add_option("--port", sv_port, "Port");
  sv->add_option("--static", sv_static, "Serve this folder at / as well");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*prep) {
      const auto clips = prepare_directory(prep_in, prep_opts);
      write_prepared_dataset(prep_out, clips, prep_opts);
      std::printf("prepared %zu clips into %s\n", clips.size(), prep_out.c_str());
    } else if (*tr) {
      TrainingConfig cfg = TrainingConfig::defaults(regime_from_string(tr_regime));
      if (!tr_config.empty()) {
        json j = read_json_file(tr_config);
        if (!j.contains("regime")) j["regime"] = tr_regime;
        cfg = j.get<TrainingConfig>();
      }
      if (tr_batches) cfg.total_batches = *tr_batches;
      if (tr_bs) cfg.batch_size = *tr_bs;
      if (tr_lr) cfg.learning_rate = *tr_lr;
      if (tr_seed) cfg.seed = *tr_seed;
      if (tr_every) cfg.checkpoint_every = *tr_every;
      if (tr_base) cfg.generator.base_channels = *tr_base;
      if (!tr_norm.empty()) {
        cfg.wave_disc.norm = json(tr_norm).get<CriticNorm>();
        cfg.hifi_disc.norm = cfg.wave_disc.norm;
      }
      const LabeledDataset data = load_any_dataset(tr_data);
      TrainOptions opts;
      opts.resume = tr_resume;
      if (!tr_quiet) {
        opts.on_step = [](const LossReport& r) {
          if (r.step % 50 == 0) std::printf("step %lld  L_G %.5f  L_D %.5f\n", static_cast<long long>(r.step), r.l_g, r.l_d);
        };
      }
      opts.on_checkpoint = [](int64_t step, const fs::path& dir) {
        std::printf("checkpoint %lld -> %s\n", static_cast<long long>(step), dir.c_str());
      };
      const auto result = train(data, cfg, tr_out, opts);
      std::printf("done: %lld generator updates, %lld critic updates\n",
                  static_cast<long long>(result.counters.generator_updates),
                  static_cast<long long>(result.counters.critic_updates));
    } else if (*cl) {
      LabeledDataset data = load_any_dataset(cl_data);
      if (data.num_classes() == static_cast<size_t>(kNumSurfaceClasses)) data = remap_to_eval_classes(data);
      cl_cfg.num_classes = static_cast<int>(data.num_classes());
      const auto model = train_eval_classifier(data, cl_cfg);
      save_classifier(model, cl_out);
      std::printf("validation accuracy %.4f after %d epochs\n", model.validation_accuracy, cl_cfg.epochs);
    } else if (*gen) {
      int id = -1;
      if (auto s = surface_from_name(gen_class)) {
        id = static_cast<int>(*s);
      } else {
        try {
          id = std::stoi(gen_class);
        } catch (const std::exception&) {
          throw Error(Errc::InvalidClass, "unknown class '" + gen_class + "'");
        }
      }
      const auto clips = generate_samples(gen_ckpt, id, gen_n, gen_seed);
      const std::string prefix = id >= 0 && id < kNumSurfaceClasses
                                     ? std::string(surface_name(static_cast<SurfaceClass>(id)))
                                     : gen_class;
      write_clips(clips, gen_out, prefix);
      std::printf("wrote %zu clips to %s\n", clips.size(), gen_out.c_str());
    } else if (*wk) {
      std::map<std::string, fs::path> dirs;
      const fs::path map_file = wk_map;
      for (const auto& [k, v] : read_json_file(map_file).items()) {
        fs::path p = v.get<std::string>();
        dirs[k] = p.is_relative() ? map_file.parent_path() / p : p;
      }
      const auto series = assemble_series_set(dirs, wk_spec, wk_out, wk_series);
      std::printf("wrote %zu series to %s\n", series.size(), wk_out.c_str());
    } else if (*ev) {
      ev_cfg.fad_extractor = extractor_from_string(ev_fad);
      ev_cfg.kid_extractor = extractor_from_string(ev_kid);
      ev_cfg.mmd_extractor = extractor_from_string(ev_mmd);
      ev_cfg.pca_extractor = extractor_from_string(ev_pca);
      ExtractorAssets assets = ExtractorAssets::from_environment();
      if (!ev_models.empty()) assets.model_dir = ev_models;
      const ClassifierModel classifier = load_classifier(ev_classifier);
      std::vector<ClipSet> sets;
      for (const auto& r : ev_real) sets.push_back(load_clip_set(r, false));
      for (const auto& g : ev_gen) sets.push_back(load_clip_set(g, true));
      const auto report = evaluate(sets, classifier, assets, ev_cfg);
      fs::path csv = ev_out;
      csv.replace_extension(".edges.csv");
      report.write(ev_out, csv);
      std::printf("report: %s\nedges: %s\n", ev_out.c_str(), csv.c_str());
    } else if (*an) {
      std::vector<fs::path> inputs(an_in.begin(), an_in.end());
      const auto loaded = load_ratings(inputs, !an_lenient);
      for (const auto& i : loaded.issues) {
        std::fprintf(stderr, "skipped: %s page %d: %s\n", i.source.c_str(), i.page, i.reason.c_str());
      }
      const auto ex = apply_exclusions(loaded.pages, an_rules);
      const auto summary = summarize(ex.retained);
      json out = summary.to_json();
      json log = json::array();
      for (const auto& e : ex.log) log.push_back({{"page_id", e.page_id}, {"rules", e.rules}});
      out["exclusions"] = {{"rules",
                            {{"anchor", an_rules.anchor},
                             {"anchor_max", an_rules.anchor_max},
                             {"reference", an_rules.reference},
                             {"reference_min", an_rules.reference_min},
                             {"require_experience", an_rules.require_experience}}},
                           {"total_pages", loaded.pages.size()},
                           {"retained", ex.retained.size()},
                           {"excluded", ex.excluded.size()},
                           {"rejected_malformed", loaded.rejected_pages},
                           {"log", log}};
      write_json_file(an_out, out);
      fs::path csv = an_out;
      csv.replace_extension(".csv");
      write_text(csv, summary.to_csv());
      std::printf("%zu of %zu pages retained; summary in %s\n", ex.retained.size(), loaded.pages.size(),
                  an_out.c_str());
    } else if (*sv) {
      ResultsCollector collector(sv_dir);
      ResultsServer server(collector, sv_static.empty() ? std::nullopt : std::optional<fs::path>(sv_static));
      const int port = server.bind(sv_host, sv_port);
      if (port < 0) throw Error(Errc::InvalidConfig, "cannot bind " + sv_host + ":" + std::to_string(sv_port));
      g_server = &server;
      std::signal(SIGINT, handle_signal);
      std::signal(SIGTERM, handle_signal);
      std::printf("listening on http://%s:%d/results\n", sv_host.c_str(), port);
      std::fflush(stdout);
      server.listen();
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
