#include "footgan/classifier.hpp"

#include <algorithm>
#include <cstring>
#include <numeric>
#include <random>

#include "footgan/checkpoint.hpp"
#include "footgan/error.hpp"

namespace footgan {
namespace nn = torch::nn;
using nlohmann::json;

void to_json(json& j, const ClassifierConfig& c) {
  j = {{"mel", c.mel},
       {"num_classes", c.num_classes},
       {"stem_channels", c.stem_channels},
       {"branch_channels", c.branch_channels},
       {"num_blocks", c.num_blocks},
       {"epochs", c.epochs},
       {"batch_size", c.batch_size},
       {"learning_rate", c.learning_rate},
       {"val_fraction", c.val_fraction},
       {"seed", c.seed},
       {"architecture", "stem3x3-bn-relu-maxpool, inception blocks (1x1 | 1x1-3x3 | 1x1-3x3-3x3 | maxpool-1x1) "
                        "separated by maxpool 2x2, global average pool, linear"}};
}

void from_json(const json& j, ClassifierConfig& c) {
  ClassifierConfig d;
  c.mel = j.contains("mel") ? j.at("mel").get<MelConfig>() : d.mel;
  c.num_classes = j.value("num_classes", d.num_classes);
  c.stem_channels = j.value("stem_channels", d.stem_channels);
  c.branch_channels = j.value("branch_channels", d.branch_channels);
  c.num_blocks = j.value("num_blocks", d.num_blocks);
  c.epochs = j.value("epochs", d.epochs);
  c.batch_size = j.value("batch_size", d.batch_size);
  c.learning_rate = j.value("learning_rate", d.learning_rate);
  c.val_fraction = j.value("val_fraction", d.val_fraction);
  c.seed = j.value("seed", d.seed);
}

ConvBnReluImpl::ConvBnReluImpl(int in, int out, int k) {
  conv_ = register_module("conv", nn::Conv2d(nn::Conv2dOptions(in, out, k).padding(k / 2).bias(false)));
  bn_ = register_module("bn", nn::BatchNorm2d(out));
}

torch::Tensor ConvBnReluImpl::forward(const torch::Tensor& x) { return torch::relu(bn_->forward(conv_->forward(x))); }

namespace {
ConvBnRelu conv_bn_relu(int in, int out, int k) { return ConvBnRelu(in, out, k); }
}  // namespace

InceptionBlockImpl::InceptionBlockImpl(int in, int b) {
  b1_ = register_module("b1", nn::Sequential(conv_bn_relu(in, b, 1)));
  b3_ = register_module("b3", nn::Sequential(conv_bn_relu(in, b, 1), conv_bn_relu(b, b, 3)));
  b5_ = register_module("b5", nn::Sequential(conv_bn_relu(in, b, 1), conv_bn_relu(b, b, 3), conv_bn_relu(b, b, 3)));
  bpool_ = register_module(
      "bpool", nn::Sequential(nn::MaxPool2d(nn::MaxPool2dOptions(3).stride(1).padding(1)), conv_bn_relu(in, b, 1)));
}

torch::Tensor InceptionBlockImpl::forward(const torch::Tensor& x) {
  return torch::cat({b1_->forward(x), b3_->forward(x), b5_->forward(x), bpool_->forward(x)}, 1);
}

InceptionClassifierImpl::InceptionClassifierImpl(ClassifierConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.num_classes < 2 || cfg_.num_blocks < 1 || cfg_.stem_channels < 1 || cfg_.branch_channels < 1) {
    throw Error(Errc::InvalidConfig, "classifier: invalid architecture");
  }
  input_norm_ = register_module("input_norm", nn::BatchNorm2d(1));
  stem_ = register_module("stem", nn::Sequential(conv_bn_relu(1, cfg_.stem_channels, 3),
                                                 nn::MaxPool2d(nn::MaxPool2dOptions(2).stride(2))));
  int in = cfg_.stem_channels;
  for (int i = 0; i < cfg_.num_blocks; ++i) {
    blocks_.push_back(register_module("block" + std::to_string(i), InceptionBlock(in, cfg_.branch_channels)));
    in = cfg_.embedding_dim();
  }
  head_ = register_module("head", nn::Linear(in, cfg_.num_classes));
}

torch::Tensor InceptionClassifierImpl::embed_features(const torch::Tensor& logmel) {
  auto x = input_norm_->forward(logmel.unsqueeze(1));
  x = stem_->forward(x);
  for (size_t i = 0; i < blocks_.size(); ++i) {
    x = blocks_[i]->forward(x);
    if (i + 1 < blocks_.size() && x.size(2) >= 2 && x.size(3) >= 2) {
      x = torch::max_pool2d(x, {2, 2}, {2, 2});
    }
  }
  return x.mean({2, 3});
}

torch::Tensor InceptionClassifierImpl::logits_from_features(const torch::Tensor& logmel) {
  return head_->forward(embed_features(logmel));
}

torch::Tensor InceptionClassifierImpl::embed(const torch::Tensor& audio) {
  return embed_features(log_mel_spectrogram(audio, cfg_.mel));
}

torch::Tensor InceptionClassifierImpl::probabilities(const torch::Tensor& audio) {
  return torch::softmax(logits_from_features(log_mel_spectrogram(audio, cfg_.mel)).to(torch::kDouble), 1);
}

torch::Tensor stack_clips(const std::vector<AudioClip>& clips) {
  if (clips.empty()) return torch::empty({0, 0});
  const auto len = static_cast<int64_t>(clips.front().size());
  auto out = torch::empty({static_cast<int64_t>(clips.size()), len});
  for (size_t i = 0; i < clips.size(); ++i) {
    if (static_cast<int64_t>(clips[i].size()) != len) throw Error(Errc::ShapeMismatch, "clips differ in length");
    std::memcpy(out[static_cast<int64_t>(i)].data_ptr<float>(), clips[i].samples.data(), sizeof(float) * len);
  }
  return out;
}

namespace {

template <typename Fn>
torch::Tensor batched_eval(InceptionClassifier net, const std::vector<AudioClip>& clips, int batch_size, Fn fn) {
  torch::NoGradGuard no_grad;
  net->eval();
  std::vector<torch::Tensor> parts;
  for (size_t start = 0; start < clips.size(); start += static_cast<size_t>(batch_size)) {
    const size_t end = std::min(clips.size(), start + static_cast<size_t>(batch_size));
    std::vector<AudioClip> chunk(clips.begin() + static_cast<std::ptrdiff_t>(start),
                                 clips.begin() + static_cast<std::ptrdiff_t>(end));
    parts.push_back(fn(stack_clips(chunk)));
  }
  return torch::cat(parts, 0);
}

double accuracy(const torch::Tensor& logits, const torch::Tensor& targets) {
  return logits.argmax(1).eq(targets).to(torch::kDouble).mean().item<double>();
}

}  // namespace

torch::Tensor ClassifierModel::predict_proba(const std::vector<AudioClip>& clips, int batch_size) const {
  InceptionClassifier m = net;
  return batched_eval(m, clips, batch_size, [&](const torch::Tensor& x) { return m->probabilities(x); });
}

torch::Tensor ClassifierModel::embed(const std::vector<AudioClip>& clips, int batch_size) const {
  InceptionClassifier m = net;
  return batched_eval(m, clips, batch_size, [&](const torch::Tensor& x) { return m->embed(x); });
}

ClassifierModel train_eval_classifier(const LabeledDataset& train_set, const ClassifierConfig& cfg) {
  const int k = cfg.num_classes;
  std::vector<std::vector<size_t>> by_class(static_cast<size_t>(k));
  for (size_t i = 0; i < train_set.clips.size(); ++i) {
    const auto& label = train_set.clips[i].label;
    if (!label || *label < 0 || *label >= k) {
      throw Error(Errc::InsufficientData, "clip " + std::to_string(i) + " has no label in 0.." + std::to_string(k - 1));
    }
    by_class[static_cast<size_t>(*label)].push_back(i);
  }
  const auto present = std::count_if(by_class.begin(), by_class.end(), [](const auto& v) { return !v.empty(); });
  if (present < 2) throw Error(Errc::InsufficientData, "need at least 2 classes, found " + std::to_string(present));

  Rng rng(cfg.seed);
  std::vector<size_t> train_idx, val_idx;
  for (auto& members : by_class) {
    if (members.empty()) continue;
    if (members.size() < 2) throw Error(Errc::InsufficientData, "a class has a single clip; cannot hold one out");
    std::shuffle(members.begin(), members.end(), rng);
    auto n_val = static_cast<size_t>(std::lround(cfg.val_fraction * static_cast<double>(members.size())));
    n_val = std::clamp<size_t>(n_val, 1, members.size() - 1);
    val_idx.insert(val_idx.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n_val));
    train_idx.insert(train_idx.end(), members.begin() + static_cast<std::ptrdiff_t>(n_val), members.end());
  }

  auto features_for = [&](const std::vector<size_t>& idx) {
    std::vector<AudioClip> clips;
    std::vector<int64_t> labels;
    for (size_t i : idx) {
      clips.push_back(train_set.clips[i]);
      labels.push_back(*train_set.clips[i].label);
    }
    return std::pair{log_mel_spectrogram(stack_clips(clips), cfg.mel), torch::tensor(labels, torch::kLong)};
  };
  const auto [train_x, train_y] = features_for(train_idx);
  const auto [val_x, val_y] = features_for(val_idx);

  torch::manual_seed(cfg.seed);
  ClassifierModel model;
  model.net = InceptionClassifier(cfg);
  model.class_names = train_set.class_names;
  torch::optim::Adam opt(model.net->parameters(), torch::optim::AdamOptions(cfg.learning_rate));

  const auto n_train = train_x.size(0);
  std::vector<int64_t> order(static_cast<size_t>(n_train));
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    model.net->train();
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0, correct = 0.0;
    for (int64_t start = 0; start < n_train; start += cfg.batch_size) {
      const int64_t end = std::min<int64_t>(n_train, start + cfg.batch_size);
      if (end - start < 2 && start > 0) break;  // batch norm needs > 1 sample
      auto idx = torch::tensor(std::vector<int64_t>(order.begin() + start, order.begin() + end), torch::kLong);
      auto xb = train_x.index_select(0, idx);
      auto yb = train_y.index_select(0, idx);
      auto logits = model.net->logits_from_features(xb);
      auto loss = torch::cross_entropy_loss(logits, yb);
      opt.zero_grad();
      loss.backward();
      opt.step();
      loss_sum += loss.item<double>() * static_cast<double>(end - start);
      correct += accuracy(logits.detach(), yb) * static_cast<double>(end - start);
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(n_train);
    rec.train_accuracy = correct / static_cast<double>(n_train);
    {
      torch::NoGradGuard no_grad;
      model.net->eval();
      rec.validation_accuracy = accuracy(model.net->logits_from_features(val_x), val_y);
    }
    model.curve.push_back(rec);
  }
  model.validation_accuracy = model.curve.empty() ? 0.0 : model.curve.back().validation_accuracy;
  model.net->eval();
  return model;
}

void save_classifier(const ClassifierModel& model, const std::filesystem::path& blob) {
  json curve = json::array();
  for (const auto& r : model.curve) {
    curve.push_back({{"epoch", r.epoch},
                     {"train_loss", r.train_loss},
                     {"train_accuracy", r.train_accuracy},
                     {"validation_accuracy", r.validation_accuracy}});
  }
  json manifest = module_manifest("classifier", model.config(), static_cast<int64_t>(model.curve.size()),
                                  model.class_names);
  manifest["validation_accuracy"] = model.validation_accuracy;
  manifest["curve"] = curve;
  InceptionClassifier net = model.net;
  save_module(*net, blob, manifest);
}

ClassifierModel load_classifier(const std::filesystem::path& blob) {
  const json m = read_manifest(blob, "classifier");
  ClassifierModel model;
  model.net = InceptionClassifier(m.at("config").get<ClassifierConfig>());
  load_module(*model.net, blob);
  model.net->eval();
  model.class_names = m.value("classes", std::vector<std::string>{});
  model.validation_accuracy = m.value("validation_accuracy", 0.0);
  for (const auto& r : m.value("curve", json::array())) {
    model.curve.push_back({r.at("epoch").get<int>(), r.at("train_loss").get<double>(),
                           r.at("train_accuracy").get<double>(), r.at("validation_accuracy").get<double>()});
  }
  return model;
}

}  // namespace footgan
