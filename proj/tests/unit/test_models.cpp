#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest_torch.hpp"

#include "footgan/discriminators.hpp"
#include "footgan/generator.hpp"
#include "footgan/signal_ops.hpp"
#include "test_support.hpp"

using namespace footgan;
namespace F = torch::nn::functional;

namespace {
torch::Tensor row(std::vector<float> v) { return torch::tensor(v).view({1, 1, -1}); }

std::vector<float> values(const torch::Tensor& t) {
  auto c = t.contiguous().to(torch::kFloat).flatten();
  return {c.data_ptr<float>(), c.data_ptr<float>() + c.numel()};
}

torch::Tensor labels_for(std::vector<int> ids, int k = 7) { return one_hot(ids, k); }
}  // namespace

TEST_SUITE("upsample") {
  TEST_CASE("zero stuff and nearest") {
    CHECK(values(upsample(row({2, 3}), 4, UpsampleMode::zero_stuff)) == std::vector<float>{2, 0, 0, 0, 3, 0, 0, 0});
    CHECK(values(upsample(row({2, 3}), 4, UpsampleMode::nearest)) == std::vector<float>{2, 2, 2, 2, 3, 3, 3, 3});
  }

  TEST_CASE("linear matches a direct interpolation oracle") {
    CHECK(values(upsample(row({0, 4}), 4, UpsampleMode::linear)) == std::vector<float>{0, 1, 2, 3, 4, 4, 4, 4});
    Rng rng(5);
    auto x = uniform_tensor({2, 3, 9}, -1, 1, rng);
    auto y = upsample(x, 4, UpsampleMode::linear);
    auto xa = x.accessor<float, 3>();
    auto ya = y.accessor<float, 3>();
    for (int b = 0; b < 2; ++b) {
      for (int c = 0; c < 3; ++c) {
        for (int i = 0; i < 9; ++i) {
          for (int r = 0; r < 4; ++r) {
            const double a = xa[b][c][i], n = xa[b][c][std::min(i + 1, 8)];
            REQUIRE(ya[b][c][4 * i + r] == doctest::Approx(a + (n - a) * r / 4.0).epsilon(1e-6));
          }
        }
      }
    }
  }

  TEST_CASE("cubic passes through anchors and reproduces a line in the interior") {
    auto y = values(upsample(row({0, 1, 2, 3, 4, 5}), 4, UpsampleMode::cubic));
    for (int i = 0; i < 6; ++i) CHECK(y[4 * i] == doctest::Approx(i));
    for (int i = 4; i < 16; ++i) CHECK(y[i] == doctest::Approx(i / 4.0).epsilon(1e-6));
  }

  TEST_CASE("factor checks") {
    CHECK_ERRC(upsample(row({1}), 0, UpsampleMode::nearest), Errc::InvalidFactor);
    CHECK(values(upsample(row({1, 2}), 1, UpsampleMode::cubic)) == std::vector<float>{1, 2});
  }

  TEST_CASE("zero stuff + conv equals stride-4 transposed conv") {
    torch::manual_seed(1);
    Rng rng(7);
    for (int trial = 0; trial < 25; ++trial) {
      const int64_t cin = 1 + static_cast<int64_t>(rng() % 4), cout = 1 + static_cast<int64_t>(rng() % 4);
      const int64_t len = 4 + static_cast<int64_t>(rng() % 30);
      auto x = torch::randn({2, cin, len});
      auto w = torch::randn({cout, cin, 25});
      auto direct = F::conv1d(upsample(x, 4, UpsampleMode::zero_stuff), w, F::Conv1dFuncOptions().padding(12));
      auto fast = F::conv_transpose1d(
          x, w.transpose(0, 1).flip({2}), F::ConvTranspose1dFuncOptions().stride(4).padding(12).output_padding(3));
      REQUIRE(direct.sizes() == fast.sizes());
      REQUIRE((direct - fast).abs().max().item<double>() < 1e-5);
    }
  }
}

TEST_SUITE("conditioning") {
  TEST_CASE("one hot") {
    auto l = labels_for({3, 0});
    CHECK(l.sizes() == torch::IntArrayRef{2, 7});
    CHECK(l.sum(1).eq(1).all().item<bool>());
    CHECK(l[0][3].item<float>() == 1.0f);
    CHECK_ERRC(labels_for({9}), Errc::InvalidClass);
  }

  TEST_CASE("condition_inject adds constant label rows") {
    auto f = torch::randn({1, 512, 8});
    auto out = condition_inject(f, labels_for({3}));
    CHECK(out.size(1) == 519);
    CHECK(torch::equal(out.slice(1, 0, 512), f));
    for (int k = 0; k < 7; ++k) {
      auto rowk = out[0][512 + k];
      CHECK(rowk.eq(k == 3 ? 1.0f : 0.0f).all().item<bool>());
    }
    CHECK_ERRC(condition_inject(f, labels_for({1, 2})), Errc::ShapeMismatch);
  }
}

TEST_SUITE("generator") {
  TEST_CASE("config arithmetic") {
    GeneratorConfig cfg;
    CHECK(cfg.output_len() == 8192);
    CHECK(cfg.channel_plan() == std::vector<int>{512, 256, 128, 64, 32, 1});
    CHECK(cfg.layer_lengths() == std::vector<int64_t>{32, 128, 512, 2048, 8192});
    GeneratorConfig even = cfg;
    even.kernel_size = 24;
    CHECK_ERRC(even.validate(), Errc::InvalidConfig);
  }

  TEST_CASE("parameter counts") {
    GeneratorConfig tiny;
    tiny.base_channels = 1;
    tiny.num_classes = 0;
    tiny.kernel_size = 1;
    tiny.num_layers = 1;
    tiny.bias = false;
    tiny.initial_len = 8192 / 4;
    CHECK(count_parameters(tiny).conv == 1);

    auto conv_only = [](int c0) {
      GeneratorConfig c;
      c.base_channels = c0;
      c.num_classes = 0;
      c.bias = false;
      return count_parameters(c).conv;
    };
    // Every conv is c_in * c_out * k, so doubling c0 quadruples the count
    // except for the last layer which only doubles.
    const double ratio = static_cast<double>(conv_only(1024)) / conv_only(512);
    CHECK(ratio > 3.9);
    CHECK(ratio < 4.0);

    for (int c0 : {16, 32, 64}) {
      for (auto mode : {UpsampleMode::zero_stuff, UpsampleMode::cubic}) {
        GeneratorConfig c;
        c.base_channels = c0;
        c.upsample_mode = mode;
        WaveGanGenerator g(c);
        int64_t n = 0;
        for (const auto& p : g->parameters()) n += p.numel();
        CHECK(count_parameters(c).total() == n);
      }
    }
  }

  TEST_CASE("batch of 16 produces 16x8192 in [-1, 1]") {
    torch::manual_seed(0);
    GeneratorConfig cfg;
    cfg.base_channels = 64;
    WaveGanGenerator g(cfg);
    Rng rng(1);
    auto z = sample_latent(16, 100, rng);
    CHECK(z.abs().max().item<float>() <= 1.0f);
    std::vector<int> ids;
    for (int i = 0; i < 16; ++i) ids.push_back(i % 7);
    auto trace = g->forward_trace(z, labels_for(ids));
    CHECK(trace.output.sizes() == torch::IntArrayRef{16, 8192});
    CHECK(trace.output.abs().max().item<float>() <= 1.0f);
    CHECK(trace.layer_lengths == std::vector<int64_t>{32, 128, 512, 2048, 8192});
    CHECK_ERRC(g->forward(z, labels_for({1, 2})), Errc::ShapeMismatch);
  }

  TEST_CASE("all upsample modes give identical shapes") {
    for (auto mode : {UpsampleMode::zero_stuff, UpsampleMode::nearest, UpsampleMode::linear, UpsampleMode::cubic}) {
      GeneratorConfig cfg;
      cfg.base_channels = 16;
      cfg.upsample_mode = mode;
      WaveGanGenerator g(cfg);
      Rng rng(2);
      auto y = g->forward(sample_latent(3, 100, rng), labels_for({0, 1, 2}));
      CHECK(y.sizes() == torch::IntArrayRef{3, 8192});
    }
  }

  TEST_CASE("inference is deterministic and labels matter") {
    torch::manual_seed(3);
    GeneratorConfig cfg;
    cfg.base_channels = 32;
    WaveGanGenerator g(cfg);
    g->eval();
    torch::NoGradGuard ng;
    Rng rng(4);
    auto z = sample_latent(4, 100, rng);
    auto a = g->forward(z, labels_for({1, 1, 1, 1}));
    CHECK(torch::equal(a, g->forward(z, labels_for({1, 1, 1, 1}))));
    auto b = g->forward(z, labels_for({5, 5, 5, 5}));
    CHECK_FALSE(torch::equal(a, b));
  }

  TEST_CASE("zero-stuff layer agrees with explicit upsample + conv") {
    torch::manual_seed(9);
    GeneratorConfig cfg;
    cfg.base_channels = 8;
    cfg.batch_norm = false;
    cfg.num_layers = 1;
    cfg.initial_len = 2048;
    WaveGanGenerator g(cfg);
    torch::NoGradGuard ng;
    auto params = g->named_parameters();
    Rng rng(10);
    auto z = sample_latent(2, 100, rng);
    auto lab = labels_for({0, 6});
    auto h = torch::relu(F::linear(z, params["dense.weight"], params["dense.bias"])).view({2, 8, 2048});
    h = condition_inject(h, lab);
    auto ref = torch::tanh(F::conv1d(upsample(h, 4, UpsampleMode::zero_stuff), params["conv0.weight"],
                                     F::Conv1dFuncOptions().padding(12).bias(params["conv0.bias"])))
                   .squeeze(1);
    CHECK((g->forward(z, lab) - ref).abs().max().item<double>() < 1e-5);
  }

  TEST_CASE("gradients match finite differences on a tiny generator") {
    torch::manual_seed(11);
    GeneratorConfig cfg;
    cfg.base_channels = 4;
    cfg.num_layers = 2;
    cfg.initial_len = 512;
    cfg.d_z = 6;
    WaveGanGenerator g(cfg);
    g->to(torch::kDouble);
    Rng rng(12);
    auto z = sample_latent(3, cfg.d_z, rng).to(torch::kDouble);
    auto lab = labels_for({0, 2, 4}).to(torch::kDouble);
    auto probe = torch::randn({3, cfg.output_len()}, torch::kDouble);
    auto loss_fn = [&] { return (g->forward(z, lab) * probe).sum(); };
    g->zero_grad();
    loss_fn().backward();
    for (auto& p : g->parameters()) {
      REQUIRE(p.grad().defined());
      REQUIRE(torch::isfinite(p.grad()).all().item<bool>());
    }
    torch::NoGradGuard ng;
    int checked = 0;
    for (auto& item : g->named_parameters()) {
      auto& p = item.value();
      auto flat = p.view(-1);
      for (int64_t i = 0; i < std::min<int64_t>(flat.numel(), 3); ++i) {
        const double orig = flat[i].item<double>();
        const double h = 1e-6;
        flat[i] = orig + h;
        const double up = loss_fn().item<double>();
        flat[i] = orig - h;
        const double dn = loss_fn().item<double>();
        flat[i] = orig;
        const double fd = (up - dn) / (2 * h);
        const double ad = p.grad().view(-1)[i].item<double>();
        CAPTURE(item.key());
        CHECK(std::abs(fd - ad) <= 1e-3 * std::max(1.0, std::abs(ad)));
        ++checked;
      }
    }
    CHECK(checked > 10);
  }

  TEST_CASE("config json roundtrip") {
    GeneratorConfig cfg;
    cfg.base_channels = 96;
    cfg.upsample_mode = UpsampleMode::linear;
    nlohmann::json j = cfg;
    CHECK(j.get<GeneratorConfig>() == cfg);
  }
}

TEST_SUITE("phase shuffle") {
  TEST_CASE("shift oracle with reflection") {
    auto x = row({1, 2, 3, 4});
    CHECK(values(phase_shift(x, torch::full({1, 1}, 1, torch::kLong), 2)) == std::vector<float>{2, 3, 4, 3});
    CHECK(values(phase_shift(x, torch::full({1, 1}, -1, torch::kLong), 2)) == std::vector<float>{2, 1, 2, 3});
    CHECK(values(phase_shift(x, torch::full({1, 1}, 2, torch::kLong), 2)) == std::vector<float>{3, 4, 3, 2});
    CHECK(values(phase_shift(x, torch::zeros({1, 1}, torch::kLong), 2)) == std::vector<float>{1, 2, 3, 4});
  }

  TEST_CASE("brute force against per-channel shifts") {
    Rng rng(3);
    auto x = uniform_tensor({3, 4, 20}, -1, 1, rng);
    Rng a(99), b(99);
    auto y = phase_shuffle(x, 2, a);
    CHECK(y.sizes() == x.sizes());
    std::uniform_int_distribution<int64_t> dist(-2, 2);
    for (int i = 0; i < 3; ++i) {
      for (int c = 0; c < 4; ++c) {
        const int64_t s = dist(b);
        for (int64_t t = 0; t < 20; ++t) {
          int64_t src = t + s;
          if (src < 0) src = -src;
          if (src > 19) src = 2 * 19 - src;
          REQUIRE(y[i][c][t].item<float>() == x[i][c][src].item<float>());
        }
      }
    }
  }

  TEST_CASE("n = 0 is the identity") {
    Rng rng(1);
    auto x = torch::randn({2, 3, 10});
    CHECK(torch::equal(phase_shuffle(x, 0, rng), x));
  }
}

TEST_SUITE("reshape and pooling") {
  TEST_CASE("period reshape shapes") {
    auto x = torch::randn({1, 1, 8192});
    const std::vector<std::pair<int64_t, int64_t>> want = {{2, 4096}, {3, 2731}, {5, 1639}, {7, 1171}, {11, 745}};
    for (auto [p, rows] : want) {
      auto y = period_reshape(x, p);
      CHECK(y.sizes() == torch::IntArrayRef{1, 1, rows, p});
      // Dropping the pad reconstructs the input exactly.
      CHECK(torch::equal(y.flatten(2).slice(2, 0, 8192), x));
    }
    CHECK(torch::equal(period_reshape(x, 1).squeeze(-1), x));
  }

  TEST_CASE("reflect padding on non-divisible lengths") {
    auto y = values(period_reshape(row({1, 2, 3, 4, 5}), 3));
    CHECK(y == std::vector<float>{1, 2, 3, 4, 5, 4});
  }

  TEST_CASE("average pooling keeps the mean") {
    CHECK(values(average_pool(row({1, 3}), 2)) == std::vector<float>{2});
    auto x = torch::randn({2, 1, 8192}, torch::kDouble);
    for (int f : {2, 4}) {
      auto y = average_pool(x, f);
      CHECK(y.size(2) == 8192 / f);
      CHECK((y.mean() - x.mean()).abs().item<double>() < 1e-12);
    }
  }
}

TEST_SUITE("critics") {
  TEST_CASE("wavegan critic lengths and scores") {
    torch::manual_seed(0);
    WaveGanDiscriminator d(WaveDiscConfig{});
    d->eval();
    auto x = torch::rand({16, 8192}) * 2 - 1;
    std::vector<int> ids(16, 2);
    std::vector<int64_t> lengths;
    auto aug = torch::cat({x.unsqueeze(1), labels_for(ids).unsqueeze(-1).expand({-1, -1, 8192})}, 1);
    CHECK(aug.size(1) == 8);
    auto s = d->forward_trace(aug, nullptr, &lengths);
    CHECK(s.sizes() == torch::IntArrayRef{16});
    CHECK(lengths == std::vector<int64_t>{2048, 512, 128, 32, 8});
    CHECK(WaveDiscConfig{}.layer_lengths() == lengths);
    CHECK(torch::equal(s, d->score(x, labels_for(ids))));
    CHECK(torch::isfinite(s).all().item<bool>());
    CHECK_ERRC(d->score(torch::zeros({2, 4096}), labels_for({0, 1})), Errc::ShapeMismatch);
  }

  TEST_CASE("phase shuffle only acts in training mode with an rng") {
    torch::manual_seed(1);
    WaveGanDiscriminator d(WaveDiscConfig{});
    auto x = torch::rand({4, 8192}) * 2 - 1;
    auto l = labels_for({0, 1, 2, 3});
    Rng r1(5), r2(5), r3(6);
    d->train();
    auto a = d->score(x, l, &r1);
    CHECK(torch::equal(a, d->score(x, l, &r2)));
    CHECK_FALSE(torch::equal(a, d->score(x, l, &r3)));
    d->eval();
    CHECK(torch::equal(d->score(x, l, &r1), d->score(x, l)));
  }

  TEST_CASE("hifi config validation") {
    auto cfg = HiFiDiscConfig::compact();
    cfg.validate();
    HiFiDiscConfig::reference().validate();
    auto bad = cfg;
    bad.mpd_periods = {2, 4, 5};
    CHECK_ERRC(bad.validate(), Errc::InvalidConfig);
    bad.mpd_periods = {3, 2};
    CHECK_ERRC(bad.validate(), Errc::InvalidConfig);
    nlohmann::json j = cfg;
    CHECK(j.get<HiFiDiscConfig>() == cfg);
  }

  TEST_CASE("msd and mpd structure") {
    torch::manual_seed(2);
    const auto cfg = HiFiDiscConfig::compact();
    HiFiDiscriminator d(cfg);
    auto x = torch::rand({2, 8192}) * 2 - 1;
    auto l = labels_for({4, 6});
    auto msd = d->msd_forward(x, l);
    REQUIRE(msd.size() == 3);
    const std::vector<int64_t> lens = {8192, 4096, 2048};
    for (size_t i = 0; i < 3; ++i) {
      CHECK(msd.input_shapes[i] == std::vector<int64_t>{8, lens[i]});
      CHECK(msd.features[i].size() == cfg.msd_layers.size() + 1);
      CHECK(msd.features[i].back().numel() == msd.scores[i].numel());
    }
    auto mpd = d->mpd_forward(x, l);
    REQUIRE(mpd.size() == 5);
    const std::vector<std::pair<int64_t, int64_t>> want = {{4096, 2}, {2731, 3}, {1639, 5}, {1171, 7}, {745, 11}};
    for (size_t i = 0; i < 5; ++i) {
      CHECK(mpd.input_shapes[i] == std::vector<int64_t>{8, want[i].first, want[i].second});
      CHECK(mpd.features[i].size() == cfg.mpd_layers.size() + 1);
    }
    CHECK(d->forward(x, l).size() == 8);
    CHECK(d->num_sub_discriminators() == 8);
  }

  TEST_CASE("label channels go through period reshape and stay constant per item") {
    auto l = labels_for({3});
    auto aug = torch::cat({torch::randn({1, 1, 8192}), l.unsqueeze(-1).expand({-1, -1, 8192})}, 1);
    auto m = period_reshape(aug, 5);
    CHECK(m.sizes() == torch::IntArrayRef{1, 8, 1639, 5});
    for (int k = 0; k < 7; ++k) CHECK(m[0][1 + k].eq(k == 3 ? 1.0f : 0.0f).all().item<bool>());
  }

  TEST_CASE("zero input gives finite scores everywhere") {
    HiFiDiscriminator d(HiFiDiscConfig::compact());
    auto out = d->forward(torch::zeros({2, 8192}), labels_for({0, 1}));
    for (const auto& s : out.scores) CHECK(torch::isfinite(s).all().item<bool>());
  }

  TEST_CASE("critic outputs finite for inputs in [-1, 1]") {
    torch::manual_seed(8);
    HiFiDiscriminator d(HiFiDiscConfig::compact());
    WaveGanDiscriminator w(WaveDiscConfig{});
    auto x = torch::sign(torch::randn({3, 8192}));
    auto l = labels_for({0, 3, 6});
    for (const auto& s : d->forward(x, l).scores) CHECK(torch::isfinite(s).all().item<bool>());
    CHECK(torch::isfinite(w->score(x, l)).all().item<bool>());
  }
}

TEST_SUITE("critic normalization") {
  TEST_CASE("plain conv matches the functional conv") {
    torch::manual_seed(3);
    CriticConv c(1, 8, 4, 5, 2, 2, 2, CriticNorm::none);
    auto x = torch::randn({2, 8, 40});
    auto p = c->named_parameters();
    auto ref = F::conv1d(x, p["weight"], F::Conv1dFuncOptions().stride(2).padding(2).groups(2).bias(p["bias"]));
    CHECK(torch::allclose(c->forward(x), ref));
  }

  TEST_CASE("weight norm starts at the plain init and is scale free in v") {
    torch::manual_seed(4);
    CriticConv c(2, 3, 6, 5, 3, 2, 1, CriticNorm::weight);
    auto p = c->named_parameters();
    REQUIRE(p.contains("weight_g"));
    CHECK(torch::allclose(c->effective_weight(), p["weight_v"], 1e-5, 1e-6));
    {
      torch::NoGradGuard ng;
      p["weight_v"].mul_(3.0);
      p["weight_g"].fill_(0.5);
    }
    auto w = c->effective_weight();
    auto norms = w.flatten(1).norm(2, 1);
    CHECK(torch::allclose(norms, torch::full_like(norms, 0.5), 1e-5, 1e-6));
    auto x = torch::randn({1, 3, 30, 4});
    CHECK(c->forward(x).sizes() == torch::IntArrayRef{1, 6, 10, 4});
  }

  TEST_CASE("spectral norm drives the top singular value to 1") {
    torch::manual_seed(5);
    CriticConv c(1, 4, 6, 3, 1, 1, 1, CriticNorm::spectral);
    {
      torch::NoGradGuard ng;
      c->named_parameters()["weight"].mul_(7.0);
    }
    const auto x = torch::randn({1, 4, 16});
    const auto before = c->forward(x);
    CHECK(torch::equal(before, c->forward(x)));
    for (int i = 0; i < 30; ++i) c->power_iteration();
    auto sv = torch::linalg_svdvals(c->effective_weight().detach().flatten(1).to(torch::kDouble));
    CHECK(sv[0].item<double>() == doctest::Approx(1.0).epsilon(1e-4));
  }

  TEST_CASE("power iteration reaches every conv of a critic") {
    torch::manual_seed(6);
    WaveDiscConfig cfg;
    cfg.norm = CriticNorm::spectral;
    WaveGanDiscriminator d(cfg);
    std::map<std::string, torch::Tensor> before;
    for (const auto& b : d->named_buffers()) before[b.key()] = b.value().clone();
    REQUIRE(before.size() == 10);
    power_iteration(*d);
    for (const auto& b : d->named_buffers()) CHECK_FALSE(torch::equal(before[b.key()], b.value()));
  }

  TEST_CASE("hifi critic layout per normalization flag") {
    auto cfg = HiFiDiscConfig::compact();
    HiFiDiscriminator d(cfg);
    auto p = d->named_parameters();
    CHECK(p.contains("msd0.conv0.weight"));
    CHECK(d->named_buffers().contains("msd0.conv0.u"));
    CHECK(p.contains("msd1.conv0.weight_g"));
    CHECK(p.contains("mpd2.post.weight_g"));
    cfg.norm = CriticNorm::none;
    cfg.spectral_first_scale = false;
    HiFiDiscriminator plain(cfg);
    CHECK(plain->named_buffers().size() == 0);
    CHECK(plain->named_parameters().contains("mpd11.conv3.weight"));
    nlohmann::json j = cfg;
    CHECK(j.at("normalization") == "none");
    CHECK(j.get<HiFiDiscConfig>() == cfg);
  }

  TEST_CASE("wavegan critic normalization roundtrips through json") {
    WaveDiscConfig cfg;
    CHECK(cfg.norm == CriticNorm::none);
    cfg.norm = CriticNorm::spectral;
    nlohmann::json j = cfg;
    CHECK(j.at("normalization") == "spectral");
    CHECK(j.get<WaveDiscConfig>() == cfg);
    WaveGanDiscriminator d(cfg);
    CHECK(d->named_buffers().contains("conv4.u"));
  }
}
