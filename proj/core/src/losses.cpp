#include "footgan/losses.hpp"

#include <string>

#include "footgan/error.hpp"

namespace footgan {

torch::Tensor gradient_penalty(const CriticFn& critic, const torch::Tensor& real, const torch::Tensor& fake,
                               Rng& rng) {
  return gradient_penalty(critic, real, fake, uniform_tensor({real.size(0)}, 0.0, 1.0, rng));
}

torch::Tensor gradient_penalty(const CriticFn& critic, const torch::Tensor& real, const torch::Tensor& fake,
                               const torch::Tensor& eps) {
  if (!real.sizes().equals(fake.sizes())) {
    throw Error(Errc::ShapeMismatch, "real and fake batches differ in shape");
  }
  std::vector<int64_t> bshape(static_cast<size_t>(real.dim()), 1);
  bshape[0] = real.size(0);
  auto e = eps.to(real.dtype()).view(bshape);
  auto x_hat = (e * real.detach() + (1.0 - e) * fake.detach()).requires_grad_(true);
  auto scores = critic(x_hat);
  torch::Tensor grads;
  if (scores.requires_grad()) {
    grads = torch::autograd::grad({scores.sum()}, {x_hat}, {}, /*retain_graph=*/true, /*create_graph=*/true,
                                  /*allow_unused=*/true)[0];
  }
  if (!grads.defined()) grads = torch::zeros_like(x_hat);  // critic ignores its input
  if (!torch::isfinite(grads).all().item<bool>()) {
    throw Error(Errc::NonFiniteGradient, "critic input gradient is not finite");
  }
  auto norms = grads.flatten(1).norm(2, 1);
  return (norms - 1.0).pow(2).mean();
}

namespace {
void check_lists(size_t a, size_t b) {
  if (a == 0 || a != b) throw Error(Errc::StructureMismatch, "score lists must be non-empty and equal length");
}
}  // namespace

torch::Tensor lsgan_d_loss(const std::vector<torch::Tensor>& real_scores,
                           const std::vector<torch::Tensor>& fake_scores) {
  check_lists(real_scores.size(), fake_scores.size());
  torch::Tensor total = torch::zeros({}, torch::kDouble);
  for (size_t k = 0; k < real_scores.size(); ++k) {
    total = total + (real_scores[k].to(torch::kDouble) - 1.0).pow(2).mean() +
            fake_scores[k].to(torch::kDouble).pow(2).mean();
  }
  return total;
}

torch::Tensor lsgan_g_loss(const std::vector<torch::Tensor>& fake_scores) {
  if (fake_scores.empty()) throw Error(Errc::StructureMismatch, "score list is empty");
  torch::Tensor total = torch::zeros({}, torch::kDouble);
  for (const auto& s : fake_scores) total = total + (s.to(torch::kDouble) - 1.0).pow(2).mean();
  return total;
}

torch::Tensor feature_matching_loss(const std::vector<std::vector<torch::Tensor>>& real_features,
                                    const std::vector<std::vector<torch::Tensor>>& fake_features) {
  if (real_features.size() != fake_features.size() || real_features.empty()) {
    throw Error(Errc::StructureMismatch, "sub-discriminator counts differ");
  }
  torch::Tensor total = torch::zeros({}, torch::kDouble);
  for (size_t k = 0; k < real_features.size(); ++k) {
    const auto& r = real_features[k];
    const auto& f = fake_features[k];
    if (r.size() != f.size() || r.empty()) {
      throw Error(Errc::StructureMismatch, "layer counts differ in sub-discriminator " + std::to_string(k));
    }
    torch::Tensor sub = torch::zeros({}, torch::kDouble);
    for (size_t l = 0; l < r.size(); ++l) {
      if (!r[l].sizes().equals(f[l].sizes())) {
        throw Error(Errc::StructureMismatch,
                    "feature shapes differ at sub " + std::to_string(k) + " layer " + std::to_string(l));
      }
      sub = sub + (r[l].detach().to(torch::kDouble) - f[l].to(torch::kDouble)).abs().mean();
    }
    total = total + sub / static_cast<double>(r.size());
  }
  return total;
}

torch::Tensor feature_matching_loss(const CriticOutput& real, const CriticOutput& fake) {
  return feature_matching_loss(real.features, fake.features);
}

}  // namespace footgan
