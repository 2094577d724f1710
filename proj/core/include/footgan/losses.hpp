#pragma once

#include <functional>
#include <vector>

#include <torch/torch.h>

#include "footgan/discriminators.hpp"
#include "footgan/signal_ops.hpp"

namespace footgan {

/// Maps a batch of critic inputs (B, ...) to one score per item (B).
using CriticFn = std::function<torch::Tensor(const torch::Tensor&)>;

/// E[(||grad_x D(x_hat)||_2 - 1)^2] with x_hat = eps * real + (1 - eps) * fake
/// and eps ~ U[0, 1] per item. Inputs include any label channels, which are
/// interpolated along with the audio. The result keeps the autograd graph so
/// it can be back-propagated into the critic. Throws NonFiniteGradient.
torch::Tensor gradient_penalty(const CriticFn& critic, const torch::Tensor& real, const torch::Tensor& fake,
                               Rng& rng);

/// Same with caller-supplied interpolation weights `eps` of shape (B).
torch::Tensor gradient_penalty(const CriticFn& critic, const torch::Tensor& real, const torch::Tensor& fake,
                               const torch::Tensor& eps);

/// Sum over sub-discriminators of E[(D(x) - 1)^2] + E[D(G(z))^2].
torch::Tensor lsgan_d_loss(const std::vector<torch::Tensor>& real_scores,
                           const std::vector<torch::Tensor>& fake_scores);

/// Sum over sub-discriminators of E[(D(G(z)) - 1)^2].
torch::Tensor lsgan_g_loss(const std::vector<torch::Tensor>& fake_scores);

/// Per layer mean |real - fake|, averaged over the layers of a
/// sub-discriminator, summed over sub-discriminators. Real features are
/// treated as constants. Throws StructureMismatch.
torch::Tensor feature_matching_loss(const std::vector<std::vector<torch::Tensor>>& real_features,
                                    const std::vector<std::vector<torch::Tensor>>& fake_features);
torch::Tensor feature_matching_loss(const CriticOutput& real, const CriticOutput& fake);

}  // namespace footgan
