#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "footgan/embeddings.hpp"

namespace footgan {

/// exp(mean_i KL(p_i || p_bar)). Rows must be distributions (sum to 1 within
/// 1e-6, non-negative); otherwise InvalidDistribution.
double inception_score(const Eigen::MatrixXd& probs);

struct GaussianStats {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;  // unbiased (n - 1) normalization
};

/// DegenerateCovariance when fewer than two rows.
GaussianStats fit_gaussian(const Eigen::MatrixXd& x);

/// Symmetric PSD square root via eigendecomposition; negative eigenvalues
/// are clamped to zero.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m);

double frechet_distance(const GaussianStats& a, const GaussianStats& b);

/// Checks matching tags and widths (ExtractorMismatch).
void require_compatible(const EmbeddingSet& a, const EmbeddingSet& b);

double fad(const EmbeddingSet& a, const EmbeddingSet& b);

/// Unbiased squared MMD with k(x, y) = (x.y / d + 1)^3.
double kid(const EmbeddingSet& a, const EmbeddingSet& b);
double polynomial_kernel(const Eigen::Ref<const Eigen::VectorXd>& x, const Eigen::Ref<const Eigen::VectorXd>& y);

/// 2 mean d(a_i, b_j) - mean_{i!=j} d(a_i, a_j) - mean_{i!=j} d(b_i, b_j),
/// d the l1 distance. A within-set term over a singleton is 0.
double mmd_l1(const EmbeddingSet& a, const EmbeddingSet& b);

struct PcaResult {
  Eigen::MatrixXd components;           // d x k, columns by decreasing variance
  Eigen::VectorXd mean;                 // d
  std::vector<double> explained_ratio;  // k
  std::vector<std::string> sources;     // one per input set
  std::vector<Eigen::MatrixXd> coords;  // n_s x k per input set
};

/// Fit on the union of all rows. DegenerateInput when total variance is 0;
/// InsufficientData unless total rows > k; ExtractorMismatch on mixed tags.
PcaResult pca_project(const std::vector<EmbeddingSet>& sets, int k = 2);

}  // namespace footgan
