#include "footgan/metrics.hpp"

#include <cmath>

#include "footgan/error.hpp"

namespace footgan {

double inception_score(const Eigen::MatrixXd& probs) {
  if (probs.rows() == 0 || probs.cols() == 0) throw Error(Errc::InvalidDistribution, "empty probability matrix");
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    const auto row = probs.row(i);
    if (!row.allFinite() || (row.array() < 0.0).any() || std::abs(row.sum() - 1.0) > 1e-6) {
      throw Error(Errc::InvalidDistribution, "row " + std::to_string(i) + " is not a probability vector");
    }
  }
  const Eigen::RowVectorXd marginal = probs.colwise().mean();
  double kl_sum = 0.0;
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    for (Eigen::Index j = 0; j < probs.cols(); ++j) {
      const double p = probs(i, j);
      if (p > 0.0) kl_sum += p * (std::log(p) - std::log(marginal(j)));
    }
  }
  return std::exp(kl_sum / static_cast<double>(probs.rows()));
}

GaussianStats fit_gaussian(const Eigen::MatrixXd& x) {
  if (x.rows() < 2) throw Error(Errc::DegenerateCovariance, "need at least 2 samples to fit a covariance");
  GaussianStats g;
  g.mean = x.colwise().mean().transpose();
  const Eigen::MatrixXd centered = x.rowwise() - g.mean.transpose();
  g.covariance = (centered.transpose() * centered) / static_cast<double>(x.rows() - 1);
  return g;
}

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
  const Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  const Eigen::VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

double frechet_distance(const GaussianStats& a, const GaussianStats& b) {
  // Tr((Sa Sb)^1/2) = Tr((Sa^1/2 Sb Sa^1/2)^1/2), and the latter is symmetric.
  const Eigen::MatrixXd sa = psd_sqrt(a.covariance);
  const Eigen::MatrixXd inner = sa * b.covariance * sa;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (inner + inner.transpose()), Eigen::EigenvaluesOnly);
  const double tr_sqrt = es.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  const double d2 = (a.mean - b.mean).squaredNorm() + a.covariance.trace() + b.covariance.trace() - 2.0 * tr_sqrt;
  return std::max(0.0, d2);
}

void require_compatible(const EmbeddingSet& a, const EmbeddingSet& b) {
  if (a.extractor != b.extractor) {
    throw Error(Errc::ExtractorMismatch, "embeddings from " + to_string(a.extractor) + " and " + to_string(b.extractor));
  }
  if (a.dim() != b.dim()) {
    throw Error(Errc::ExtractorMismatch,
                "embedding widths differ: " + std::to_string(a.dim()) + " vs " + std::to_string(b.dim()));
  }
}

double fad(const EmbeddingSet& a, const EmbeddingSet& b) {
  require_compatible(a, b);
  return frechet_distance(fit_gaussian(a.vectors), fit_gaussian(b.vectors));
}

double polynomial_kernel(const Eigen::Ref<const Eigen::VectorXd>& x, const Eigen::Ref<const Eigen::VectorXd>& y) {
  const double v = x.dot(y) / static_cast<double>(x.size()) + 1.0;
  return v * v * v;
}

namespace {

constexpr Eigen::Index kBlock = 512;

// Sum of the cubic kernel over all (i, j) pairs, optionally without i == j
// (only meaningful when x and y are the same matrix).
double kernel_sum(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, bool skip_diagonal) {
  const double inv_d = 1.0 / static_cast<double>(x.cols());
  double total = 0.0;
  for (Eigen::Index i0 = 0; i0 < x.rows(); i0 += kBlock) {
    const Eigen::Index ni = std::min(kBlock, x.rows() - i0);
    for (Eigen::Index j0 = 0; j0 < y.rows(); j0 += kBlock) {
      const Eigen::Index nj = std::min(kBlock, y.rows() - j0);
      Eigen::ArrayXXd k = (x.middleRows(i0, ni) * y.middleRows(j0, nj).transpose()).array() * inv_d + 1.0;
      k = k * k * k;
      if (skip_diagonal && i0 == j0) k.matrix().diagonal().setZero();
      total += k.sum();
    }
  }
  return total;
}

double l1_sum(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    total += (y.rowwise() - x.row(i)).cwiseAbs().sum();
  }
  return total;
}

}  // namespace

double kid(const EmbeddingSet& a, const EmbeddingSet& b) {
  require_compatible(a, b);
  const auto m = static_cast<double>(a.size());
  const auto n = static_cast<double>(b.size());
  if (a.size() < 2 || b.size() < 2) {
    throw Error(Errc::ExtractorMismatch, "KID needs at least 2 embeddings per set");
  }
  const double kxx = kernel_sum(a.vectors, a.vectors, true) / (m * (m - 1.0));
  const double kyy = kernel_sum(b.vectors, b.vectors, true) / (n * (n - 1.0));
  const double kxy = kernel_sum(a.vectors, b.vectors, false) / (m * n);
  return kxx + kyy - 2.0 * kxy;
}

double mmd_l1(const EmbeddingSet& a, const EmbeddingSet& b) {
  require_compatible(a, b);
  if (a.size() == 0 || b.size() == 0) throw Error(Errc::ExtractorMismatch, "MMD needs non-empty sets");
  const auto m = static_cast<double>(a.size());
  const auto n = static_cast<double>(b.size());
  auto within = [](const Eigen::MatrixXd& x) {
    const auto k = static_cast<double>(x.rows());
    return x.rows() < 2 ? 0.0 : l1_sum(x, x) / (k * (k - 1.0));  // diagonal terms are zero
  };
  // Summing the cross term from each side makes the estimator exactly symmetric.
  const double cross = 0.5 * (l1_sum(a.vectors, b.vectors) + l1_sum(b.vectors, a.vectors)) / (m * n);
  const double wa = within(a.vectors);
  const double wb = within(b.vectors);
  return 2.0 * cross - (wa + wb);
}

PcaResult pca_project(const std::vector<EmbeddingSet>& sets, int k) {
  if (sets.empty() || k < 1) throw Error(Errc::InsufficientData, "PCA needs at least one set and k >= 1");
  Eigen::Index total = 0;
  for (const auto& s : sets) {
    require_compatible(sets.front(), s);
    total += s.size();
  }
  const Eigen::Index d = sets.front().dim();
  if (total <= k) throw Error(Errc::InsufficientData, "PCA needs more than k rows in total");
  if (d < k) throw Error(Errc::InsufficientData, "PCA needs dimension >= k");
  Eigen::MatrixXd all(total, d);
  Eigen::Index row = 0;
  for (const auto& s : sets) {
    all.middleRows(row, s.size()) = s.vectors;
    row += s.size();
  }
  PcaResult r;
  r.mean = all.colwise().mean().transpose();
  const Eigen::MatrixXd centered = all.rowwise() - r.mean.transpose();
  const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(total - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  const Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0);  // ascending
  const double var_total = ev.sum();
  if (!(var_total > 0.0)) throw Error(Errc::DegenerateInput, "embeddings have zero variance");
  r.components.resize(d, k);
  for (int c = 0; c < k; ++c) {
    const Eigen::Index idx = d - 1 - c;
    Eigen::VectorXd v = es.eigenvectors().col(idx);
    // Sign convention: largest-magnitude loading is positive.
    Eigen::Index arg;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0.0) v = -v;
    r.components.col(c) = v;
    r.explained_ratio.push_back(ev(idx) / var_total);
  }
  for (const auto& s : sets) {
    r.sources.push_back(s.source);
    r.coords.push_back((s.vectors.rowwise() - r.mean.transpose()) * r.components);
  }
  return r;
}

}  // namespace footgan
