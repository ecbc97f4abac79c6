#include "fdsi/latent.hpp"

#include <cmath>
#include <string>

#include <Eigen/SVD>

namespace fdsi::latent {

void Parameterizer::check_data(const Eigen::MatrixXd& x) const {
  if (static_cast<std::size_t>(x.rows()) != data_dim()) {
    throw ValidationError("expected data vectors of length " + std::to_string(data_dim()) + ", got " +
                          std::to_string(x.rows()));
  }
}

void Parameterizer::check_latent(const Eigen::MatrixXd& xi) const {
  if (static_cast<std::size_t>(xi.rows()) != latent_dim()) {
    throw ValidationError("expected latent vectors of length " + std::to_string(latent_dim()) + ", got " +
                          std::to_string(xi.rows()));
  }
}

PCAModel::PCAModel(Eigen::VectorXd mean, Eigen::MatrixXd basis, Eigen::VectorXd singular_values,
                   std::size_t n_train, double total_variance)
    : mean_(std::move(mean)),
      basis_(std::move(basis)),
      singular_values_(std::move(singular_values)),
      n_train_(n_train),
      total_variance_(total_variance) {
  require(basis_.rows() == mean_.size(), "PCA basis and mean differ in length");
  require(basis_.cols() == singular_values_.size(), "PCA basis and spectrum differ in size");
  require(n_train_ >= 2, "PCA needs at least two training vectors");
  require((singular_values_.array() > 0).all(), "PCA singular values must be positive");
}

Eigen::MatrixXd PCAModel::encode(const Eigen::MatrixXd& x) const {
  check_data(x);
  const double scale = std::sqrt(static_cast<double>(n_train_ - 1));
  Eigen::MatrixXd xi = basis_.transpose() * (x.colwise() - mean_);
  return (singular_values_.cwiseInverse() * scale).asDiagonal() * xi;
}

Eigen::MatrixXd PCAModel::decode(const Eigen::MatrixXd& xi) const {
  check_latent(xi);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n_train_ - 1));
  Eigen::MatrixXd x = basis_ * ((singular_values_ * scale).asDiagonal() * xi);
  x.colwise() += mean_;
  return x;
}

double PCAModel::explained_variance() const noexcept {
  if (total_variance_ <= 0) return 1.0;
  return singular_values_.squaredNorm() / total_variance_;
}

PCAModel fit_pca(const Eigen::MatrixXd& training, std::size_t n_latent) {
  const auto n = static_cast<std::size_t>(training.cols());
  const auto d = static_cast<std::size_t>(training.rows());
  require(n >= 2, "PCA needs at least two training vectors");
  require(n_latent >= 1 && n_latent <= std::min(n - 1, d), "PCA latent dimension must lie in [1, min(N-1, D)]");
  const Eigen::VectorXd mean = training.rowwise().mean();
  const Eigen::MatrixXd centred = training.colwise() - mean;
  Eigen::BDCSVD<Eigen::MatrixXd> svd(centred, Eigen::ComputeThinU);
  const auto& s = svd.singularValues();
  const auto k = static_cast<Eigen::Index>(n_latent);
  if (!(s[k - 1] > 1e-12 * std::max(s[0], 1e-300))) {
    throw ValidationError("training set has rank below the requested latent dimension " + std::to_string(n_latent));
  }
  return PCAModel(mean, svd.matrixU().leftCols(k), s.head(k), n, centred.squaredNorm());
}

CovarianceBand latent_covariance_band(const Eigen::MatrixXd& xi, double lo, double hi) {
  require(xi.cols() >= 2, "covariance needs at least two samples");
  const Eigen::MatrixXd centred = xi.colwise() - xi.rowwise().mean();
  const Eigen::MatrixXd cov = centred * centred.transpose() / static_cast<double>(xi.cols() - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov, Eigen::EigenvaluesOnly);
  CovarianceBand band;
  band.eigenvalues = eig.eigenvalues();
  band.within = band.eigenvalues.size() == 0 ||
                (band.eigenvalues.minCoeff() >= lo && band.eigenvalues.maxCoeff() <= hi);
  return band;
}

LatentMarginals latent_marginals(const Eigen::MatrixXd& xi) {
  require(xi.cols() >= 2, "marginals need at least two samples");
  LatentMarginals m;
  m.mean = xi.rowwise().mean();
  const Eigen::MatrixXd centred = xi.colwise() - m.mean;
  m.std = (centred.rowwise().squaredNorm() / static_cast<double>(xi.cols() - 1)).cwiseSqrt();
  return m;
}

Eigen::MatrixXd sample_generate(const Parameterizer& model, std::size_t n, std::uint64_t seed) {
  if (n == 0) return Eigen::MatrixXd(static_cast<Eigen::Index>(model.data_dim()), 0);
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd xi(static_cast<Eigen::Index>(model.latent_dim()), static_cast<Eigen::Index>(n));
  for (Eigen::Index j = 0; j < xi.cols(); ++j) {
    for (Eigen::Index i = 0; i < xi.rows(); ++i) xi(i, j) = normal(rng);
  }
  return model.decode(xi);
}

}  // namespace fdsi::latent
