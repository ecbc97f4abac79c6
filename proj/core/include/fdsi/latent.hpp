#pragma once

// Low-dimensional latent parameterizations of normalized data vectors.
// Samples are stored as matrix columns throughout this module.

#include <cstdint>
#include <string>
#include <vector>

#include "fdsi/common.hpp"

namespace fdsi::latent {

class Parameterizer {
 public:
  virtual ~Parameterizer() = default;

  [[nodiscard]] virtual std::size_t latent_dim() const noexcept = 0;
  [[nodiscard]] virtual std::size_t data_dim() const noexcept = 0;
  [[nodiscard]] virtual std::string kind() const = 0;

  /// Deterministic (mode) encoding of the columns of `x`.
  [[nodiscard]] virtual Eigen::MatrixXd encode(const Eigen::MatrixXd& x) const = 0;
  /// Total on R^{N_l}.
  [[nodiscard]] virtual Eigen::MatrixXd decode(const Eigen::MatrixXd& xi) const = 0;

  [[nodiscard]] Eigen::VectorXd encode_one(const Eigen::VectorXd& x) const { return encode(x); }
  [[nodiscard]] Eigen::VectorXd decode_one(const Eigen::VectorXd& xi) const { return decode(xi); }

 protected:
  void check_data(const Eigen::MatrixXd& x) const;
  void check_latent(const Eigen::MatrixXd& xi) const;
};

/// Whitened PCA: xi = sqrt(N-1) S^-1 V^T (x - mean), so the encoded training
/// set has identity sample covariance.
class PCAModel final : public Parameterizer {
 public:
  PCAModel() = default;
  PCAModel(Eigen::VectorXd mean, Eigen::MatrixXd basis, Eigen::VectorXd singular_values, std::size_t n_train,
           double total_variance);

  [[nodiscard]] std::size_t latent_dim() const noexcept override { return static_cast<std::size_t>(basis_.cols()); }
  [[nodiscard]] std::size_t data_dim() const noexcept override { return static_cast<std::size_t>(mean_.size()); }
  [[nodiscard]] std::string kind() const override { return "pca"; }
  [[nodiscard]] Eigen::MatrixXd encode(const Eigen::MatrixXd& x) const override;
  [[nodiscard]] Eigen::MatrixXd decode(const Eigen::MatrixXd& xi) const override;

  [[nodiscard]] const Eigen::VectorXd& mean() const noexcept { return mean_; }
  [[nodiscard]] const Eigen::MatrixXd& basis() const noexcept { return basis_; }
  [[nodiscard]] const Eigen::VectorXd& singular_values() const noexcept { return singular_values_; }
  [[nodiscard]] std::size_t n_train() const noexcept { return n_train_; }
  /// Fraction of the centred training sum of squares captured by the basis.
  [[nodiscard]] double explained_variance() const noexcept;
  [[nodiscard]] double total_variance() const noexcept { return total_variance_; }

 private:
  Eigen::VectorXd mean_;
  Eigen::MatrixXd basis_;
  Eigen::VectorXd singular_values_;
  std::size_t n_train_ = 0;
  double total_variance_ = 0.0;
};

/// Truncated SVD of the centred training columns.
[[nodiscard]] PCAModel fit_pca(const Eigen::MatrixXd& training, std::size_t n_latent);

/// Sample covariance of encoded columns and whether its eigenvalues all lie in [lo, hi].
struct CovarianceBand {
  Eigen::VectorXd eigenvalues;  // ascending
  bool within = false;
};
[[nodiscard]] CovarianceBand latent_covariance_band(const Eigen::MatrixXd& xi, double lo = 0.3, double hi = 3.0);

struct LatentMarginals {
  Eigen::VectorXd mean;
  Eigen::VectorXd std;
};
[[nodiscard]] LatentMarginals latent_marginals(const Eigen::MatrixXd& xi);

/// Decodes N standard-normal latent draws.
[[nodiscard]] Eigen::MatrixXd sample_generate(const Parameterizer& model, std::size_t n, std::uint64_t seed);

}  // namespace fdsi::latent
