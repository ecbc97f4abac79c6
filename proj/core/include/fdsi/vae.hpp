#pragma once

// Dense variational autoencoder with hand-written backpropagation.
//
// Each input column holds `frames` consecutive frames of `frame_size` values.
// The first encoder layer and the last decoder layer act frame by frame with
// weights shared across frames; everything between them is fully connected.
//
//   encoder: frame -> h1 (leaky), concat frames -> h2 (leaky), h2 -> (mu, logvar)
//   decoder: xi -> h2 (leaky) -> frames * h1 (leaky), per frame h1 -> frame (linear)

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "fdsi/common.hpp"
#include "fdsi/latent.hpp"

namespace fdsi::latent {

inline constexpr double kLeakySlope = 0.2;

struct VaeShape {
  std::size_t frame_size = 0;
  std::size_t frames = 1;
  std::size_t hidden_frame = 64;   // h1, per frame
  std::size_t hidden_joint = 256;  // h2
  std::size_t latent = 64;

  [[nodiscard]] std::size_t input_dim() const noexcept { return frame_size * frames; }
  [[nodiscard]] std::size_t parameter_count() const noexcept;
  void validate() const;
  friend bool operator==(const VaeShape&, const VaeShape&) = default;
};

struct LossParts {
  double recon = 0.0;
  double kl = 0.0;
  double total = 0.0;
};

class VAEModel final : public Parameterizer {
 public:
  VAEModel() = default;
  /// Random initialisation (scaled normal weights, zero biases). `center` is a
  /// fixed offset subtracted before encoding and added after decoding; empty
  /// means zero.
  VAEModel(const VaeShape& shape, std::uint64_t seed, Eigen::VectorXd center = {});
  VAEModel(const VaeShape& shape, Eigen::VectorXd parameters, Eigen::VectorXd center);

  [[nodiscard]] std::size_t latent_dim() const noexcept override { return shape_.latent; }
  [[nodiscard]] std::size_t data_dim() const noexcept override { return shape_.input_dim(); }
  [[nodiscard]] std::string kind() const override { return "vae"; }
  [[nodiscard]] Eigen::MatrixXd encode(const Eigen::MatrixXd& x) const override;
  [[nodiscard]] Eigen::MatrixXd decode(const Eigen::MatrixXd& xi) const override;

  struct Encoding {
    Eigen::MatrixXd mu;
    Eigen::MatrixXd logvar;
  };
  [[nodiscard]] Encoding encode_distribution(const Eigen::MatrixXd& x) const;
  /// mu + sigma * eta with eta drawn from `rng` (stochastic mode).
  [[nodiscard]] Eigen::MatrixXd encode_sample(const Eigen::MatrixXd& x, Rng& rng) const;

  /// Loss of a batch for reparameterization noise `eta` (latent x batch). With
  /// `grad` non-null the gradient with respect to parameters() is written there.
  LossParts loss(const Eigen::MatrixXd& x, const Eigen::MatrixXd& eta, double omega,
                 Eigen::VectorXd* grad = nullptr) const;

  [[nodiscard]] const VaeShape& shape() const noexcept { return shape_; }
  [[nodiscard]] const Eigen::VectorXd& parameters() const noexcept { return params_; }
  [[nodiscard]] Eigen::VectorXd& parameters() noexcept { return params_; }
  [[nodiscard]] const Eigen::VectorXd& center() const noexcept { return center_; }

 private:
  [[nodiscard]] Eigen::MatrixXd centred(const Eigen::MatrixXd& x) const;

  VaeShape shape_;
  Eigen::VectorXd params_;
  Eigen::VectorXd center_;
};

/// Closed-form pieces of the objective, usable without a network.
[[nodiscard]] double kl_divergence(const Eigen::MatrixXd& mu, const Eigen::MatrixXd& logvar);
[[nodiscard]] double reconstruction_loss(const Eigen::MatrixXd& x, const Eigen::MatrixXd& x_hat);

struct OmegaStage {
  std::size_t begin = 0;  // first epoch, inclusive
  std::size_t end = 0;    // exclusive
  double omega = 1.0;
};

struct TrainConfig {
  std::size_t epochs = 600;
  std::size_t batch_size = 8;
  double learning_rate = 7.5e-4;
  double lr_decay = 0.995;  // multiplicative, per epoch
  std::vector<OmegaStage> omega_schedule{{0, 100, 1.0e5}, {100, 400, 1.0e3}, {400, 600, 100.0}};
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1.0e-8;
  std::uint64_t seed = 7;

  void validate() const;
  [[nodiscard]] double omega_at(std::size_t epoch) const;
};

struct TrainHistory {
  std::vector<double> train_total;
  std::vector<double> train_recon;
  std::vector<double> train_kl;
  std::vector<double> val_total;
  std::vector<double> omega;
};

struct TrainResult {
  VAEModel model;
  TrainHistory history;
};

using EpochCallback = std::function<void(std::size_t epoch, const TrainHistory&)>;

/// Adam with bias correction on shuffled mini-batches; deterministic per seed.
/// A non-finite loss raises RuntimeFailure carrying the last finite model.
[[nodiscard]] TrainResult vae_train(const Eigen::MatrixXd& training, const Eigen::MatrixXd& validation,
                                    const VaeShape& shape, const TrainConfig& config,
                                    const EpochCallback& on_epoch = {});

class TrainingDiverged : public RuntimeFailure {
 public:
  TrainingDiverged(const std::string& what, VAEModel last_good, TrainHistory history)
      : RuntimeFailure(what), last_good_(std::move(last_good)), history_(std::move(history)) {}
  [[nodiscard]] const VAEModel& last_good() const noexcept { return last_good_; }
  [[nodiscard]] const TrainHistory& history() const noexcept { return history_; }

 private:
  VAEModel last_good_;
  TrainHistory history_;
};

/// Means over consecutive non-overlapping windows of `window` values; a
/// trailing partial window is dropped.
[[nodiscard]] std::vector<double> block_means(const std::vector<double>& values, std::size_t window);

}  // namespace fdsi::latent
