#include "fdsi/vae.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace fdsi::latent {
namespace {

using Map = Eigen::Map<Eigen::MatrixXd>;
using CMap = Eigen::Map<const Eigen::MatrixXd>;
using VMap = Eigen::Map<Eigen::VectorXd>;
using CVMap = Eigen::Map<const Eigen::VectorXd>;

// Parameter blocks in storage order.
enum Block { W1, B1, W2, B2, WM, BM, WV, BV, V1, C1, V2, C2, V3, C3, kBlocks };

struct Layout {
  std::array<Eigen::Index, kBlocks> rows{};
  std::array<Eigen::Index, kBlocks> cols{};
  std::array<Eigen::Index, kBlocks + 1> offset{};

  explicit Layout(const VaeShape& s) {
    const auto m = static_cast<Eigen::Index>(s.frame_size);
    const auto h1 = static_cast<Eigen::Index>(s.hidden_frame);
    const auto h1f = static_cast<Eigen::Index>(s.hidden_frame * s.frames);
    const auto h2 = static_cast<Eigen::Index>(s.hidden_joint);
    const auto l = static_cast<Eigen::Index>(s.latent);
    const std::array<std::pair<Eigen::Index, Eigen::Index>, kBlocks> dims = {{{h1, m},
                                                                              {h1, 1},
                                                                              {h2, h1f},
                                                                              {h2, 1},
                                                                              {l, h2},
                                                                              {l, 1},
                                                                              {l, h2},
                                                                              {l, 1},
                                                                              {h2, l},
                                                                              {h2, 1},
                                                                              {h1f, h2},
                                                                              {h1f, 1},
                                                                              {m, h1},
                                                                              {m, 1}}};
    for (int b = 0; b < kBlocks; ++b) {
      rows[b] = dims[b].first;
      cols[b] = dims[b].second;
      offset[b + 1] = offset[b] + rows[b] * cols[b];
    }
  }
  [[nodiscard]] CMap cview(const Eigen::VectorXd& p, int b) const { return {p.data() + offset[b], rows[b], cols[b]}; }
  [[nodiscard]] Map view(Eigen::VectorXd& p, int b) const { return {p.data() + offset[b], rows[b], cols[b]}; }
  [[nodiscard]] CVMap cvec(const Eigen::VectorXd& p, int b) const { return {p.data() + offset[b], rows[b]}; }
};

Eigen::MatrixXd leaky(const Eigen::MatrixXd& a) {
  return a.unaryExpr([](double v) { return v > 0 ? v : kLeakySlope * v; });
}

void leaky_backward(Eigen::MatrixXd& grad, const Eigen::MatrixXd& pre) {
  grad.array() *= pre.array().unaryExpr([](double v) { return v > 0 ? 1.0 : kLeakySlope; });
}

Eigen::MatrixXd affine(const CMap& w, const CVMap& b, const Eigen::Ref<const Eigen::MatrixXd>& x) {
  Eigen::MatrixXd out = w * x;
  out.colwise() += b;
  return out;
}

struct EncoderPass {
  Eigen::MatrixXd a1, a2, mu, logvar;
  Eigen::MatrixXd h1, h2;
};

EncoderPass run_encoder(const Layout& lay, const VaeShape& s, const Eigen::VectorXd& p, const Eigen::MatrixXd& x) {
  const auto batch = x.cols();
  const auto m = static_cast<Eigen::Index>(s.frame_size);
  const auto f = static_cast<Eigen::Index>(s.frames);
  const auto h1 = static_cast<Eigen::Index>(s.hidden_frame);
  EncoderPass e;
  e.a1 = affine(lay.cview(p, W1), lay.cvec(p, B1), CMap(x.data(), m, f * batch));
  e.h1 = leaky(e.a1);
  e.a2 = affine(lay.cview(p, W2), lay.cvec(p, B2), CMap(e.h1.data(), h1 * f, batch));
  e.h2 = leaky(e.a2);
  e.mu = affine(lay.cview(p, WM), lay.cvec(p, BM), e.h2);
  e.logvar = affine(lay.cview(p, WV), lay.cvec(p, BV), e.h2);
  return e;
}

struct DecoderPass {
  Eigen::MatrixXd a3, a4, g1, g2, y;
};

DecoderPass run_decoder(const Layout& lay, const VaeShape& s, const Eigen::VectorXd& p, const Eigen::MatrixXd& z) {
  const auto batch = z.cols();
  const auto m = static_cast<Eigen::Index>(s.frame_size);
  const auto f = static_cast<Eigen::Index>(s.frames);
  const auto h1 = static_cast<Eigen::Index>(s.hidden_frame);
  DecoderPass d;
  d.a3 = affine(lay.cview(p, V1), lay.cvec(p, C1), z);
  d.g1 = leaky(d.a3);
  d.a4 = affine(lay.cview(p, V2), lay.cvec(p, C2), d.g1);
  d.g2 = leaky(d.a4);
  d.y = affine(lay.cview(p, V3), lay.cvec(p, C3), CMap(d.g2.data(), h1, f * batch));
  d.y.resize(m * f, batch);
  return d;
}

// Reconstructions start near the centre.
constexpr double kOutputGain = 0.1;
// Start with small posterior noise so early epochs are not spent shrinking it.
constexpr double kInitialLogVar = -6.0;

void check_finite(const LossParts& parts) {
  if (!std::isfinite(parts.total)) {
    std::ostringstream msg;
    msg << "non-finite VAE loss (recon " << parts.recon << ", kl " << parts.kl << ")";
    throw RuntimeFailure(msg.str());
  }
}

}  // namespace

std::size_t VaeShape::parameter_count() const noexcept {
  return static_cast<std::size_t>(Layout(*this).offset[kBlocks]);
}

void VaeShape::validate() const {
  require(frame_size > 0 && frames > 0, "VAE input shape must be positive");
  require(hidden_frame > 0 && hidden_joint > 0 && latent > 0, "VAE layer widths must be positive");
}

VAEModel::VAEModel(const VaeShape& shape, std::uint64_t seed, Eigen::VectorXd center)
    : shape_(shape), center_(std::move(center)) {
  shape_.validate();
  if (center_.size() == 0) center_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(shape_.input_dim()));
  require(static_cast<std::size_t>(center_.size()) == shape_.input_dim(), "VAE centre does not match its shape");
  const Layout lay(shape_);
  params_ = Eigen::VectorXd::Zero(lay.offset[kBlocks]);
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double leaky_gain = std::sqrt(2.0 / (1.0 + kLeakySlope * kLeakySlope));
  auto fill = [&](int b, double gain) {
    auto w = lay.view(params_, b);
    const double sd = gain / std::sqrt(static_cast<double>(w.cols()));
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
      for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = sd * normal(rng);
    }
  };
  fill(W1, leaky_gain);
  fill(W2, leaky_gain);
  fill(WM, 1.0);
  fill(WV, 0.01);
  fill(V1, leaky_gain);
  fill(V2, leaky_gain);
  fill(V3, kOutputGain);
  lay.view(params_, BV).setConstant(kInitialLogVar);
}

VAEModel::VAEModel(const VaeShape& shape, Eigen::VectorXd parameters, Eigen::VectorXd center)
    : shape_(shape), params_(std::move(parameters)), center_(std::move(center)) {
  shape_.validate();
  require(static_cast<std::size_t>(center_.size()) == shape_.input_dim(), "VAE centre does not match its shape");
  require(static_cast<std::size_t>(params_.size()) == shape_.parameter_count(),
          "VAE parameter vector does not match its shape");
  require(params_.allFinite(), "VAE parameters must be finite");
}

Eigen::MatrixXd VAEModel::centred(const Eigen::MatrixXd& x) const { return x.colwise() - center_; }

VAEModel::Encoding VAEModel::encode_distribution(const Eigen::MatrixXd& x) const {
  check_data(x);
  auto e = run_encoder(Layout(shape_), shape_, params_, centred(x));
  return {std::move(e.mu), std::move(e.logvar)};
}

Eigen::MatrixXd VAEModel::encode(const Eigen::MatrixXd& x) const { return encode_distribution(x).mu; }

Eigen::MatrixXd VAEModel::encode_sample(const Eigen::MatrixXd& x, Rng& rng) const {
  auto enc = encode_distribution(x);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Eigen::Index j = 0; j < enc.mu.cols(); ++j) {
    for (Eigen::Index i = 0; i < enc.mu.rows(); ++i) enc.mu(i, j) += std::exp(0.5 * enc.logvar(i, j)) * normal(rng);
  }
  return enc.mu;
}

Eigen::MatrixXd VAEModel::decode(const Eigen::MatrixXd& xi) const {
  check_latent(xi);
  Eigen::MatrixXd y = run_decoder(Layout(shape_), shape_, params_, xi).y;
  y.colwise() += center_;
  return y;
}

double kl_divergence(const Eigen::MatrixXd& mu, const Eigen::MatrixXd& logvar) {
  require(mu.rows() == logvar.rows() && mu.cols() == logvar.cols(), "mu and logvar differ in shape");
  if (mu.cols() == 0) return 0.0;
  const double sum = (1.0 + logvar.array() - mu.array().square() - logvar.array().exp()).sum();
  return 0.5 * -sum / static_cast<double>(mu.cols()) + 0.0;  // + 0.0 drops the sign of an exact zero
}

double reconstruction_loss(const Eigen::MatrixXd& x, const Eigen::MatrixXd& x_hat) {
  require(x.rows() == x_hat.rows() && x.cols() == x_hat.cols(), "reconstruction shape mismatch");
  if (x.cols() == 0) return 0.0;
  return (x - x_hat).squaredNorm() / static_cast<double>(x.cols());
}

LossParts VAEModel::loss(const Eigen::MatrixXd& x, const Eigen::MatrixXd& eta, double omega,
                         Eigen::VectorXd* grad) const {
  check_data(x);
  require(eta.rows() == static_cast<Eigen::Index>(shape_.latent) && eta.cols() == x.cols(),
          "noise matrix must be latent x batch");
  require(x.cols() > 0, "loss needs a non-empty batch");
  const Layout lay(shape_);
  const auto batch = x.cols();
  const double inv_b = 1.0 / static_cast<double>(batch);

  const Eigen::MatrixXd xc = centred(x);
  const auto enc = run_encoder(lay, shape_, params_, xc);
  const Eigen::MatrixXd sigma = (0.5 * enc.logvar.array()).exp().matrix();
  const Eigen::MatrixXd z = enc.mu + sigma.cwiseProduct(eta);
  const auto dec = run_decoder(lay, shape_, params_, z);

  LossParts parts;
  parts.recon = reconstruction_loss(xc, dec.y);
  parts.kl = kl_divergence(enc.mu, enc.logvar);
  parts.total = omega * parts.recon + parts.kl;
  check_finite(parts);
  if (grad == nullptr) return parts;

  const auto m = static_cast<Eigen::Index>(shape_.frame_size);
  const auto f = static_cast<Eigen::Index>(shape_.frames);
  const auto h1 = static_cast<Eigen::Index>(shape_.hidden_frame);
  grad->setZero(lay.offset[kBlocks]);
  auto& g = *grad;

  // Decoder.
  Eigen::MatrixXd dy = (2.0 * omega * inv_b) * (dec.y - xc);
  const CMap dy_frames(dy.data(), m, f * batch);
  const CMap g2_frames(dec.g2.data(), h1, f * batch);
  lay.view(g, V3).noalias() = dy_frames * g2_frames.transpose();
  lay.view(g, C3) = dy_frames.rowwise().sum();
  Eigen::MatrixXd da4 = lay.cview(params_, V3).transpose() * dy_frames;
  da4.resize(h1 * f, batch);
  leaky_backward(da4, dec.a4);
  lay.view(g, V2).noalias() = da4 * dec.g1.transpose();
  lay.view(g, C2) = da4.rowwise().sum();
  Eigen::MatrixXd da3 = lay.cview(params_, V2).transpose() * da4;
  leaky_backward(da3, dec.a3);
  lay.view(g, V1).noalias() = da3 * z.transpose();
  lay.view(g, C1) = da3.rowwise().sum();
  const Eigen::MatrixXd dz = lay.cview(params_, V1).transpose() * da3;

  // Latent heads, including the KL term.
  const Eigen::MatrixXd dmu = dz + inv_b * enc.mu;
  const Eigen::MatrixXd dlogvar =
      (0.5 * dz.array() * eta.array() * sigma.array() + 0.5 * inv_b * (enc.logvar.array().exp() - 1.0)).matrix();
  lay.view(g, WM).noalias() = dmu * enc.h2.transpose();
  lay.view(g, BM) = dmu.rowwise().sum();
  lay.view(g, WV).noalias() = dlogvar * enc.h2.transpose();
  lay.view(g, BV) = dlogvar.rowwise().sum();

  // Encoder.
  Eigen::MatrixXd da2 = lay.cview(params_, WM).transpose() * dmu + lay.cview(params_, WV).transpose() * dlogvar;
  leaky_backward(da2, enc.a2);
  const CMap h1_joint(enc.h1.data(), h1 * f, batch);
  lay.view(g, W2).noalias() = da2 * h1_joint.transpose();
  lay.view(g, B2) = da2.rowwise().sum();
  Eigen::MatrixXd da1 = lay.cview(params_, W2).transpose() * da2;
  da1.resize(h1, f * batch);
  leaky_backward(da1, enc.a1);
  lay.view(g, W1).noalias() = da1 * CMap(xc.data(), m, f * batch).transpose();
  lay.view(g, B1) = da1.rowwise().sum();
  return parts;
}

void TrainConfig::validate() const {
  require(epochs > 0, "training needs at least one epoch");
  require(batch_size > 0, "batch size must be positive");
  require(learning_rate > 0 && lr_decay > 0 && lr_decay <= 1, "learning rate and decay must be positive");
  require(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1 && adam_eps > 0, "invalid Adam constants");
  require(!omega_schedule.empty(), "omega schedule is empty");
  std::size_t next = 0;
  for (const auto& st : omega_schedule) {
    require(st.omega > 0, "omega must be positive");
    require(st.begin == next && st.end > st.begin, "omega stages must tile the epochs without gaps");
    next = st.end;
  }
  require(next >= epochs, "omega schedule must cover every epoch");
}

double TrainConfig::omega_at(std::size_t epoch) const {
  for (const auto& st : omega_schedule) {
    if (epoch >= st.begin && epoch < st.end) return st.omega;
  }
  throw ValidationError("no omega stage covers epoch " + std::to_string(epoch));
}

TrainResult vae_train(const Eigen::MatrixXd& training, const Eigen::MatrixXd& validation, const VaeShape& shape,
                      const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  shape.validate();
  require(static_cast<std::size_t>(training.rows()) == shape.input_dim(), "training data does not match VAE shape");
  require(training.cols() > 0, "training set is empty");
  require(validation.cols() == 0 || validation.rows() == training.rows(), "validation data does not match VAE shape");

  VAEModel model(shape, derive_seed(config.seed, 0), training.rowwise().mean());
  Rng rng = make_rng(config.seed, 1);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto n = static_cast<std::size_t>(training.cols());
  const auto latent = static_cast<Eigen::Index>(shape.latent);

  Eigen::VectorXd m1 = Eigen::VectorXd::Zero(model.parameters().size());
  Eigen::VectorXd m2 = m1;
  Eigen::VectorXd grad;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t step = 0;
  TrainHistory hist;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const double omega = config.omega_at(epoch);
    const double lr = config.learning_rate * std::pow(config.lr_decay, static_cast<double>(epoch));
    for (std::size_t i = n; i > 1; --i) {
      std::uniform_int_distribution<std::size_t> pick(0, i - 1);
      std::swap(order[i - 1], order[pick(rng)]);
    }
    double sum_total = 0.0;
    double sum_recon = 0.0;
    double sum_kl = 0.0;
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t b = std::min(config.batch_size, n - start);
      Eigen::MatrixXd xb(training.rows(), static_cast<Eigen::Index>(b));
      for (std::size_t c = 0; c < b; ++c) xb.col(static_cast<Eigen::Index>(c)) = training.col(static_cast<Eigen::Index>(order[start + c]));
      Eigen::MatrixXd eta(latent, static_cast<Eigen::Index>(b));
      for (Eigen::Index j = 0; j < eta.cols(); ++j) {
        for (Eigen::Index i = 0; i < latent; ++i) eta(i, j) = normal(rng);
      }
      LossParts parts;
      try {
        parts = model.loss(xb, eta, omega, &grad);
      } catch (const RuntimeFailure& e) {
        throw TrainingDiverged(std::string(e.what()) + " at epoch " + std::to_string(epoch), model, hist);
      }
      if (!grad.allFinite()) {
        throw TrainingDiverged("non-finite VAE gradient at epoch " + std::to_string(epoch), model, hist);
      }
      ++step;
      m1 = config.beta1 * m1 + (1.0 - config.beta1) * grad;
      m2 = config.beta2 * m2 + (1.0 - config.beta2) * grad.cwiseAbs2();
      const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
      model.parameters().array() -=
          lr * (m1.array() / c1) / ((m2.array() / c2).sqrt() + config.adam_eps);
      const auto w = static_cast<double>(b);
      sum_total += w * parts.total;
      sum_recon += w * parts.recon;
      sum_kl += w * parts.kl;
    }
    hist.train_total.push_back(sum_total / static_cast<double>(n));
    hist.train_recon.push_back(sum_recon / static_cast<double>(n));
    hist.train_kl.push_back(sum_kl / static_cast<double>(n));
    hist.omega.push_back(omega);
    if (validation.cols() > 0) {
      const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(latent, validation.cols());
      hist.val_total.push_back(model.loss(validation, zero, omega).total);
    }
    if (on_epoch) on_epoch(epoch, hist);
  }
  return {std::move(model), std::move(hist)};
}

std::vector<double> block_means(const std::vector<double>& values, std::size_t window) {
  require(window > 0, "window must be positive");
  std::vector<double> out;
  for (std::size_t start = 0; start + window <= values.size(); start += window) {
    out.push_back(std::accumulate(values.begin() + static_cast<std::ptrdiff_t>(start),
                                  values.begin() + static_cast<std::ptrdiff_t>(start + window), 0.0) /
                  static_cast<double>(window));
  }
  return out;
}

}  // namespace fdsi::latent
