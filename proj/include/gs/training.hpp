#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "gs/generator.hpp"

namespace gs {

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 64;
  double learning_rate = 1e-3;
  double beta = 1.0;  // KL weight
  std::uint64_t seed = 0;
  std::string recipe = "vae-mini";  // decoder architecture
};

struct EpochLog {
  std::size_t epoch;
  double loss;            // mean per-image objective
  double reconstruction;  // mean per-image sum of squared errors
  double kl;              // mean per-image KL(q(z|x) ‖ N(0,I))
};

struct TrainResult {
  GeneratorNet decoder;
  std::vector<EpochLog> log;
};

/// Convolutional encoder mapping [N,1,H,W] images to (μ, log σ²).
class Encoder {
 public:
  Encoder(const Shape& image_shape, std::size_t latent_dim, std::uint64_t seed);

  std::vector<Tensor>& params() { return params_; }
  const std::vector<Tensor>& params() const { return params_; }

  struct Output {
    Var mu, logvar;
  };
  Output forward(const Var& images, std::span<const Var> params) const;
  /// μ for a single image [C,H,W].
  Tensor encode_mean(const Tensor& image) const;

 private:
  Shape image_shape_;
  std::size_t latent_dim_;
  std::vector<Tensor> params_;
};

/// Gaussian-likelihood VAE: per image, ‖x̂ − x‖² + β·KL. The decoder is a
/// GeneratorNet of recipe cfg.recipe. Bit-reproducible in (cfg, images).
/// `on_epoch`, if set, is called after every epoch.
TrainResult train_vae(const TrainConfig& cfg, const std::vector<Tensor>& images,
                      const std::function<void(const EpochLog&)>& on_epoch = {});

/// Same, also returning the trained encoder.
std::pair<TrainResult, Encoder> train_vae_with_encoder(const TrainConfig& cfg, const std::vector<Tensor>& images,
                                                       const std::function<void(const EpochLog&)>& on_epoch = {});

/// Closed-form KL(N(μ, diag σ²) ‖ N(0, I)) summed over components.
double gaussian_kl(std::span<const double> mu, std::span<const double> logvar);

}  // namespace gs
