#include "gs/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "gs/optim.hpp"

namespace gs {

namespace {

Tensor he_normal(Shape shape, double fan_in, std::mt19937_64& rng) {
  Tensor t(std::move(shape));
  std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / fan_in));
  for (double& v : t.data()) v = normal(rng);
  return t;
}

// Encoder parameter order: three stride-2 convs (w, b), then μ head, then log σ² head.
constexpr std::size_t kChannels[4] = {0, 8, 16, 32};

}  // namespace

Encoder::Encoder(const Shape& image_shape, std::size_t latent_dim, std::uint64_t seed)
    : image_shape_(image_shape), latent_dim_(latent_dim) {
  if (image_shape.size() != 3 || image_shape[1] % 8 != 0 || image_shape[2] % 8 != 0) {
    throw ShapeError("encoder needs [C,H,W] images with H and W divisible by 8, got " + to_string(image_shape));
  }
  std::mt19937_64 rng(seed);
  std::size_t cin = image_shape[0];
  for (int l = 1; l <= 3; ++l) {
    const std::size_t cout = kChannels[l];
    params_.push_back(he_normal({cout, cin, 3, 3}, static_cast<double>(cin * 9), rng));
    params_.push_back(Tensor({cout}));
    cin = cout;
  }
  const std::size_t flat = kChannels[3] * (image_shape[1] / 8) * (image_shape[2] / 8);
  params_.push_back(he_normal({latent_dim, flat}, static_cast<double>(flat), rng));
  for (double& v : params_.back().data()) v *= 0.5;
  params_.push_back(Tensor({latent_dim}));
  params_.push_back(Tensor({latent_dim, flat}));  // log σ² head starts at 0 → σ = 1
  params_.push_back(Tensor({latent_dim}));
}

Encoder::Output Encoder::forward(const Var& images, std::span<const Var> p) const {
  Var h = images;
  for (std::size_t l = 0; l < 3; ++l) h = elu(conv2d(h, p[2 * l], p[2 * l + 1], 2, 1));
  const std::size_t n = h.shape()[0];
  h = reshape(h, {n, numel(h.shape()) / n});
  return {dense(h, p[6], p[7]), dense(h, p[8], p[9])};
}

Tensor Encoder::encode_mean(const Tensor& image) const {
  Tape tape;
  std::vector<Var> p;
  for (const Tensor& t : params_) p.push_back(tape.leaf(t));
  Shape s{1};
  s.insert(s.end(), image_shape_.begin(), image_shape_.end());
  const Output out = forward(tape.leaf(image.reshaped(s)), p);
  return out.mu.value().reshaped({latent_dim_});
}

double gaussian_kl(std::span<const double> mu, std::span<const double> logvar) {
  double kl = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    // exp(lv) − lv − 1 ≥ 0 and μ² ≥ 0 term by term.
    kl += 0.5 * (mu[i] * mu[i] + (std::expm1(logvar[i]) - logvar[i]));
  }
  return kl;
}

std::pair<TrainResult, Encoder> train_vae_with_encoder(const TrainConfig& cfg, const std::vector<Tensor>& images,
                                                       const std::function<void(const EpochLog&)>& on_epoch) {
  if (cfg.epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (cfg.batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
  if (!(cfg.beta >= 0.0)) throw std::invalid_argument("KL weight must be >= 0");
  if (!(cfg.learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (images.empty()) throw std::invalid_argument("training set is empty");

  GeneratorNet decoder = make_recipe(cfg.recipe, cfg.seed);
  const Shape& shape = decoder.image_shape();
  for (const Tensor& img : images) {
    if (img.shape() != shape) {
      throw ShapeError("training image " + to_string(img.shape()) + " does not match decoder output " + to_string(shape));
    }
  }
  const std::size_t k = decoder.latent_dim();
  const std::size_t pixels = numel(shape);
  Encoder encoder(shape, k, cfg.seed + 1);

  std::vector<Tensor*> params;
  for (Tensor& t : encoder.params()) params.push_back(&t);
  for (Tensor& t : decoder.params()) params.push_back(&t);
  std::vector<Adam> adams;
  for (Tensor* t : params) adams.emplace_back(t->size());

  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<std::size_t> order(images.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainResult result{decoder, {}};
  Tape tape;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double sum_loss = 0.0, sum_rec = 0.0, sum_kl = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t b = std::min(cfg.batch_size, order.size() - start);
      Tensor batch({b, shape[0], shape[1], shape[2]});
      for (std::size_t i = 0; i < b; ++i) {
        const Tensor& img = images[order[start + i]];
        std::copy(img.data().begin(), img.data().end(), batch.data().begin() + static_cast<std::ptrdiff_t>(i * pixels));
      }
      Tensor eps({b, k});
      for (double& v : eps.data()) v = normal(rng);

      tape.reset();
      std::vector<Var> enc_p, dec_p;
      for (const Tensor& t : encoder.params()) enc_p.push_back(tape.leaf(t, true));
      for (const Tensor& t : decoder.params()) dec_p.push_back(tape.leaf(t, true));
      double kl_value = 0.0, rec_value = 0.0;
      try {
        const Var x = tape.leaf(batch);
        const Encoder::Output q = encoder.forward(x, enc_p);
        const Var z = add(q.mu, mul(exp(scale(q.logvar, 0.5)), tape.leaf(eps)));
        const Var xhat = decoder.forward_from(0, std::span<const Var>(&z, 1), dec_p);
        const Var rec = scale(mse(xhat, x), static_cast<double>(pixels));
        // Σ(e^lv + μ² − lv) / 2b; the constant −k/2 does not affect gradients.
        const Var kl = scale(sum(sub(add(exp(q.logvar), square(q.mu)), q.logvar)), 0.5 / static_cast<double>(b));
        const Var loss = add(rec, scale(kl, cfg.beta));
        tape.backward(loss);
        rec_value = rec.value()[0];
        kl_value = gaussian_kl(q.mu.value().data(), q.logvar.value().data()) / static_cast<double>(b);
      } catch (const NumericError& e) {
        throw TrainingError("training diverged at epoch " + std::to_string(epoch + 1) + ", batch starting at " +
                            std::to_string(start) + ": " + e.what() + " (try a smaller learning rate)");
      }
      for (std::size_t p = 0; p < params.size(); ++p) {
        const Var v = p < enc_p.size() ? enc_p[p] : dec_p[p - enc_p.size()];
        const Tensor g = v.grad();
        adams[p].step(params[p]->data(), g.data(), cfg.learning_rate);
      }
      sum_rec += rec_value * static_cast<double>(b);
      sum_kl += kl_value * static_cast<double>(b);
      sum_loss += (rec_value + cfg.beta * kl_value) * static_cast<double>(b);
    }
    const double n = static_cast<double>(images.size());
    EpochLog entry{epoch + 1, sum_loss / n, sum_rec / n, sum_kl / n};
    if (!std::isfinite(entry.loss)) throw TrainingError("training diverged: non-finite epoch loss");
    result.log.push_back(entry);
    if (on_epoch) on_epoch(entry);
  }
  result.decoder = decoder;
  return {std::move(result), std::move(encoder)};
}

TrainResult train_vae(const TrainConfig& cfg, const std::vector<Tensor>& images,
                      const std::function<void(const EpochLog&)>& on_epoch) {
  return std::move(train_vae_with_encoder(cfg, images, on_epoch).first);
}

}  // namespace gs
