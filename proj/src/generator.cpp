#include "gs/generator.hpp"

#include <cmath>
#include <cstring>
#include <random>
#include <stdexcept>

namespace gs {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

Shape batched(std::size_t n, const Shape& s) {
  Shape out{n};
  out.insert(out.end(), s.begin(), s.end());
  return out;
}

}  // namespace

// ---- GeneratorNet ----------------------------------------------------------

GeneratorNet::GeneratorNet(std::string recipe, std::size_t latent_dim, std::vector<Block> blocks,
                           std::vector<Tensor> params)
    : recipe_(std::move(recipe)), latent_dim_(latent_dim), blocks_(std::move(blocks)), params_(std::move(params)) {
  if (blocks_.empty()) throw std::invalid_argument("generator needs at least one block");
  if (latent_dim_ == 0) throw std::invalid_argument("latent dimension must be positive");
  if (blocks_[0].main_input != Shape{latent_dim_}) {
    throw ShapeError("block 0 must take the latent " + to_string({latent_dim_}) + ", declared " +
                     to_string(blocks_[0].main_input));
  }
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const Block& b = blocks_[i];
    if (i > 0 && b.main_input != blocks_[i - 1].output) {
      throw ShapeError("block " + std::to_string(i) + " main input " + to_string(b.main_input) +
                       " does not match block " + std::to_string(i - 1) + " output " + to_string(blocks_[i - 1].output));
    }
    for (std::size_t k = 0; k < b.skip_sources.size(); ++k) {
      const std::size_t s = b.skip_sources[k];
      if (s + 1 >= i || (k > 0 && s <= b.skip_sources[k - 1])) {
        throw std::invalid_argument("block " + std::to_string(i) + ": skip sources must be ascending and precede block " +
                                    std::to_string(i - 1));
      }
    }
  }

  // Declared output shapes must match what the layers actually produce.
  Tape tape;
  std::vector<Var> p = bind(tape, false);
  std::vector<std::optional<Var>> outputs(blocks_.size());
  Var h = tape.leaf(Tensor({1, latent_dim_}));
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    std::vector<Var> skips;
    for (std::size_t s : blocks_[i].skip_sources) skips.push_back(*outputs[s]);
    h = run_block(i, h, skips, p);
    if (h.shape() != batched(1, blocks_[i].output)) {
      throw ShapeError("block " + std::to_string(i) + " declares output " + to_string(blocks_[i].output) +
                       " but produces " + to_string(h.shape()));
    }
    outputs[i] = h;
  }

  for (std::size_t c = 1; c < blocks_.size(); ++c) {
    if (input_dim(c) < latent_dim_) {
      throw std::invalid_argument("generator is not expansive: k_" + std::to_string(c) + " = " +
                                  std::to_string(input_dim(c)) + " < k_0 = " + std::to_string(latent_dim_));
    }
  }
}

std::size_t GeneratorNet::weight_count() const { return weight_count(0); }

std::size_t GeneratorNet::weight_count(std::size_t first_block) const {
  std::size_t total = 0;
  for (std::size_t i = first_block; i < blocks_.size(); ++i) {
    for (const Layer& l : blocks_[i].layers) {
      std::visit(Overloaded{
                     [&](const layer::Dense& d) { total += params_[d.weight].size() + params_[d.bias].size(); },
                     [&](const layer::Conv& d) { total += params_[d.weight].size() + params_[d.bias].size(); },
                     [&](const layer::ConvTranspose& d) { total += params_[d.weight].size() + params_[d.bias].size(); },
                     [](const auto&) {},
                 },
                 l);
    }
  }
  return total;
}

std::vector<CutSlot> GeneratorNet::cut_slots(std::size_t cut) const {
  if (cut >= blocks_.size()) {
    throw std::out_of_range("cannot cut all blocks: cut index " + std::to_string(cut) + " with depth " +
                            std::to_string(blocks_.size()));
  }
  if (cut == 0) return {CutSlot{std::nullopt, {latent_dim_}, 0}};
  std::vector<CutSlot> slots{CutSlot{cut - 1, blocks_[cut - 1].output, 0}};
  std::size_t offset = numel(blocks_[cut - 1].output);
  for (std::size_t src = 0; src + 1 < cut; ++src) {
    bool consumed = false;
    for (std::size_t t = cut; t < blocks_.size() && !consumed; ++t) {
      for (std::size_t s : blocks_[t].skip_sources) consumed = consumed || s == src;
    }
    if (!consumed) continue;
    slots.push_back(CutSlot{src, blocks_[src].output, offset});
    offset += numel(blocks_[src].output);
  }
  return slots;
}

std::size_t GeneratorNet::input_dim(std::size_t cut) const {
  std::size_t k = 0;
  for (const CutSlot& s : cut_slots(cut)) k += numel(s.shape);
  return k;
}

std::vector<Var> GeneratorNet::bind(Tape& tape, bool requires_grad) const {
  std::vector<Var> vars;
  vars.reserve(params_.size());
  for (const Tensor& t : params_) vars.push_back(tape.leaf(t, requires_grad));
  return vars;
}

Var GeneratorNet::run_block(std::size_t index, Var h, std::span<const Var> skips, std::span<const Var> params) const {
  const std::size_t n = h.shape()[0];
  for (const Layer& l : blocks_[index].layers) {
    h = std::visit(Overloaded{
                       [&](const layer::Dense& d) {
                         Var x = h.shape().size() == 2 ? h : reshape(h, {n, numel(h.shape()) / n});
                         return dense(x, params[d.weight], params[d.bias]);
                       },
                       [&](const layer::Reshape& r) { return reshape(h, batched(n, r.shape)); },
                       [&](const layer::Conv& c) { return conv2d(h, params[c.weight], params[c.bias], c.stride, c.pad); },
                       [&](const layer::ConvTranspose& c) {
                         return conv_transpose2d(h, params[c.weight], params[c.bias], c.stride, c.pad);
                       },
                       [&](const layer::Upsample& u) { return upsample_nearest(h, u.factor); },
                       [&](const layer::Act& a) {
                         switch (a.kind) {
                           case Activation::Relu: return relu(h);
                           case Activation::Elu: return elu(h);
                           case Activation::Tanh: return tanh(h);
                         }
                         return h;
                       },
                       [&](const layer::MergeSkip& m) {
                         if (m.slot >= skips.size()) throw ShapeError("merge references a missing skip input");
                         Var s = m.upsample > 1 ? upsample_nearest(skips[m.slot], m.upsample) : skips[m.slot];
                         return add(h, s);
                       },
                   },
                   l);
  }
  return h;
}

Var GeneratorNet::forward_from(std::size_t cut, std::span<const Var> inputs, std::span<const Var> params) const {
  const std::vector<CutSlot> slots = cut_slots(cut);
  if (inputs.size() != slots.size()) {
    throw ShapeError("cut " + std::to_string(cut) + " expects " + std::to_string(slots.size()) + " inputs, got " +
                     std::to_string(inputs.size()));
  }
  if (params.size() != params_.size()) throw ShapeError("parameter list length mismatch");
  const std::size_t n = inputs[0].shape()[0];
  std::vector<std::optional<Var>> outputs(blocks_.size());
  for (std::size_t k = 0; k < slots.size(); ++k) {
    if (inputs[k].shape() != batched(n, slots[k].shape)) {
      throw ShapeError("cut input " + std::to_string(k) + " must be " + to_string(batched(n, slots[k].shape)) +
                       ", got " + to_string(inputs[k].shape()));
    }
    if (slots[k].source) outputs[*slots[k].source] = inputs[k];
  }
  Var h = inputs[0];
  for (std::size_t i = cut; i < blocks_.size(); ++i) {
    std::vector<Var> skips;
    for (std::size_t s : blocks_[i].skip_sources) skips.push_back(*outputs[s]);
    h = run_block(i, h, skips, params);
    outputs[i] = h;
  }
  return h;
}

Tensor GeneratorNet::forward(const Tensor& z0) const {
  if (z0.size() != latent_dim_) {
    throw ShapeError("latent must have " + std::to_string(latent_dim_) + " entries, got " + std::to_string(z0.size()));
  }
  Tape tape;
  std::vector<Var> p = bind(tape, false);
  Var z = tape.leaf(z0.reshaped({1, latent_dim_}));
  const Var x = forward_from(0, std::span<const Var>(&z, 1), p);
  return x.value().reshaped(image_shape());
}

Tensor GeneratorNet::lift(const Tensor& z0, std::size_t cut) const {
  if (z0.size() != latent_dim_) {
    throw ShapeError("latent must have " + std::to_string(latent_dim_) + " entries, got " + std::to_string(z0.size()));
  }
  const std::vector<CutSlot> slots = cut_slots(cut);
  if (cut == 0) return z0.reshaped({latent_dim_});

  Tape tape;
  std::vector<Var> p = bind(tape, false);
  std::vector<std::optional<Var>> outputs(blocks_.size());
  Var h = tape.leaf(z0.reshaped({1, latent_dim_}));
  for (std::size_t i = 0; i < cut; ++i) {
    std::vector<Var> skips;
    for (std::size_t s : blocks_[i].skip_sources) skips.push_back(*outputs[s]);
    h = run_block(i, h, skips, p);
    outputs[i] = h;
  }
  Tensor zc({input_dim(cut)});
  for (const CutSlot& s : slots) {
    const Tensor& v = outputs[*s.source]->value();
    std::copy(v.data().begin(), v.data().end(), zc.data().begin() + static_cast<std::ptrdiff_t>(s.offset));
  }
  return zc;
}

std::vector<Tensor> GeneratorNet::sample(std::size_t count, std::uint64_t seed) const {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Tensor> images;
  images.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Tensor z({latent_dim_});
    for (double& v : z.data()) v = normal(rng);
    images.push_back(forward(z));
  }
  return images;
}

std::uint64_t GeneratorNet::weight_checksum() const {
  std::uint64_t h = 1469598103934665603ULL;
  for (const Tensor& t : params_) {
    for (double v : t.data()) {
      unsigned char bytes[sizeof(double)];
      std::memcpy(bytes, &v, sizeof(double));
      for (unsigned char b : bytes) {
        h ^= b;
        h *= 1099511628211ULL;
      }
    }
  }
  return h;
}

// ---- CutGenerator ----------------------------------------------------------

CutGenerator::CutGenerator(const GeneratorNet& net, std::size_t cut)
    : net_(&net), cut_(cut), slots_(net.cut_slots(cut)), input_dim_(net.input_dim(cut)) {}

Var CutGenerator::forward(const Var& zc, std::span<const Var> params) const {
  if (zc.value().size() != input_dim_) {
    throw ShapeError("cut input must have " + std::to_string(input_dim_) + " entries, got " +
                     std::to_string(zc.value().size()));
  }
  std::vector<Var> inputs;
  inputs.reserve(slots_.size());
  for (const CutSlot& s : slots_) inputs.push_back(slice(zc, s.offset, batched(1, s.shape)));
  return net_->forward_from(cut_, inputs, params);
}

Tensor CutGenerator::forward(const Tensor& zc) const {
  Tape tape;
  std::vector<Var> p = net_->bind(tape, false);
  const Var z = tape.leaf(zc.reshaped({zc.size()}));
  return forward(z, p).value().reshaped(net_->image_shape());
}

// ---- recipes ---------------------------------------------------------------

namespace {

class RecipeBuilder {
 public:
  explicit RecipeBuilder(std::uint64_t seed) : rng_(seed) {}

  layer::Dense dense(std::size_t in, std::size_t out) {
    return {in, out, add_param({out, in}, std::sqrt(2.0 / static_cast<double>(in))), add_param({out}, 0.0)};
  }
  layer::Conv conv(std::size_t cin, std::size_t cout, std::size_t k, std::size_t stride, std::size_t pad) {
    const double fan_in = static_cast<double>(cin * k * k);
    return {cin, cout, k, stride, pad, add_param({cout, cin, k, k}, std::sqrt(2.0 / fan_in)), add_param({cout}, 0.0)};
  }
  layer::ConvTranspose conv_t(std::size_t cin, std::size_t cout, std::size_t k, std::size_t stride, std::size_t pad) {
    // Each output pixel sees about cin·k²/stride² inputs.
    const double fan_in = static_cast<double>(cin * k * k) / static_cast<double>(stride * stride);
    return {cin, cout, k, stride, pad, add_param({cin, cout, k, k}, std::sqrt(2.0 / fan_in)), add_param({cout}, 0.0)};
  }

  std::vector<Tensor> take() { return std::move(params_); }

 private:
  std::size_t add_param(Shape shape, double stddev) {
    Tensor t(std::move(shape));
    std::normal_distribution<double> normal(0.0, 1.0);
    if (stddev > 0.0) {
      for (double& v : t.data()) v = stddev * normal(rng_);
    }
    params_.push_back(std::move(t));
    return params_.size() - 1;
  }

  std::mt19937_64 rng_;
  std::vector<Tensor> params_;
};

constexpr std::size_t kLatent = 32;

GeneratorNet dcgan_mini(std::uint64_t seed) {
  RecipeBuilder b(seed);
  std::vector<Block> blocks;
  blocks.push_back({{kLatent}, {}, {b.dense(kLatent, 512), layer::Act{Activation::Relu}, layer::Reshape{{32, 4, 4}}},
                    {32, 4, 4}});
  blocks.push_back({{32, 4, 4}, {}, {b.conv_t(32, 16, 4, 2, 1), layer::Act{Activation::Relu}}, {16, 8, 8}});
  blocks.push_back({{16, 8, 8}, {}, {b.conv_t(16, 8, 4, 2, 1), layer::Act{Activation::Relu}}, {8, 16, 16}});
  blocks.push_back({{8, 16, 16}, {}, {b.conv_t(8, 1, 4, 2, 1), layer::Act{Activation::Tanh}}, {1, 32, 32}});
  return GeneratorNet(std::string(kDcganMini), kLatent, std::move(blocks), b.take());
}

// Block 0's output also feeds block 2 through an upsampled additive skip.
GeneratorNet began_mini(std::uint64_t seed) {
  RecipeBuilder b(seed);
  std::vector<Block> blocks;
  blocks.push_back({{kLatent}, {}, {b.dense(kLatent, 512), layer::Act{Activation::Elu}, layer::Reshape{{8, 8, 8}}},
                    {8, 8, 8}});
  blocks.push_back({{8, 8, 8}, {},
                    {layer::Upsample{2}, b.conv(8, 8, 3, 1, 1), layer::Act{Activation::Elu}}, {8, 16, 16}});
  blocks.push_back({{8, 16, 16}, {0},
                    {layer::MergeSkip{0, 2}, b.conv(8, 8, 3, 1, 1), layer::Act{Activation::Elu}}, {8, 16, 16}});
  blocks.push_back({{8, 16, 16}, {},
                    {layer::Upsample{2}, b.conv(8, 1, 3, 1, 1), layer::Act{Activation::Tanh}}, {1, 32, 32}});
  return GeneratorNet(std::string(kBeganMini), kLatent, std::move(blocks), b.take());
}

GeneratorNet vae_mini(std::uint64_t seed) {
  RecipeBuilder b(seed);
  std::vector<Block> blocks;
  blocks.push_back({{kLatent}, {}, {b.dense(kLatent, 512), layer::Act{Activation::Elu}, layer::Reshape{{32, 4, 4}}},
                    {32, 4, 4}});
  blocks.push_back({{32, 4, 4}, {},
                    {layer::Upsample{2}, b.conv(32, 16, 3, 1, 1), layer::Act{Activation::Elu}}, {16, 8, 8}});
  blocks.push_back({{16, 8, 8}, {},
                    {layer::Upsample{2}, b.conv(16, 8, 3, 1, 1), layer::Act{Activation::Elu}}, {8, 16, 16}});
  blocks.push_back({{8, 16, 16}, {},
                    {layer::Upsample{2}, b.conv(8, 1, 3, 1, 1), layer::Act{Activation::Tanh}}, {1, 32, 32}});
  return GeneratorNet(std::string(kVaeMini), kLatent, std::move(blocks), b.take());
}

}  // namespace

std::vector<std::string> recipe_ids() {
  return {std::string(kDcganMini), std::string(kBeganMini), std::string(kVaeMini)};
}

GeneratorNet make_recipe(std::string_view id, std::uint64_t seed) {
  if (id == kDcganMini) return dcgan_mini(seed);
  if (id == kBeganMini) return began_mini(seed);
  if (id == kVaeMini) return vae_mini(seed);
  throw std::invalid_argument("unknown recipe '" + std::string(id) + "' (expected dcgan-mini, began-mini or vae-mini)");
}

double overparam_ratio(std::size_t tunable, std::size_t pixels) {
  if (pixels == 0) throw std::invalid_argument("pixel count must be positive");
  return static_cast<double>(tunable) / static_cast<double>(pixels);
}

}  // namespace gs
