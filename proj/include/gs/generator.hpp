#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "gs/autodiff.hpp"
#include "gs/tensor.hpp"

namespace gs {

enum class Activation { Relu, Elu, Tanh };

// Layer kinds a block may contain. Parameter fields are indices into
// GeneratorNet::params().
namespace layer {
struct Dense {
  std::size_t in, out;
  std::size_t weight, bias;
};
struct Reshape {
  Shape shape;  // per-sample
};
struct Conv {
  std::size_t in_channels, out_channels, kernel, stride, pad;
  std::size_t weight, bias;
};
struct ConvTranspose {
  std::size_t in_channels, out_channels, kernel, stride, pad;
  std::size_t weight, bias;
};
struct Upsample {
  std::size_t factor;
};
struct Act {
  Activation kind;
};
/// h ← h + upsample(skip input `slot`, factor); slot 0 is the first skip.
struct MergeSkip {
  std::size_t slot;
  std::size_t upsample;
};
}  // namespace layer

using Layer = std::variant<layer::Dense, layer::Reshape, layer::Conv, layer::ConvTranspose, layer::Upsample,
                           layer::Act, layer::MergeSkip>;

/// One block B_i. Shapes exclude the batch axis.
struct Block {
  Shape main_input;
  /// Source block of each skip input, strictly ascending, each < this block's index - 1.
  std::vector<std::size_t> skip_sources;
  std::vector<Layer> layers;
  Shape output;
};

/// A tensor that crosses a cut: produced by block `source` (or the latent when
/// source is nullopt) and consumed at or after the cut.
struct CutSlot {
  std::optional<std::size_t> source;
  Shape shape;
  std::size_t offset;  // position inside the packed input vector
};

/// G₀ = B_{d-1} ∘ … ∘ B₀. Weights are plain tensors; forward passes bind them
/// to a tape either as constants or as trainable leaves.
class GeneratorNet {
 public:
  GeneratorNet(std::string recipe, std::size_t latent_dim, std::vector<Block> blocks, std::vector<Tensor> params);

  const std::string& recipe() const { return recipe_; }
  std::size_t depth() const { return blocks_.size(); }
  std::size_t latent_dim() const { return latent_dim_; }
  const Shape& image_shape() const { return blocks_.back().output; }
  std::size_t output_dim() const { return numel(image_shape()); }
  const std::vector<Block>& blocks() const { return blocks_; }

  std::vector<Tensor>& params() { return params_; }
  const std::vector<Tensor>& params() const { return params_; }
  std::size_t weight_count() const;
  /// Weights belonging to blocks first..d-1.
  std::size_t weight_count(std::size_t first_block) const;

  /// Packed input layout at cut c: the main input of B_c first, then every
  /// other block output consumed at or after c, ascending by source block.
  std::vector<CutSlot> cut_slots(std::size_t cut) const;
  /// k_c: total scalars in the cut input. k_0 is the latent dimension.
  std::size_t input_dim(std::size_t cut) const;

  /// Leaves for every parameter, in params() order.
  std::vector<Var> bind(Tape& tape, bool requires_grad) const;

  /// Runs blocks [cut, d) on a tape. `inputs` follow cut_slots(cut) order and
  /// carry a leading batch axis. Returns [N, C, H, W].
  Var forward_from(std::size_t cut, std::span<const Var> inputs, std::span<const Var> params) const;

  /// z0 of shape [k0] → image [C,H,W].
  Tensor forward(const Tensor& z0) const;

  /// B_{c-1} ∘ … ∘ B₀ (z0), packed as in cut_slots(c).
  Tensor lift(const Tensor& z0, std::size_t cut) const;

  /// `count` images G₀(z), z ~ N(0, I), deterministic in seed.
  std::vector<Tensor> sample(std::size_t count, std::uint64_t seed) const;

  /// FNV-1a over all parameter bytes; used to check that weights were not touched.
  std::uint64_t weight_checksum() const;

 private:
  Var run_block(std::size_t index, Var h, std::span<const Var> skips, std::span<const Var> params) const;

  std::string recipe_;
  std::size_t latent_dim_;
  std::vector<Block> blocks_;
  std::vector<Tensor> params_;
};

/// G_c: view of a GeneratorNet with its first c blocks removed. Borrows the
/// net; the net must outlive the view.
class CutGenerator {
 public:
  CutGenerator(const GeneratorNet& net, std::size_t cut);

  const GeneratorNet& net() const { return *net_; }
  std::size_t cut_index() const { return cut_; }
  std::size_t input_dim() const { return input_dim_; }
  std::size_t output_dim() const { return net_->output_dim(); }
  const std::vector<CutSlot>& slots() const { return slots_; }

  /// zc packed per slots() → image [C,H,W].
  Tensor forward(const Tensor& zc) const;
  /// Same on a tape; zc is a flat [k_c] Var. Returns the image as [1,C,H,W].
  Var forward(const Var& zc, std::span<const Var> params) const;

 private:
  const GeneratorNet* net_;
  std::size_t cut_;
  std::vector<CutSlot> slots_;
  std::size_t input_dim_;
};

inline CutGenerator cut(const GeneratorNet& net, std::size_t c) { return CutGenerator(net, c); }

// ---- recipes ----------------------------------------------------------------

/// Stable recipe ids accepted by make_recipe and stored in weight files.
inline constexpr std::string_view kDcganMini = "dcgan-mini";
inline constexpr std::string_view kBeganMini = "began-mini";
inline constexpr std::string_view kVaeMini = "vae-mini";

std::vector<std::string> recipe_ids();
/// Builds a recipe with freshly initialised weights (He-normal, zero bias).
GeneratorNet make_recipe(std::string_view id, std::uint64_t seed);

/// Tunable parameters per pixel.
double overparam_ratio(std::size_t tunable, std::size_t pixels);

// ---- weight files -----------------------------------------------------------

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void save_weights(const GeneratorNet& net, const std::filesystem::path& path);
/// Rejects bad magic/version/checksum, truncation, and (if given) a recipe other than `expected_recipe`.
GeneratorNet load_weights(const std::filesystem::path& path, std::optional<std::string_view> expected_recipe = {});

}  // namespace gs
