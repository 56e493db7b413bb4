#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <vector>

#include "gs/tensor.hpp"

namespace gs {

/// Raised on misuse of the tape: stale handles, double backward, non-scalar loss.
class GraphError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class OpKind {
  Leaf,
  Conv2d,
  ConvTranspose2d,
  UpsampleNearest,
  Dense,
  Relu,
  Elu,
  Tanh,
  Sigmoid,
  Exp,
  Add,
  Sub,
  Mul,
  Scale,
  Square,
  Sum,
  Mean,
  Mse,
  L2Norm,
  Reshape,
  Slice,
  LinearMap,
};

const char* op_name(OpKind kind);

class Tape;

/// Handle to a node on a Tape. Cheap to copy; invalid after the tape is reset.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  /// Gradient after backward. Zero-filled if the node did not influence the loss.
  Tensor grad() const;
  bool requires_grad() const;

  Tape& tape() const;
  std::size_t id() const { return id_; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id, std::uint64_t generation) : tape_(tape), id_(id), generation_(generation) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
  std::uint64_t generation_ = 0;
};

/// Records operations for one reverse sweep. Nodes are appended in evaluation
/// order, so ids are a topological order and backward walks them in reverse.
/// backward() may run once per recording; reset() starts a new recording.
class Tape {
 public:
  /// Accumulates the node's gradient contribution into its parents.
  using BackwardFn = std::function<void(Tape& tape, const Tensor& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value, bool requires_grad = false);
  Var record(OpKind kind, std::initializer_list<Var> parents, Tensor value, BackwardFn backward);

  void backward(const Var& loss);
  void reset();

  std::size_t size() const { return nodes_.size(); }
  bool backward_done() const { return backward_done_; }

  const Tensor& value(const Var& v) const;
  bool requires_grad(const Var& v) const;
  Tensor grad(const Var& v) const;
  OpKind kind(const Var& v) const;
  const std::vector<std::size_t>& parents(const Var& v) const;

  /// Zero-initialised gradient buffer of `v`, allocated on first use.
  Tensor& grad_buffer(const Var& v);

 private:
  struct Node {
    OpKind kind;
    std::vector<std::size_t> parents;
    Tensor value;
    Tensor grad;
    bool requires_grad;
    BackwardFn backward;
  };

  const Node& node(const Var& v) const;
  Node& node(const Var& v);

  std::vector<Node> nodes_;
  std::uint64_t generation_ = 1;
  bool backward_done_ = false;
};

// Convolutions take [N,C,H,W] inputs. conv2d weights are [O,C,kh,kw];
// conv_transpose2d weights are [Cin,Cout,kh,kw] (the conv2d layout of its adjoint).
Var conv2d(const Var& input, const Var& weight, const Var& bias, std::size_t stride, std::size_t pad);
Var conv_transpose2d(const Var& input, const Var& weight, const Var& bias, std::size_t stride, std::size_t pad);
/// Nearest-neighbour upsampling of the two trailing axes of an [N,C,H,W] input.
Var upsample_nearest(const Var& input, std::size_t factor);
/// y = x·Wᵀ + b for x of shape [in] or [N,in]; W is [out,in].
Var dense(const Var& input, const Var& weight, const Var& bias);

/// relu'(0) is taken as 0.
Var relu(const Var& x);
Var elu(const Var& x);
Var tanh(const Var& x);
Var sigmoid(const Var& x);
Var exp(const Var& x);
Var square(const Var& x);
Var scale(const Var& x, double factor);

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);

Var sum(const Var& x);
Var mean(const Var& x);
Var mse(const Var& a, const Var& b);
/// Euclidean norm; the gradient at the origin is defined as 0.
Var l2_norm(const Var& x);

Var reshape(const Var& x, Shape shape);
/// Contiguous run of numel(shape) flat elements starting at `offset`.
Var slice(const Var& x, std::size_t offset, Shape shape);

/// Applies a user-supplied linear map; `adjoint` must be its exact transpose.
using LinearFn = std::function<void(std::span<const double> in, std::span<double> out)>;
Var linear_map(const Var& x, Shape out_shape, LinearFn forward, LinearFn adjoint);

}  // namespace gs
