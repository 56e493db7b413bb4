#include "gs/autodiff.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>

namespace gs {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using CMap = Eigen::Map<const RowMat>;
using MMap = Eigen::Map<RowMat>;

// Sliding-window geometry of a cross-correlation over one [C,H,W] image.
struct Window {
  std::size_t channels, height, width;
  std::size_t kh, kw, stride, pad;
  std::size_t out_h, out_w;

  std::size_t rows() const { return channels * kh * kw; }
  std::size_t cols() const { return out_h * out_w; }
};

// cols[(c*kh + i)*kw + j][oh*out_w + ow] = x[c][oh*stride + i - pad][ow*stride + j - pad]
void im2col(const double* x, const Window& g, double* cols) {
  const std::size_t P = g.cols();
  for (std::size_t c = 0; c < g.channels; ++c) {
    for (std::size_t i = 0; i < g.kh; ++i) {
      for (std::size_t j = 0; j < g.kw; ++j) {
        double* dst = cols + ((c * g.kh + i) * g.kw + j) * P;
        for (std::size_t oh = 0; oh < g.out_h; ++oh) {
          const long ih = static_cast<long>(oh * g.stride + i) - static_cast<long>(g.pad);
          double* row = dst + oh * g.out_w;
          if (ih < 0 || ih >= static_cast<long>(g.height)) {
            std::fill(row, row + g.out_w, 0.0);
            continue;
          }
          const double* src = x + (c * g.height + static_cast<std::size_t>(ih)) * g.width;
          for (std::size_t ow = 0; ow < g.out_w; ++ow) {
            const long iw = static_cast<long>(ow * g.stride + j) - static_cast<long>(g.pad);
            row[ow] = (iw < 0 || iw >= static_cast<long>(g.width)) ? 0.0 : src[iw];
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatters-adds columns back into the image.
void col2im(const double* cols, const Window& g, double* x) {
  const std::size_t P = g.cols();
  for (std::size_t c = 0; c < g.channels; ++c) {
    for (std::size_t i = 0; i < g.kh; ++i) {
      for (std::size_t j = 0; j < g.kw; ++j) {
        const double* src = cols + ((c * g.kh + i) * g.kw + j) * P;
        for (std::size_t oh = 0; oh < g.out_h; ++oh) {
          const long ih = static_cast<long>(oh * g.stride + i) - static_cast<long>(g.pad);
          if (ih < 0 || ih >= static_cast<long>(g.height)) continue;
          double* dst = x + (c * g.height + static_cast<std::size_t>(ih)) * g.width;
          const double* row = src + oh * g.out_w;
          for (std::size_t ow = 0; ow < g.out_w; ++ow) {
            const long iw = static_cast<long>(ow * g.stride + j) - static_cast<long>(g.pad);
            if (iw >= 0 && iw < static_cast<long>(g.width)) dst[iw] += row[ow];
          }
        }
      }
    }
  }
}

[[noreturn]] void shape_fail(const char* op, const std::string& detail) {
  throw ShapeError(std::string(op) + ": " + detail);
}

void require_same_shape(const char* op, const Var& a, const Var& b) {
  if (a.shape() != b.shape()) {
    shape_fail(op, "shape mismatch " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
}

void require_rank(const char* op, const char* name, const Var& v, std::size_t rank) {
  if (v.shape().size() != rank) {
    shape_fail(op, std::string(name) + " must have rank " + std::to_string(rank) + ", got " + to_string(v.shape()));
  }
}

template <typename F, typename DF>
Var unary(OpKind kind, const Var& x, F f, DF df) {
  const Tensor& xv = x.value();
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = f(xv[i]);
  return x.tape().record(kind, {x}, std::move(out), [x, df](Tape& tape, const Tensor& g) {
    const Tensor& xv = x.value();
    Tensor& gx = tape.grad_buffer(x);
    for (std::size_t i = 0; i < xv.size(); ++i) gx[i] += g[i] * df(xv[i]);
  });
}

}  // namespace

const char* op_name(OpKind kind) {
  switch (kind) {
    case OpKind::Leaf: return "leaf";
    case OpKind::Conv2d: return "conv2d";
    case OpKind::ConvTranspose2d: return "conv_transpose2d";
    case OpKind::UpsampleNearest: return "upsample_nearest";
    case OpKind::Dense: return "dense";
    case OpKind::Relu: return "relu";
    case OpKind::Elu: return "elu";
    case OpKind::Tanh: return "tanh";
    case OpKind::Sigmoid: return "sigmoid";
    case OpKind::Exp: return "exp";
    case OpKind::Add: return "add";
    case OpKind::Sub: return "sub";
    case OpKind::Mul: return "mul";
    case OpKind::Scale: return "scale";
    case OpKind::Square: return "square";
    case OpKind::Sum: return "sum";
    case OpKind::Mean: return "mean";
    case OpKind::Mse: return "mse";
    case OpKind::L2Norm: return "l2_norm";
    case OpKind::Reshape: return "reshape";
    case OpKind::Slice: return "slice";
    case OpKind::LinearMap: return "linear_map";
  }
  return "?";
}

// ---- Var -------------------------------------------------------------------

const Tensor& Var::value() const { return tape().value(*this); }
Tensor Var::grad() const { return tape().grad(*this); }
bool Var::requires_grad() const { return tape().requires_grad(*this); }

Tape& Var::tape() const {
  if (tape_ == nullptr) throw GraphError("use of an unbound Var");
  return *tape_;
}

// ---- Tape ------------------------------------------------------------------

const Tape::Node& Tape::node(const Var& v) const {
  if (v.tape_ != this) throw GraphError("Var belongs to a different tape");
  if (v.generation_ != generation_ || v.id_ >= nodes_.size()) {
    throw GraphError("stale Var: the tape was reset after it was recorded");
  }
  return nodes_[v.id_];
}

Tape::Node& Tape::node(const Var& v) {
  return const_cast<Node&>(static_cast<const Tape&>(*this).node(v));
}

Var Tape::leaf(Tensor value, bool requires_grad) {
  require_finite(value.data(), "leaf tensor");
  if (backward_done_) throw GraphError("tape already differentiated; reset() before recording");
  nodes_.push_back(Node{OpKind::Leaf, {}, std::move(value), Tensor(), requires_grad, nullptr});
  return Var(this, nodes_.size() - 1, generation_);
}

Var Tape::record(OpKind kind, std::initializer_list<Var> parents, Tensor value, BackwardFn backward) {
  if (backward_done_) throw GraphError("tape already differentiated; reset() before recording");
  if (!value.all_finite()) throw NumericError(std::string("non-finite output from ") + op_name(kind));
  bool needs = false;
  std::vector<std::size_t> ids;
  ids.reserve(parents.size());
  for (const Var& p : parents) {
    needs = needs || node(p).requires_grad;
    ids.push_back(p.id_);
  }
  nodes_.push_back(Node{kind, std::move(ids), std::move(value), Tensor(), needs,
                        needs ? std::move(backward) : BackwardFn{}});
  return Var(this, nodes_.size() - 1, generation_);
}

void Tape::backward(const Var& loss) {
  const Node& root = node(loss);
  if (backward_done_) throw GraphError("backward called twice on the same recording; reset() first");
  if (root.value.size() != 1) {
    throw GraphError("backward needs a scalar loss, got shape " + to_string(root.value.shape()));
  }
  if (!root.requires_grad) throw GraphError("loss is detached: it depends on no leaf with requires_grad");

  nodes_[loss.id_].grad = Tensor(root.value.shape(), 1.0);
  for (std::size_t k = loss.id_ + 1; k-- > 0;) {
    Node& n = nodes_[k];
    if (!n.requires_grad || n.grad.empty()) continue;
    require_finite(n.grad.data(), op_name(n.kind));
    if (n.backward) n.backward(*this, n.grad);
  }
  backward_done_ = true;
}

void Tape::reset() {
  nodes_.clear();
  ++generation_;
  backward_done_ = false;
}

const Tensor& Tape::value(const Var& v) const { return node(v).value; }
bool Tape::requires_grad(const Var& v) const { return node(v).requires_grad; }
OpKind Tape::kind(const Var& v) const { return node(v).kind; }
const std::vector<std::size_t>& Tape::parents(const Var& v) const { return node(v).parents; }

Tensor Tape::grad(const Var& v) const {
  const Node& n = node(v);
  if (!n.grad.empty()) return n.grad;
  return Tensor(n.value.shape(), 0.0);
}

Tensor& Tape::grad_buffer(const Var& v) {
  Node& n = node(v);
  if (n.grad.empty()) n.grad = Tensor(n.value.shape(), 0.0);
  return n.grad;
}

// ---- convolution -----------------------------------------------------------

Var conv2d(const Var& input, const Var& weight, const Var& bias, std::size_t stride, std::size_t pad) {
  constexpr const char* op = "conv2d";
  require_rank(op, "input", input, 4);
  require_rank(op, "weight", weight, 4);
  require_rank(op, "bias", bias, 1);
  const Shape& xs = input.shape();
  const Shape& ws = weight.shape();
  if (stride == 0) shape_fail(op, "stride must be >= 1");
  if (ws[1] != xs[1]) {
    shape_fail(op, "weight expects " + std::to_string(ws[1]) + " input channels, input has " + std::to_string(xs[1]));
  }
  if (bias.shape()[0] != ws[0]) shape_fail(op, "bias length must equal output channels");
  if (ws[2] > xs[2] + 2 * pad || ws[3] > xs[3] + 2 * pad) {
    shape_fail(op, "kernel " + to_string(ws) + " larger than padded input " + to_string(xs));
  }
  const std::size_t N = xs[0], O = ws[0];
  const Window g{xs[1], xs[2], xs[3], ws[2], ws[3], stride, pad,
                 (xs[2] + 2 * pad - ws[2]) / stride + 1, (xs[3] + 2 * pad - ws[3]) / stride + 1};
  const std::size_t K = g.rows(), P = g.cols(), in_sz = g.channels * g.height * g.width;

  Tensor out({N, O, g.out_h, g.out_w});
  AlignedVector cols(K * P);
  const CMap W(weight.value().ptr(), O, K);
  const double* b = bias.value().ptr();
  for (std::size_t n = 0; n < N; ++n) {
    im2col(input.value().ptr() + n * in_sz, g, cols.data());
    MMap Y(out.ptr() + n * O * P, O, P);
    Y.noalias() = W * CMap(cols.data(), K, P);
    for (std::size_t o = 0; o < O; ++o) Y.row(o).array() += b[o];
  }

  return input.tape().record(OpKind::Conv2d, {input, weight, bias}, std::move(out),
                             [input, weight, bias, g, N, O](Tape& tape, const Tensor& grad) {
    const std::size_t K = g.rows(), P = g.cols(), in_sz = g.channels * g.height * g.width;
    const bool gx = tape.requires_grad(input), gw = tape.requires_grad(weight), gb = tape.requires_grad(bias);
    const CMap W(weight.value().ptr(), O, K);
    AlignedVector cols(K * P);
    for (std::size_t n = 0; n < N; ++n) {
      const CMap G(grad.ptr() + n * O * P, O, P);
      if (gb) {
        double* db = tape.grad_buffer(bias).ptr();
        for (std::size_t o = 0; o < O; ++o) db[o] += G.row(o).sum();
      }
      if (gw) {
        im2col(input.value().ptr() + n * in_sz, g, cols.data());
        MMap dW(tape.grad_buffer(weight).ptr(), O, K);
        dW.noalias() += G * CMap(cols.data(), K, P).transpose();
      }
      if (gx) {
        MMap(cols.data(), K, P).noalias() = W.transpose() * G;
        col2im(cols.data(), g, tape.grad_buffer(input).ptr() + n * in_sz);
      }
    }
  });
}

Var conv_transpose2d(const Var& input, const Var& weight, const Var& bias, std::size_t stride, std::size_t pad) {
  constexpr const char* op = "conv_transpose2d";
  require_rank(op, "input", input, 4);
  require_rank(op, "weight", weight, 4);
  require_rank(op, "bias", bias, 1);
  const Shape& xs = input.shape();
  const Shape& ws = weight.shape();
  if (stride == 0) shape_fail(op, "stride must be >= 1");
  if (ws[0] != xs[1]) {
    shape_fail(op, "weight expects " + std::to_string(ws[0]) + " input channels, input has " + std::to_string(xs[1]));
  }
  if (bias.shape()[0] != ws[1]) shape_fail(op, "bias length must equal output channels");
  const long oh = static_cast<long>((xs[2] - 1) * stride + ws[2]) - 2 * static_cast<long>(pad);
  const long ow = static_cast<long>((xs[3] - 1) * stride + ws[3]) - 2 * static_cast<long>(pad);
  if (oh < 1 || ow < 1) shape_fail(op, "padding too large for input " + to_string(xs));

  const std::size_t N = xs[0], Cin = xs[1], Cout = ws[1];
  // Window over the (large) output image; its positions are the input pixels.
  const Window g{Cout, static_cast<std::size_t>(oh), static_cast<std::size_t>(ow), ws[2], ws[3], stride, pad,
                 xs[2], xs[3]};
  const std::size_t K = g.rows(), P = g.cols(), out_sz = Cout * g.height * g.width;

  Tensor out({N, Cout, g.height, g.width});
  AlignedVector cols(K * P);
  const CMap W(weight.value().ptr(), Cin, K);
  const double* b = bias.value().ptr();
  for (std::size_t n = 0; n < N; ++n) {
    MMap(cols.data(), K, P).noalias() = W.transpose() * CMap(input.value().ptr() + n * Cin * P, Cin, P);
    double* y = out.ptr() + n * out_sz;
    col2im(cols.data(), g, y);
    const std::size_t hw = g.height * g.width;
    for (std::size_t c = 0; c < Cout; ++c) {
      for (std::size_t p = 0; p < hw; ++p) y[c * hw + p] += b[c];
    }
  }

  return input.tape().record(OpKind::ConvTranspose2d, {input, weight, bias}, std::move(out),
                             [input, weight, bias, g, N, Cin, Cout](Tape& tape, const Tensor& grad) {
    const std::size_t K = g.rows(), P = g.cols(), hw = g.height * g.width, out_sz = Cout * hw;
    const bool gx = tape.requires_grad(input), gw = tape.requires_grad(weight), gb = tape.requires_grad(bias);
    const CMap W(weight.value().ptr(), Cin, K);
    AlignedVector cols(K * P);
    for (std::size_t n = 0; n < N; ++n) {
      const double* gn = grad.ptr() + n * out_sz;
      if (gb) {
        double* db = tape.grad_buffer(bias).ptr();
        for (std::size_t c = 0; c < Cout; ++c) {
          double s = 0.0;
          for (std::size_t p = 0; p < hw; ++p) s += gn[c * hw + p];
          db[c] += s;
        }
      }
      if (!gx && !gw) continue;
      im2col(gn, g, cols.data());
      const CMap GC(cols.data(), K, P);
      if (gx) {
        MMap dX(tape.grad_buffer(input).ptr() + n * Cin * P, Cin, P);
        dX.noalias() += W * GC;
      }
      if (gw) {
        MMap dW(tape.grad_buffer(weight).ptr(), Cin, K);
        dW.noalias() += CMap(input.value().ptr() + n * Cin * P, Cin, P) * GC.transpose();
      }
    }
  });
}

Var upsample_nearest(const Var& input, std::size_t factor) {
  require_rank("upsample_nearest", "input", input, 4);
  if (factor == 0) shape_fail("upsample_nearest", "factor must be >= 1");
  const Shape& s = input.shape();
  const std::size_t planes = s[0] * s[1], H = s[2], W = s[3], f = factor;
  Tensor out({s[0], s[1], H * f, W * f});
  const double* x = input.value().ptr();
  double* y = out.ptr();
  for (std::size_t p = 0; p < planes; ++p) {
    for (std::size_t i = 0; i < H * f; ++i) {
      const double* src = x + (p * H + i / f) * W;
      double* dst = y + (p * H * f + i) * W * f;
      for (std::size_t j = 0; j < W * f; ++j) dst[j] = src[j / f];
    }
  }
  return input.tape().record(OpKind::UpsampleNearest, {input}, std::move(out),
                             [input, planes, H, W, f](Tape& tape, const Tensor& grad) {
    double* gx = tape.grad_buffer(input).ptr();
    const double* g = grad.ptr();
    for (std::size_t p = 0; p < planes; ++p) {
      for (std::size_t i = 0; i < H * f; ++i) {
        double* dst = gx + (p * H + i / f) * W;
        const double* src = g + (p * H * f + i) * W * f;
        for (std::size_t j = 0; j < W * f; ++j) dst[j / f] += src[j];
      }
    }
  });
}

Var dense(const Var& input, const Var& weight, const Var& bias) {
  constexpr const char* op = "dense";
  require_rank(op, "weight", weight, 2);
  require_rank(op, "bias", bias, 1);
  const Shape& xs = input.shape();
  if (xs.size() != 1 && xs.size() != 2) shape_fail(op, "input must be [in] or [N,in], got " + to_string(xs));
  const std::size_t N = xs.size() == 1 ? 1 : xs[0];
  const std::size_t in = xs.back(), outd = weight.shape()[0];
  if (weight.shape()[1] != in) {
    shape_fail(op, "inner dims differ: input " + to_string(xs) + " weight " + to_string(weight.shape()));
  }
  if (bias.shape()[0] != outd) shape_fail(op, "bias length must equal output features");
  Tensor out(xs.size() == 1 ? Shape{outd} : Shape{N, outd});
  MMap Y(out.ptr(), N, outd);
  Y.noalias() = CMap(input.value().ptr(), N, in) * CMap(weight.value().ptr(), outd, in).transpose();
  Y.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(bias.value().ptr(), outd);
  return input.tape().record(OpKind::Dense, {input, weight, bias}, std::move(out),
                             [input, weight, bias, N, in, outd](Tape& tape, const Tensor& grad) {
    const CMap G(grad.ptr(), N, outd);
    if (tape.requires_grad(input)) {
      MMap(tape.grad_buffer(input).ptr(), N, in).noalias() += G * CMap(weight.value().ptr(), outd, in);
    }
    if (tape.requires_grad(weight)) {
      MMap(tape.grad_buffer(weight).ptr(), outd, in).noalias() += G.transpose() * CMap(input.value().ptr(), N, in);
    }
    if (tape.requires_grad(bias)) {
      Eigen::Map<Eigen::RowVectorXd>(tape.grad_buffer(bias).ptr(), outd) += G.colwise().sum();
    }
  });
}

// ---- elementwise -----------------------------------------------------------

Var relu(const Var& x) {
  return unary(OpKind::Relu, x, [](double v) { return v > 0.0 ? v : 0.0; },
               [](double v) { return v > 0.0 ? 1.0 : 0.0; });
}

Var elu(const Var& x) {
  return unary(OpKind::Elu, x, [](double v) { return v > 0.0 ? v : std::expm1(v); },
               [](double v) { return v > 0.0 ? 1.0 : std::exp(v); });
}

Var tanh(const Var& x) {
  return unary(OpKind::Tanh, x, [](double v) { return std::tanh(v); },
               [](double v) {
                 const double t = std::tanh(v);
                 return 1.0 - t * t;
               });
}

Var sigmoid(const Var& x) {
  auto s = [](double v) { return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v)); };
  return unary(OpKind::Sigmoid, x, s, [s](double v) {
    const double y = s(v);
    return y * (1.0 - y);
  });
}

Var exp(const Var& x) {
  return unary(OpKind::Exp, x, [](double v) { return std::exp(v); }, [](double v) { return std::exp(v); });
}

Var square(const Var& x) {
  return unary(OpKind::Square, x, [](double v) { return v * v; }, [](double v) { return 2.0 * v; });
}

Var scale(const Var& x, double factor) {
  return unary(OpKind::Scale, x, [factor](double v) { return factor * v; }, [factor](double) { return factor; });
}

Var add(const Var& a, const Var& b) {
  require_same_shape("add", a, b);
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] + b.value()[i];
  return a.tape().record(OpKind::Add, {a, b}, std::move(out), [a, b](Tape& tape, const Tensor& g) {
    for (const Var& p : {a, b}) {
      if (!tape.requires_grad(p)) continue;
      Tensor& gp = tape.grad_buffer(p);
      for (std::size_t i = 0; i < g.size(); ++i) gp[i] += g[i];
    }
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape("sub", a, b);
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] - b.value()[i];
  return a.tape().record(OpKind::Sub, {a, b}, std::move(out), [a, b](Tape& tape, const Tensor& g) {
    if (tape.requires_grad(a)) {
      Tensor& ga = tape.grad_buffer(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (tape.requires_grad(b)) {
      Tensor& gb = tape.grad_buffer(b);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape("mul", a, b);
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * b.value()[i];
  return a.tape().record(OpKind::Mul, {a, b}, std::move(out), [a, b](Tape& tape, const Tensor& g) {
    if (tape.requires_grad(a)) {
      Tensor& ga = tape.grad_buffer(a);
      const Tensor& bv = b.value();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
    }
    if (tape.requires_grad(b)) {
      Tensor& gb = tape.grad_buffer(b);
      const Tensor& av = a.value();
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
    }
  });
}

// ---- reductions ------------------------------------------------------------

Var sum(const Var& x) {
  double s = 0.0;
  for (double v : x.value().data()) s += v;
  return x.tape().record(OpKind::Sum, {x}, Tensor::scalar(s), [x](Tape& tape, const Tensor& g) {
    Tensor& gx = tape.grad_buffer(x);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[0];
  });
}

Var mean(const Var& x) {
  const double n = static_cast<double>(x.value().size());
  double s = 0.0;
  for (double v : x.value().data()) s += v;
  return x.tape().record(OpKind::Mean, {x}, Tensor::scalar(s / n), [x, n](Tape& tape, const Tensor& g) {
    Tensor& gx = tape.grad_buffer(x);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[0] / n;
  });
}

Var mse(const Var& a, const Var& b) {
  require_same_shape("mse", a, b);
  const double n = static_cast<double>(a.value().size());
  double s = 0.0;
  for (std::size_t i = 0; i < a.value().size(); ++i) {
    const double d = a.value()[i] - b.value()[i];
    s += d * d;
  }
  return a.tape().record(OpKind::Mse, {a, b}, Tensor::scalar(s / n), [a, b, n](Tape& tape, const Tensor& g) {
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    const double k = 2.0 * g[0] / n;
    if (tape.requires_grad(a)) {
      Tensor& ga = tape.grad_buffer(a);
      for (std::size_t i = 0; i < av.size(); ++i) ga[i] += k * (av[i] - bv[i]);
    }
    if (tape.requires_grad(b)) {
      Tensor& gb = tape.grad_buffer(b);
      for (std::size_t i = 0; i < av.size(); ++i) gb[i] -= k * (av[i] - bv[i]);
    }
  });
}

Var l2_norm(const Var& x) {
  const double r = l2_norm(x.value().data());
  return x.tape().record(OpKind::L2Norm, {x}, Tensor::scalar(r), [x, r](Tape& tape, const Tensor& g) {
    if (r == 0.0) return;
    Tensor& gx = tape.grad_buffer(x);
    const Tensor& xv = x.value();
    for (std::size_t i = 0; i < xv.size(); ++i) gx[i] += g[0] * xv[i] / r;
  });
}

// ---- shape -----------------------------------------------------------------

Var reshape(const Var& x, Shape shape) {
  Tensor out = x.value().reshaped(std::move(shape));
  return x.tape().record(OpKind::Reshape, {x}, std::move(out), [x](Tape& tape, const Tensor& g) {
    Tensor& gx = tape.grad_buffer(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
  });
}

Var slice(const Var& x, std::size_t offset, Shape shape) {
  const std::size_t len = numel(shape);
  if (offset + len > x.value().size()) {
    shape_fail("slice", "range [" + std::to_string(offset) + ", " + std::to_string(offset + len) +
                            ") exceeds " + std::to_string(x.value().size()) + " elements");
  }
  const auto src = x.value().data().subspan(offset, len);
  Tensor out(std::move(shape), src);
  return x.tape().record(OpKind::Slice, {x}, std::move(out), [x, offset](Tape& tape, const Tensor& g) {
    Tensor& gx = tape.grad_buffer(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx[offset + i] += g[i];
  });
}

Var linear_map(const Var& x, Shape out_shape, LinearFn forward, LinearFn adjoint) {
  Tensor out(std::move(out_shape));
  forward(x.value().data(), out.data());
  return x.tape().record(OpKind::LinearMap, {x}, std::move(out),
                         [x, adjoint = std::move(adjoint)](Tape& tape, const Tensor& g) {
    AlignedVector back(x.value().size(), 0.0);
    adjoint(g.data(), back);
    Tensor& gx = tape.grad_buffer(x);
    for (std::size_t i = 0; i < back.size(); ++i) gx[i] += back[i];
  });
}

}  // namespace gs
