#pragma once

// Eager reverse-mode differentiation over dense real tensors. Every op computes
// its value immediately and records a closure that propagates adjoints to its
// operands. Enough to train the spectral operator; nothing more.

#include <cstddef>
#include <deque>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace priorflow::tape {

using Shape = std::vector<std::size_t>;

struct Tensor {
  Shape shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(Shape s, double fill = 0.0);
  Tensor(Shape s, std::vector<double> d);

  static Tensor scalar(double v) { return Tensor({}, std::vector<double>{v}); }

  std::size_t size() const noexcept { return data.size(); }
  std::size_t rank() const noexcept { return shape.size(); }
  std::size_t dim(std::size_t i) const { return shape.at(i); }
};

std::size_t element_count(const Shape& shape);
std::string to_string(const Shape& shape);

class Tape;

/// Handle to a node on a tape.
class Var {
 public:
  Var() = default;

  Tape* tape() const noexcept { return tape_; }
  std::size_t id() const noexcept { return id_; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape; }

 private:
  friend class Tape;
  Var(Tape* t, std::size_t id) : tape_(t), id_(id) {}
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  /// Called once during backward with the node's accumulated adjoint.
  using Backward = std::function<void(Tape&, const Tensor& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value, bool requires_grad = true);
  Var constant(Tensor value) { return leaf(std::move(value), false); }

  /// Records an op node. parents are used only to decide whether the node
  /// participates in the backward sweep.
  Var record(const char* op, Tensor value, std::initializer_list<Var> parents, Backward backward);

  const Tensor& value(Var v) const;
  const char* op(Var v) const;
  bool needs_grad(Var v) const;
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Reverse sweep from a scalar output, seeded with `seed`.
  void backward(Var output, double seed = 1.0);

  /// Adjoint after backward; zeros for nodes the output does not depend on.
  const Tensor& grad(Var v);

  /// Adjoint buffer of v during the sweep (allocated on first touch).
  Tensor& grad_buffer(Var v);

 private:
  struct Node {
    const char* op = "";
    Tensor value;
    Tensor grad;
    Backward backward;
    bool needs_grad = false;
  };
  void check(Var v) const;

  std::deque<Node> nodes_;  // stable addresses: value() references survive later records
  bool swept_ = false;
};

// Elementwise.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var hadamard(Var a, Var b);
Var scale(Var a, double s);
Var silu(Var a);

/// x: (C, G); b: (C). Adds b[c] at every grid point of channel c.
Var add_channel_bias(Var x, Var b);
/// w: (Co, Ci); x: (Ci, G) -> (Co, G).
Var channel_contract(Var w, Var x);
/// x: (C, G) times a fixed mask of length G.
Var mask_multiply(Var x, std::shared_ptr<const std::vector<double>> mask);
/// Scalar mean of x^2.
Var mean_of_squares(Var x);

/// Generic linear map y = A x with a caller-provided adjoint.
/// fwd(x, y) and adj(gy, gx) both overwrite their output.
using LinearFn = std::function<void(std::span<const double>, std::span<double>)>;
Var linear_map(Var x, Shape out_shape, LinearFn fwd, LinearFn adj, const char* op = "linear_map");

/// Truncated real DFT on an n1 x n2 grid (n1 = 1 in 1D).
/// Kept frequencies: rows k1 in {0..M-1} and {n1-M+1..n1-1}; columns 0..min(M, n2/2+1)-1.
class SpectralPlan {
 public:
  SpectralPlan(std::size_t n1, std::size_t n2, std::size_t modes);

  std::size_t n1() const noexcept { return n1_; }
  std::size_t n2() const noexcept { return n2_; }
  std::size_t rows() const noexcept { return rows_.size(); }
  std::size_t cols() const noexcept { return cols_; }
  const std::vector<std::size_t>& row_freqs() const noexcept { return rows_; }

  /// X = sum_x x e^{-i theta}; x is n1*n2 real, X is rows*cols complex (interleaved).
  void analyze(const double* x, double* X) const;
  /// x = Re sum_X X e^{+i theta}.
  void synthesize_real(const double* X, double* x) const;
  /// Inverse-transform weight for column k2: c/(n1 n2), c = 1 at k2 = 0 or Nyquist, else 2.
  double inverse_weight(std::size_t k2) const;

 private:
  std::size_t n1_, n2_, cols_;
  std::vector<std::size_t> rows_;
  // cos/sin of 2 pi m / n for m in [0, n), exact zeros at quarter turns.
  std::vector<double> cos1_, sin1_, cos2_, sin2_;
};

/// x: (C, n1*n2) -> (C, rows, cols, 2).
Var spectral_forward(Var x, std::shared_ptr<const SpectralPlan> plan);
/// y: (C, rows, cols, 2) -> (C, n1*n2), real part with Hermitian column weights.
Var spectral_inverse(Var y, std::shared_ptr<const SpectralPlan> plan);
/// w: (Co, Ci, rows, cols, 2); x: (Ci, rows, cols, 2) -> (Co, rows, cols, 2), complex per-mode contraction.
Var mode_multiply(Var w, Var x);

/// Builds a scalar graph from leaves made of `params`.
using GraphBuilder = std::function<Var(Tape&, std::span<const Var>)>;

/// Max over every scalar parameter of |analytic - fd| / max(|analytic|, 1e-8)
/// with central differences of step delta.
double gradcheck(const GraphBuilder& build, const std::vector<Tensor>& params, double delta);

/// Analytic gradients of the builder's output, one tensor per parameter.
std::vector<Tensor> gradients(const GraphBuilder& build, const std::vector<Tensor>& params, double seed = 1.0);

}  // namespace priorflow::tape
