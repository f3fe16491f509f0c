#include "priorflow/tape.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include <Eigen/Dense>

namespace priorflow::tape {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

Tape& same_tape(Var a, Var b, const char* op) {
  require(a.tape() != nullptr && a.tape() == b.tape(), std::string(op) + ": operands on different tapes");
  return *a.tape();
}

Tape& tape_of(Var a, const char* op) {
  require(a.tape() != nullptr, std::string(op) + ": operand is not on a tape");
  return *a.tape();
}

void require_same_shape(Var a, Var b, const char* op) {
  require(a.shape() == b.shape(),
          std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " + to_string(b.shape()));
}

void accumulate(Tape& t, Var v, const Tensor& g, double factor = 1.0) {
  if (!t.needs_grad(v)) return;
  auto& buf = t.grad_buffer(v).data;
  for (std::size_t i = 0; i < buf.size(); ++i) buf[i] += factor * g.data[i];
}

void angle_table(std::size_t n, std::vector<double>& c, std::vector<double>& s) {
  c.resize(n);
  s.resize(n);
  for (std::size_t m = 0; m < n; ++m) {
    if ((4 * m) % n == 0) {
      static constexpr double qc[4] = {1.0, 0.0, -1.0, 0.0};
      static constexpr double qs[4] = {0.0, 1.0, 0.0, -1.0};
      c[m] = qc[4 * m / n];
      s[m] = qs[4 * m / n];
    } else {
      const double th = 2.0 * std::numbers::pi * static_cast<double>(m) / static_cast<double>(n);
      c[m] = std::cos(th);
      s[m] = std::sin(th);
    }
  }
}

}  // namespace

Tensor::Tensor(Shape s, double fill) : shape(std::move(s)), data(element_count(shape), fill) {}

Tensor::Tensor(Shape s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
  if (data.size() != element_count(shape))
    throw std::invalid_argument("Tensor: " + std::to_string(data.size()) + " values for shape " + to_string(shape));
}

std::size_t element_count(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string to_string(const Shape& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) s += (i ? "," : "") + std::to_string(shape[i]);
  return s + ")";
}

const Tensor& Var::value() const {
  if (!tape_) throw std::logic_error("Var: not attached to a tape");
  return tape_->value(*this);
}

void Tape::check(Var v) const {
  if (v.tape_ != this || v.id_ >= nodes_.size()) throw std::invalid_argument("Tape: variable belongs to another tape");
}

Var Tape::leaf(Tensor value, bool requires_grad) {
  Node node;
  node.op = requires_grad ? "leaf" : "constant";
  node.value = std::move(value);
  node.needs_grad = requires_grad;
  nodes_.push_back(std::move(node));
  swept_ = false;
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(const char* op, Tensor value, std::initializer_list<Var> parents, Backward backward) {
  Node node;
  node.op = op;
  node.value = std::move(value);
  for (Var p : parents) {
    check(p);
    node.needs_grad = node.needs_grad || nodes_[p.id_].needs_grad;
  }
  if (node.needs_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  swept_ = false;
  return Var(this, nodes_.size() - 1);
}

const Tensor& Tape::value(Var v) const {
  check(v);
  return nodes_[v.id_].value;
}

const char* Tape::op(Var v) const {
  check(v);
  return nodes_[v.id_].op;
}

bool Tape::needs_grad(Var v) const {
  check(v);
  return nodes_[v.id_].needs_grad;
}

Tensor& Tape::grad_buffer(Var v) {
  check(v);
  Node& n = nodes_[v.id_];
  if (n.grad.data.size() != n.value.data.size()) n.grad = Tensor(n.value.shape, 0.0);
  return n.grad;
}

void Tape::backward(Var output, double seed) {
  check(output);
  if (nodes_[output.id_].value.size() != 1)
    throw std::invalid_argument("Tape::backward: output must be a scalar, got shape " +
                                to_string(nodes_[output.id_].value.shape));
  for (auto& n : nodes_) n.grad = Tensor();
  grad_buffer(output).data[0] = seed;
  for (std::size_t i = output.id_ + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.backward || n.grad.data.empty()) continue;
    n.backward(*this, n.grad);
  }
  swept_ = true;
}

const Tensor& Tape::grad(Var v) {
  check(v);
  if (!swept_) throw std::logic_error("Tape::grad: backward has not been run");
  return grad_buffer(v);
}

Var add(Var a, Var b) {
  Tape& t = same_tape(a, b, "add");
  require_same_shape(a, b, "add");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += b.value().data[i];
  return t.record("add", std::move(out), {a, b}, [a, b](Tape& tp, const Tensor& g) {
    accumulate(tp, a, g);
    accumulate(tp, b, g);
  });
}

Var sub(Var a, Var b) {
  Tape& t = same_tape(a, b, "sub");
  require_same_shape(a, b, "sub");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] -= b.value().data[i];
  return t.record("sub", std::move(out), {a, b}, [a, b](Tape& tp, const Tensor& g) {
    accumulate(tp, a, g);
    accumulate(tp, b, g, -1.0);
  });
}

Var hadamard(Var a, Var b) {
  Tape& t = same_tape(a, b, "hadamard");
  require_same_shape(a, b, "hadamard");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] *= b.value().data[i];
  return t.record("hadamard", std::move(out), {a, b}, [a, b](Tape& tp, const Tensor& g) {
    const auto& av = a.value().data;
    const auto& bv = b.value().data;
    if (tp.needs_grad(a)) {
      auto& ga = tp.grad_buffer(a).data;
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g.data[i] * bv[i];
    }
    if (tp.needs_grad(b)) {
      auto& gb = tp.grad_buffer(b).data;
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g.data[i] * av[i];
    }
  });
}

Var scale(Var a, double s) {
  Tape& t = tape_of(a, "scale");
  Tensor out = a.value();
  for (auto& v : out.data) v *= s;
  return t.record("scale", std::move(out), {a}, [a, s](Tape& tp, const Tensor& g) { accumulate(tp, a, g, s); });
}

Var silu(Var a) {
  Tape& t = tape_of(a, "silu");
  Tensor out = a.value();
  for (auto& v : out.data) v = v / (1.0 + std::exp(-v));
  return t.record("silu", std::move(out), {a}, [a](Tape& tp, const Tensor& g) {
    const auto& x = a.value().data;
    auto& ga = tp.grad_buffer(a).data;
    for (std::size_t i = 0; i < ga.size(); ++i) {
      const double sig = 1.0 / (1.0 + std::exp(-x[i]));
      ga[i] += g.data[i] * sig * (1.0 + x[i] * (1.0 - sig));
    }
  });
}

Var add_channel_bias(Var x, Var b) {
  Tape& t = same_tape(x, b, "add_channel_bias");
  require(x.shape().size() == 2 && b.shape().size() == 1 && b.shape()[0] == x.shape()[0],
          "add_channel_bias: expected x (C,G) and b (C), got " + to_string(x.shape()) + " and " + to_string(b.shape()));
  const std::size_t C = x.shape()[0], G = x.shape()[1];
  Tensor out = x.value();
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t g = 0; g < G; ++g) out.data[c * G + g] += b.value().data[c];
  return t.record("add_channel_bias", std::move(out), {x, b}, [x, b, C, G](Tape& tp, const Tensor& g) {
    accumulate(tp, x, g);
    if (tp.needs_grad(b)) {
      auto& gb = tp.grad_buffer(b).data;
      for (std::size_t c = 0; c < C; ++c)
        for (std::size_t p = 0; p < G; ++p) gb[c] += g.data[c * G + p];
    }
  });
}

Var channel_contract(Var w, Var x) {
  Tape& t = same_tape(w, x, "channel_contract");
  require(w.shape().size() == 2 && x.shape().size() == 2 && w.shape()[1] == x.shape()[0],
          "channel_contract: expected w (Co,Ci) and x (Ci,G), got " + to_string(w.shape()) + " and " +
              to_string(x.shape()));
  const auto Co = static_cast<Eigen::Index>(w.shape()[0]);
  const auto Ci = static_cast<Eigen::Index>(w.shape()[1]);
  const auto G = static_cast<Eigen::Index>(x.shape()[1]);
  Tensor out({w.shape()[0], x.shape()[1]});
  MutMap(out.data.data(), Co, G).noalias() =
      ConstMap(w.value().data.data(), Co, Ci) * ConstMap(x.value().data.data(), Ci, G);
  return t.record("channel_contract", std::move(out), {w, x}, [w, x, Co, Ci, G](Tape& tp, const Tensor& g) {
    const ConstMap gm(g.data.data(), Co, G);
    if (tp.needs_grad(w))
      MutMap(tp.grad_buffer(w).data.data(), Co, Ci).noalias() += gm * ConstMap(x.value().data.data(), Ci, G).transpose();
    if (tp.needs_grad(x))
      MutMap(tp.grad_buffer(x).data.data(), Ci, G).noalias() += ConstMap(w.value().data.data(), Co, Ci).transpose() * gm;
  });
}

Var mask_multiply(Var x, std::shared_ptr<const std::vector<double>> mask) {
  Tape& t = tape_of(x, "mask_multiply");
  require(mask != nullptr && x.shape().size() == 2 && x.shape()[1] == mask->size(),
          "mask_multiply: expected x (C,G) with a mask of length G, got " + to_string(x.shape()));
  const std::size_t C = x.shape()[0], G = x.shape()[1];
  Tensor out = x.value();
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t p = 0; p < G; ++p) out.data[c * G + p] *= (*mask)[p];
  return t.record("mask_multiply", std::move(out), {x}, [x, mask, C, G](Tape& tp, const Tensor& g) {
    auto& gx = tp.grad_buffer(x).data;
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t p = 0; p < G; ++p) gx[c * G + p] += g.data[c * G + p] * (*mask)[p];
  });
}

Var mean_of_squares(Var x) {
  Tape& t = tape_of(x, "mean_of_squares");
  const auto& v = x.value().data;
  require(!v.empty(), "mean_of_squares: empty tensor");
  double acc = 0.0;
  for (double e : v) acc += e * e;
  const double k = static_cast<double>(v.size());
  return t.record("mean_of_squares", Tensor::scalar(acc / k), {x}, [x, k](Tape& tp, const Tensor& g) {
    const auto& xv = x.value().data;
    auto& gx = tp.grad_buffer(x).data;
    const double s = 2.0 * g.data[0] / k;
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += s * xv[i];
  });
}

Var linear_map(Var x, Shape out_shape, LinearFn fwd, LinearFn adj, const char* op) {
  Tape& t = tape_of(x, op);
  Tensor out(std::move(out_shape));
  fwd(x.value().data, out.data);
  return t.record(op, std::move(out), {x}, [x, adj = std::move(adj)](Tape& tp, const Tensor& g) {
    std::vector<double> tmp(x.value().size());
    adj(g.data, tmp);
    auto& gx = tp.grad_buffer(x).data;
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += tmp[i];
  });
}

SpectralPlan::SpectralPlan(std::size_t n1, std::size_t n2, std::size_t modes) : n1_(n1), n2_(n2) {
  if (n1 < 1 || n2 < 1 || modes < 1) throw std::invalid_argument("SpectralPlan: sizes and modes must be positive");
  cols_ = std::min(modes, n2 / 2 + 1);
  if (2 * modes - 1 >= n1) {
    for (std::size_t r = 0; r < n1; ++r) rows_.push_back(r);
  } else {
    for (std::size_t r = 0; r < modes; ++r) rows_.push_back(r);
    for (std::size_t r = n1 - modes + 1; r < n1; ++r) rows_.push_back(r);
  }
  angle_table(n1, cos1_, sin1_);
  angle_table(n2, cos2_, sin2_);
}

void SpectralPlan::analyze(const double* x, double* X) const {
  const std::size_t R = rows_.size(), K = cols_;
  std::vector<double> A(n1_ * K * 2, 0.0);
  for (std::size_t j = 0; j < n1_; ++j) {
    const double* xr = x + j * n2_;
    for (std::size_t k2 = 0; k2 < K; ++k2) {
      double re = 0.0, im = 0.0;
      for (std::size_t k = 0; k < n2_; ++k) {
        const std::size_t m = (k2 * k) % n2_;
        re += xr[k] * cos2_[m];
        im -= xr[k] * sin2_[m];
      }
      A[(j * K + k2) * 2] = re;
      A[(j * K + k2) * 2 + 1] = im;
    }
  }
  for (std::size_t r = 0; r < R; ++r) {
    const std::size_t k1 = rows_[r];
    for (std::size_t k2 = 0; k2 < K; ++k2) {
      double re = 0.0, im = 0.0;
      for (std::size_t j = 0; j < n1_; ++j) {
        const std::size_t m = (k1 * j) % n1_;
        const double c = cos1_[m], s = sin1_[m];
        const double ar = A[(j * K + k2) * 2], ai = A[(j * K + k2) * 2 + 1];
        re += ar * c + ai * s;
        im += ai * c - ar * s;
      }
      X[(r * K + k2) * 2] = re;
      X[(r * K + k2) * 2 + 1] = im;
    }
  }
}

void SpectralPlan::synthesize_real(const double* X, double* x) const {
  const std::size_t R = rows_.size(), K = cols_;
  std::vector<double> B(n1_ * K * 2, 0.0);
  for (std::size_t j = 0; j < n1_; ++j)
    for (std::size_t k2 = 0; k2 < K; ++k2) {
      double re = 0.0, im = 0.0;
      for (std::size_t r = 0; r < R; ++r) {
        const std::size_t m = (rows_[r] * j) % n1_;
        const double c = cos1_[m], s = sin1_[m];
        const double yr = X[(r * K + k2) * 2], yi = X[(r * K + k2) * 2 + 1];
        re += yr * c - yi * s;
        im += yi * c + yr * s;
      }
      B[(j * K + k2) * 2] = re;
      B[(j * K + k2) * 2 + 1] = im;
    }
  for (std::size_t j = 0; j < n1_; ++j)
    for (std::size_t k = 0; k < n2_; ++k) {
      double acc = 0.0;
      for (std::size_t k2 = 0; k2 < K; ++k2) {
        const std::size_t m = (k2 * k) % n2_;
        acc += B[(j * K + k2) * 2] * cos2_[m] - B[(j * K + k2) * 2 + 1] * sin2_[m];
      }
      x[j * n2_ + k] = acc;
    }
}

double SpectralPlan::inverse_weight(std::size_t k2) const {
  const bool single = k2 == 0 || (n2_ % 2 == 0 && k2 == n2_ / 2);
  return (single ? 1.0 : 2.0) / static_cast<double>(n1_ * n2_);
}

Var spectral_forward(Var x, std::shared_ptr<const SpectralPlan> plan) {
  Tape& t = tape_of(x, "spectral_forward");
  const std::size_t G = plan->n1() * plan->n2();
  require(x.shape().size() == 2 && x.shape()[1] == G,
          "spectral_forward: expected x (C," + std::to_string(G) + "), got " + to_string(x.shape()));
  const std::size_t C = x.shape()[0], R = plan->rows(), K = plan->cols();
  const std::size_t S = R * K * 2;
  Tensor out({C, R, K, 2});
  for (std::size_t c = 0; c < C; ++c) plan->analyze(x.value().data.data() + c * G, out.data.data() + c * S);
  return t.record("spectral_forward", std::move(out), {x}, [x, plan, C, G, S](Tape& tp, const Tensor& g) {
    auto& gx = tp.grad_buffer(x).data;
    std::vector<double> tmp(G);
    for (std::size_t c = 0; c < C; ++c) {
      plan->synthesize_real(g.data.data() + c * S, tmp.data());
      for (std::size_t p = 0; p < G; ++p) gx[c * G + p] += tmp[p];
    }
  });
}

Var spectral_inverse(Var y, std::shared_ptr<const SpectralPlan> plan) {
  Tape& t = tape_of(y, "spectral_inverse");
  const std::size_t R = plan->rows(), K = plan->cols(), G = plan->n1() * plan->n2();
  require(y.shape().size() == 4 && y.shape()[1] == R && y.shape()[2] == K && y.shape()[3] == 2,
          "spectral_inverse: expected (C," + std::to_string(R) + "," + std::to_string(K) + ",2), got " +
              to_string(y.shape()));
  const std::size_t C = y.shape()[0], S = R * K * 2;
  Tensor out({C, G});
  std::vector<double> weighted(S);
  for (std::size_t c = 0; c < C; ++c) {
    const double* yc = y.value().data.data() + c * S;
    for (std::size_t i = 0; i < R * K; ++i) {
      const double w = plan->inverse_weight(i % K);
      weighted[2 * i] = w * yc[2 * i];
      weighted[2 * i + 1] = w * yc[2 * i + 1];
    }
    plan->synthesize_real(weighted.data(), out.data.data() + c * G);
  }
  return t.record("spectral_inverse", std::move(out), {y}, [y, plan, C, G, S, K](Tape& tp, const Tensor& g) {
    auto& gy = tp.grad_buffer(y).data;
    std::vector<double> tmp(S);
    for (std::size_t c = 0; c < C; ++c) {
      plan->analyze(g.data.data() + c * G, tmp.data());
      for (std::size_t i = 0; i < S / 2; ++i) {
        const double w = plan->inverse_weight(i % K);
        gy[c * S + 2 * i] += w * tmp[2 * i];
        gy[c * S + 2 * i + 1] += w * tmp[2 * i + 1];
      }
    }
  });
}

Var mode_multiply(Var w, Var x) {
  Tape& t = same_tape(w, x, "mode_multiply");
  const Shape& ws = w.shape();
  const Shape& xs = x.shape();
  require(ws.size() == 5 && xs.size() == 4 && ws[1] == xs[0] && ws[2] == xs[1] && ws[3] == xs[2] && ws[4] == 2 &&
              xs[3] == 2,
          "mode_multiply: expected w (Co,Ci,R,K,2) and x (Ci,R,K,2), got " + to_string(ws) + " and " + to_string(xs));
  const std::size_t Co = ws[0], Ci = ws[1], P = ws[2] * ws[3];
  Tensor out({Co, xs[1], xs[2], 2});
  const double* wv = w.value().data.data();
  const double* xv = x.value().data.data();
  for (std::size_t o = 0; o < Co; ++o)
    for (std::size_t i = 0; i < Ci; ++i) {
      const double* wp = wv + (o * Ci + i) * P * 2;
      const double* xp = xv + i * P * 2;
      double* op = out.data.data() + o * P * 2;
      for (std::size_t p = 0; p < P; ++p) {
        op[2 * p] += wp[2 * p] * xp[2 * p] - wp[2 * p + 1] * xp[2 * p + 1];
        op[2 * p + 1] += wp[2 * p] * xp[2 * p + 1] + wp[2 * p + 1] * xp[2 * p];
      }
    }
  return t.record("mode_multiply", std::move(out), {w, x}, [w, x, Co, Ci, P](Tape& tp, const Tensor& g) {
    const double* wv = w.value().data.data();
    const double* xv = x.value().data.data();
    double* gw = tp.needs_grad(w) ? tp.grad_buffer(w).data.data() : nullptr;
    double* gx = tp.needs_grad(x) ? tp.grad_buffer(x).data.data() : nullptr;
    for (std::size_t o = 0; o < Co; ++o)
      for (std::size_t i = 0; i < Ci; ++i) {
        const double* wp = wv + (o * Ci + i) * P * 2;
        const double* xp = xv + i * P * 2;
        const double* gp = g.data.data() + o * P * 2;
        for (std::size_t p = 0; p < P; ++p) {
          const double gr = gp[2 * p], gi = gp[2 * p + 1];
          if (gx) {
            // conj(w) * g
            gx[(i * P + p) * 2] += wp[2 * p] * gr + wp[2 * p + 1] * gi;
            gx[(i * P + p) * 2 + 1] += wp[2 * p] * gi - wp[2 * p + 1] * gr;
          }
          if (gw) {
            // g * conj(x)
            gw[((o * Ci + i) * P + p) * 2] += gr * xp[2 * p] + gi * xp[2 * p + 1];
            gw[((o * Ci + i) * P + p) * 2 + 1] += gi * xp[2 * p] - gr * xp[2 * p + 1];
          }
        }
      }
  });
}

std::vector<Tensor> gradients(const GraphBuilder& build, const std::vector<Tensor>& params, double seed) {
  Tape t;
  std::vector<Var> leaves;
  leaves.reserve(params.size());
  for (const auto& p : params) leaves.push_back(t.leaf(p));
  Var out = build(t, leaves);
  t.backward(out, seed);
  std::vector<Tensor> g;
  g.reserve(leaves.size());
  for (Var v : leaves) g.push_back(t.grad(v));
  return g;
}

double gradcheck(const GraphBuilder& build, const std::vector<Tensor>& params, double delta) {
  if (!(delta > 0.0)) throw std::invalid_argument("gradcheck: delta must be positive");
  const auto analytic = gradients(build, params, 1.0);
  auto eval = [&](const std::vector<Tensor>& ps) {
    Tape t;
    std::vector<Var> leaves;
    for (const auto& p : ps) leaves.push_back(t.constant(p));
    Var out = build(t, leaves);
    if (out.value().size() != 1) throw std::invalid_argument("gradcheck: builder must return a scalar");
    return out.value().data[0];
  };
  std::vector<Tensor> probe = params;
  double worst = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i)
    for (std::size_t e = 0; e < params[i].size(); ++e) {
      const double orig = params[i].data[e];
      probe[i].data[e] = orig + delta;
      const double up = eval(probe);
      probe[i].data[e] = orig - delta;
      const double dn = eval(probe);
      probe[i].data[e] = orig;
      const double fd = (up - dn) / (2.0 * delta);
      const double a = analytic[i].data[e];
      worst = std::max(worst, std::abs(a - fd) / std::max(std::abs(a), 1e-8));
    }
  return worst;
}

}  // namespace priorflow::tape
