#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "ica_lab/errors.hpp"

namespace ica_lab {

/// Hidden width of the fused one-hidden-layer conditioner record.
constexpr int kCondHidden = 15;
/// Parameters per conditioner: input weights, hidden biases, two heads.
constexpr int kCondParams = 4 * kCondHidden + 2;

/// Reverse-mode autodiff tape over scalars.  Values are computed eagerly at
/// emission; `backward` runs one reverse sweep and accumulates adjoints.
///
/// Besides elementary ops, the tape supports a fused record for the
/// one-hidden-layer tanh conditioner used by the flow layers (input u ->
/// shift m, raw log-scale sigma, and optionally their u-derivatives).  The
/// fused forward/backward keeps graphs roughly an order of magnitude smaller
/// than a fully scalarized MLP, which is what makes training affordable.
class Tape {
 public:
  enum class Op : std::uint8_t {
    Leaf, Add, Sub, Mul, Neg, Exp, Log, Tanh, Square, Recip,
    AddC, MulC, SubCR,  // x + c, x * c, c - x
    CondOut
  };

  struct CondOutputs {
    int m = -1;          // shift head
    int sigma_raw = -1;  // unclamped log-scale head
    int dm = -1;         // d m / d u       (with_derivs only)
    int dsig = -1;       // d sigma_raw / d u
  };

  void reset() {
    nodes_.clear();
    val_.clear();
    adj_.clear();
    cond_.clear();
  }

  void reserve(std::size_t n) {
    nodes_.reserve(n);
    val_.reserve(n);
  }

  std::size_t size() const { return nodes_.size(); }
  double value(int i) const { return val_[i]; }
  double adjoint(int i) const { return adj_[i]; }

  int leaf(double v) { return push(Op::Leaf, -1, -1, 0.0, v); }
  int add(int a, int b) { return push(Op::Add, a, b, 0.0, val_[a] + val_[b]); }
  int sub(int a, int b) { return push(Op::Sub, a, b, 0.0, val_[a] - val_[b]); }
  int mul(int a, int b) { return push(Op::Mul, a, b, 0.0, val_[a] * val_[b]); }
  int neg(int a) { return push(Op::Neg, a, -1, 0.0, -val_[a]); }
  int exp_(int a) { return push(Op::Exp, a, -1, 0.0, std::exp(val_[a])); }
  int log_(int a) { return push(Op::Log, a, -1, 0.0, std::log(val_[a])); }
  int tanh_(int a) { return push(Op::Tanh, a, -1, 0.0, std::tanh(val_[a])); }
  int square(int a) { return push(Op::Square, a, -1, 0.0, val_[a] * val_[a]); }
  int recip(int a) { return push(Op::Recip, a, -1, 0.0, 1.0 / val_[a]); }
  int add_c(int a, double c) { return push(Op::AddC, a, -1, c, val_[a] + c); }
  int mul_c(int a, double c) { return push(Op::MulC, a, -1, c, val_[a] * c); }
  int c_sub(double c, int a) { return push(Op::SubCR, a, -1, c, c - val_[a]); }

  /// Fused conditioner.  `p0` is the index of the first of kCondParams
  /// consecutive leaves laid out as
  ///   w_in[15] | b_hid[15] | w_shift[15] | b_shift | w_scale[15] | b_scale.
  CondOutputs conditioner(int u, int p0, bool with_derivs);

  /// Reverse sweep from `loss` (seeds its adjoint with 1).
  void backward(int loss);

 private:
  struct Node {
    Op op;
    std::int32_t a, b;
    double c;
  };

  struct CondRec {
    std::int32_t u, p0;
    bool with_derivs;
    double u_val;
    double h[kCondHidden];
    double t[kCondHidden];
    double out_adj[4];
  };

  int push(Op op, int a, int b, double c, double v) {
    nodes_.push_back({op, a, b, c});
    val_.push_back(v);
    return static_cast<int>(nodes_.size()) - 1;
  }

  void cond_backward(const CondRec& rec);

  std::vector<Node> nodes_;
  std::vector<double> val_;
  std::vector<double> adj_;
  std::vector<CondRec> cond_;
};

}  // namespace ica_lab
