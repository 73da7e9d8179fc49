#include "ica_lab/tape.hpp"

namespace ica_lab {

Tape::CondOutputs Tape::conditioner(int u, int p0, bool with_derivs) {
  constexpr int H = kCondHidden;
  const double* w_in = &val_[p0];
  const double* b_hid = &val_[p0 + H];
  const double* w_shift = &val_[p0 + 2 * H];
  const double b_shift = val_[p0 + 3 * H];
  const double* w_scale = &val_[p0 + 3 * H + 1];
  const double b_scale = val_[p0 + 4 * H + 1];

  CondRec rec;
  rec.u = u;
  rec.p0 = p0;
  rec.with_derivs = with_derivs;
  rec.u_val = val_[u];
  rec.out_adj[0] = rec.out_adj[1] = rec.out_adj[2] = rec.out_adj[3] = 0.0;

  double m = b_shift, sig = b_scale, dm = 0.0, dsig = 0.0;
  for (int i = 0; i < H; ++i) {
    double h = std::tanh(w_in[i] * rec.u_val + b_hid[i]);
    double t = 1.0 - h * h;
    rec.h[i] = h;
    rec.t[i] = t;
    m += w_shift[i] * h;
    sig += w_scale[i] * h;
    if (with_derivs) {
      dm += w_shift[i] * t * w_in[i];
      dsig += w_scale[i] * t * w_in[i];
    }
  }

  const int rec_idx = static_cast<int>(cond_.size());
  cond_.push_back(rec);

  CondOutputs out;
  out.m = push(Op::CondOut, rec_idx, 0, 0.0, m);
  out.sigma_raw = push(Op::CondOut, rec_idx, 1, 0.0, sig);
  if (with_derivs) {
    out.dm = push(Op::CondOut, rec_idx, 2, 0.0, dm);
    out.dsig = push(Op::CondOut, rec_idx, 3, 0.0, dsig);
  }
  return out;
}

void Tape::cond_backward(const CondRec& rec) {
  constexpr int H = kCondHidden;
  const double m_bar = rec.out_adj[0];
  const double s_bar = rec.out_adj[1];
  const double dm_bar = rec.out_adj[2];
  const double ds_bar = rec.out_adj[3];

  const int p0 = rec.p0;
  const double* w_in = &val_[p0];
  const double* w_shift = &val_[p0 + 2 * H];
  const double* w_scale = &val_[p0 + 3 * H + 1];

  double u_bar = 0.0;
  for (int i = 0; i < H; ++i) {
    const double h = rec.h[i];
    const double t = rec.t[i];
    double h_bar = m_bar * w_shift[i] + s_bar * w_scale[i];
    if (rec.with_derivs) {
      const double head_bar = dm_bar * w_shift[i] + ds_bar * w_scale[i];
      h_bar += -2.0 * h * (head_bar * w_in[i]);
      // direct appearances of the weights in the derivative heads
      adj_[p0 + 2 * H + i] += dm_bar * t * w_in[i];
      adj_[p0 + 3 * H + 1 + i] += ds_bar * t * w_in[i];
      adj_[p0 + i] += head_bar * t;
    }
    const double z_bar = h_bar * t;
    adj_[p0 + i] += z_bar * rec.u_val;
    adj_[p0 + H + i] += z_bar;
    adj_[p0 + 2 * H + i] += m_bar * h;
    adj_[p0 + 3 * H + 1 + i] += s_bar * h;
    u_bar += z_bar * w_in[i];
  }
  adj_[p0 + 3 * H] += m_bar;
  adj_[p0 + 4 * H + 1] += s_bar;
  adj_[rec.u] += u_bar;
}

void Tape::backward(int loss) {
  const int n = static_cast<int>(nodes_.size());
  if (loss < 0 || loss >= n) throw argument_error("Tape::backward: bad loss node");
  adj_.assign(n, 0.0);
  adj_[loss] = 1.0;
  for (auto& rec : cond_)
    rec.out_adj[0] = rec.out_adj[1] = rec.out_adj[2] = rec.out_adj[3] = 0.0;

  for (int i = n - 1; i >= 0; --i) {
    const double g = adj_[i];
    const Node& nd = nodes_[i];
    if (g == 0.0 && nd.op != Op::CondOut) continue;
    switch (nd.op) {
      case Op::Leaf:
        break;
      case Op::Add:
        adj_[nd.a] += g;
        adj_[nd.b] += g;
        break;
      case Op::Sub:
        adj_[nd.a] += g;
        adj_[nd.b] -= g;
        break;
      case Op::Mul:
        adj_[nd.a] += g * val_[nd.b];
        adj_[nd.b] += g * val_[nd.a];
        break;
      case Op::Neg:
        adj_[nd.a] -= g;
        break;
      case Op::Exp:
        adj_[nd.a] += g * val_[i];
        break;
      case Op::Log:
        adj_[nd.a] += g / val_[nd.a];
        break;
      case Op::Tanh:
        adj_[nd.a] += g * (1.0 - val_[i] * val_[i]);
        break;
      case Op::Square:
        adj_[nd.a] += g * 2.0 * val_[nd.a];
        break;
      case Op::Recip:
        adj_[nd.a] -= g * val_[i] * val_[i];
        break;
      case Op::AddC:
        adj_[nd.a] += g;
        break;
      case Op::MulC:
        adj_[nd.a] += g * nd.c;
        break;
      case Op::SubCR:
        adj_[nd.a] -= g;
        break;
      case Op::CondOut: {
        CondRec& rec = cond_[nd.a];
        rec.out_adj[nd.b] += g;
        // slot 0 is emitted first, so the sweep reaches it last: run the
        // fused backward once all head adjoints are in.
        if (nd.b == 0) cond_backward(rec);
        break;
      }
    }
  }
}

}  // namespace ica_lab
