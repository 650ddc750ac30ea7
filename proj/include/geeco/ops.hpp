#pragma once

// Differentiable compute kernels: conv2d ("same" padding), dense, relu,
// LSTM cell, MSE / categorical cross-entropy, nearest-neighbour upsampling.
// Forward functions cache nothing; each op has an explicit backward that
// takes the saved forward inputs. Networks wire these by hand.

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "geeco/tensor.hpp"

namespace geeco::ops {

// C[m,n] += A[m,k] * B[k,n], all row-major dense. Register-blocked 4x16
// micro-kernel; accumulation stays in ascending-k order per output element,
// so results match the naive triple loop bit for bit.
template <typename T>
inline void gemm_acc(const T* A, const T* B, T* C, int M, int K, int N) {
  constexpr int MR = 4, NR = 16;
  int m = 0;
  for (; m + MR <= M; m += MR) {
    const T* a0 = A + static_cast<std::size_t>(m) * K;
    const T* a1 = a0 + K;
    const T* a2 = a1 + K;
    const T* a3 = a2 + K;
    T* c0 = C + static_cast<std::size_t>(m) * N;
    T* c1 = c0 + N;
    T* c2 = c1 + N;
    T* c3 = c2 + N;
    int n = 0;
    for (; n + NR <= N; n += NR) {
      T r0[NR], r1[NR], r2[NR], r3[NR];
      for (int j = 0; j < NR; ++j) {
        r0[j] = c0[n + j];
        r1[j] = c1[n + j];
        r2[j] = c2[n + j];
        r3[j] = c3[n + j];
      }
      for (int k = 0; k < K; ++k) {
        const T* b = B + static_cast<std::size_t>(k) * N + n;
        const T w0 = a0[k], w1 = a1[k], w2 = a2[k], w3 = a3[k];
        for (int j = 0; j < NR; ++j) {
          const T bj = b[j];
          r0[j] += w0 * bj;
          r1[j] += w1 * bj;
          r2[j] += w2 * bj;
          r3[j] += w3 * bj;
        }
      }
      for (int j = 0; j < NR; ++j) {
        c0[n + j] = r0[j];
        c1[n + j] = r1[j];
        c2[n + j] = r2[j];
        c3[n + j] = r3[j];
      }
    }
    for (; n < N; ++n) {
      T r0 = c0[n], r1 = c1[n], r2 = c2[n], r3 = c3[n];
      for (int k = 0; k < K; ++k) {
        const T b = B[static_cast<std::size_t>(k) * N + n];
        r0 += a0[k] * b;
        r1 += a1[k] * b;
        r2 += a2[k] * b;
        r3 += a3[k] * b;
      }
      c0[n] = r0;
      c1[n] = r1;
      c2[n] = r2;
      c3[n] = r3;
    }
  }
  for (; m < M; ++m) {
    T* crow = C + static_cast<std::size_t>(m) * N;
    const T* arow = A + static_cast<std::size_t>(m) * K;
    for (int k = 0; k < K; ++k) {
      const T a = arow[k];
      if (a == T(0)) continue;
      const T* brow = B + static_cast<std::size_t>(k) * N;
      for (int n = 0; n < N; ++n) crow[n] += a * brow[n];
    }
  }
}

struct ConvDims {
  int cin, hin, win, cout, k, stride;
  int hout, wout, pad_h, pad_w;  // pad_* is the leading (top/left) padding
};

template <typename T>
inline ConvDims conv_dims(const TensorT<T>& input, const TensorT<T>& kernel, int stride) {
  if (input.shape.size() != 3 || kernel.shape.size() != 4)
    throw std::invalid_argument("conv2d: input must be [C,H,W], kernel [Cout,Cin,k,k]");
  if (stride != 1 && stride != 2) throw std::invalid_argument("conv2d: stride must be 1 or 2");
  ConvDims d;
  d.cin = input.dim(0);
  d.hin = input.dim(1);
  d.win = input.dim(2);
  d.cout = kernel.dim(0);
  d.k = kernel.dim(2);
  d.stride = stride;
  if (kernel.dim(1) != d.cin)
    throw std::invalid_argument("conv2d: kernel input-channel mismatch");
  if (kernel.dim(3) != d.k) throw std::invalid_argument("conv2d: kernel must be square");
  if (d.hin < d.k || d.win < d.k)
    throw std::invalid_argument("conv2d: spatial dims smaller than kernel");
  d.hout = (d.hin + stride - 1) / stride;
  d.wout = (d.win + stride - 1) / stride;
  const int pth = std::max((d.hout - 1) * stride + d.k - d.hin, 0);
  const int ptw = std::max((d.wout - 1) * stride + d.k - d.win, 0);
  d.pad_h = pth / 2;
  d.pad_w = ptw / 2;
  return d;
}

// Scratch columns: [Cin*k*k, Hout*Wout].
template <typename T>
inline void im2col(const TensorT<T>& input, const ConvDims& d, std::vector<T>& cols) {
  const int span = d.hout * d.wout;
  cols.assign(static_cast<std::size_t>(d.cin * d.k * d.k) * span, T(0));
  for (int c = 0; c < d.cin; ++c) {
    for (int ky = 0; ky < d.k; ++ky) {
      for (int kx = 0; kx < d.k; ++kx) {
        T* dst = cols.data() + (static_cast<std::size_t>((c * d.k + ky) * d.k + kx)) * span;
        for (int oy = 0; oy < d.hout; ++oy) {
          const int iy = oy * d.stride - d.pad_h + ky;
          if (iy < 0 || iy >= d.hin) continue;
          for (int ox = 0; ox < d.wout; ++ox) {
            const int ix = ox * d.stride - d.pad_w + kx;
            if (ix < 0 || ix >= d.win) continue;
            dst[oy * d.wout + ox] = input.at3(c, iy, ix);
          }
        }
      }
    }
  }
}

template <typename T>
inline TensorT<T> conv2d(const TensorT<T>& input, const TensorT<T>& kernel, int stride) {
  const ConvDims d = conv_dims(input, kernel, stride);
  const int span = d.hout * d.wout;
  std::vector<T> cols;
  im2col(input, d, cols);
  TensorT<T> out({d.cout, d.hout, d.wout});
  gemm_acc(kernel.data.data(), cols.data(), out.data.data(), d.cout, d.cin * d.k * d.k, span);
  return out;
}

// Accumulates into grad_kernel; grad_input is overwritten.
template <typename T>
inline void conv2d_backward(const TensorT<T>& input, const TensorT<T>& kernel, int stride,
                            const TensorT<T>& grad_out, TensorT<T>& grad_input,
                            TensorT<T>& grad_kernel) {
  const ConvDims d = conv_dims(input, kernel, stride);
  const int span = d.hout * d.wout;
  const int kk = d.cin * d.k * d.k;
  std::vector<T> cols;
  im2col(input, d, cols);

  // dK[m, j] += sum_n dOut[m, n] * cols[j, n]; lane-partial accumulators keep
  // the loops vectorizable without relaxing float semantics globally
  if (!grad_kernel.same_shape(kernel)) grad_kernel = TensorT<T>(kernel.shape);
  constexpr int L = 8;
  for (int m = 0; m < d.cout; ++m) {
    const T* go = grad_out.data.data() + static_cast<std::size_t>(m) * span;
    T* gk = grad_kernel.data.data() + static_cast<std::size_t>(m) * kk;
    int j = 0;
    for (; j + 4 <= kk; j += 4) {
      const T* col0 = cols.data() + static_cast<std::size_t>(j) * span;
      const T* col1 = col0 + span;
      const T* col2 = col1 + span;
      const T* col3 = col2 + span;
      T p0[L] = {}, p1[L] = {}, p2[L] = {}, p3[L] = {};
      int n = 0;
      for (; n + L <= span; n += L) {
        for (int l = 0; l < L; ++l) {
          const T g = go[n + l];
          p0[l] += g * col0[n + l];
          p1[l] += g * col1[n + l];
          p2[l] += g * col2[n + l];
          p3[l] += g * col3[n + l];
        }
      }
      T a0 = 0, a1 = 0, a2 = 0, a3 = 0;
      for (int l = 0; l < L; ++l) a0 += p0[l], a1 += p1[l], a2 += p2[l], a3 += p3[l];
      for (; n < span; ++n) {
        const T g = go[n];
        a0 += g * col0[n];
        a1 += g * col1[n];
        a2 += g * col2[n];
        a3 += g * col3[n];
      }
      gk[j] += a0;
      gk[j + 1] += a1;
      gk[j + 2] += a2;
      gk[j + 3] += a3;
    }
    for (; j < kk; ++j) {
      const T* col = cols.data() + static_cast<std::size_t>(j) * span;
      T acc = T(0);
      for (int n = 0; n < span; ++n) acc += go[n] * col[n];
      gk[j] += acc;
    }
  }

  // dcols[j, n] = sum_m K[m, j] * dOut[m, n]; then col2im scatter-add.
  std::vector<T> kt(static_cast<std::size_t>(kk) * d.cout);
  for (int m = 0; m < d.cout; ++m)
    for (int j = 0; j < kk; ++j)
      kt[static_cast<std::size_t>(j) * d.cout + m] = kernel.data[static_cast<std::size_t>(m) * kk + j];
  std::vector<T> dcols(static_cast<std::size_t>(kk) * span, T(0));
  gemm_acc(kt.data(), grad_out.data.data(), dcols.data(), kk, d.cout, span);
  grad_input = TensorT<T>(input.shape);
  for (int c = 0; c < d.cin; ++c) {
    for (int ky = 0; ky < d.k; ++ky) {
      for (int kx = 0; kx < d.k; ++kx) {
        const T* src = dcols.data() + (static_cast<std::size_t>((c * d.k + ky) * d.k + kx)) * span;
        for (int oy = 0; oy < d.hout; ++oy) {
          const int iy = oy * d.stride - d.pad_h + ky;
          if (iy < 0 || iy >= d.hin) continue;
          for (int ox = 0; ox < d.wout; ++ox) {
            const int ix = ox * d.stride - d.pad_w + kx;
            if (ix < 0 || ix >= d.win) continue;
            grad_input.at3(c, iy, ix) += src[oy * d.wout + ox];
          }
        }
      }
    }
  }
}

// y = W x + b with W [m,n], x [n], b [m].
template <typename T>
inline TensorT<T> dense(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& b) {
  if (w.shape.size() != 2 || x.numel() != static_cast<std::size_t>(w.dim(1)) ||
      b.numel() != static_cast<std::size_t>(w.dim(0)))
    throw std::invalid_argument("dense: shape mismatch");
  const int m = w.dim(0), n = w.dim(1);
  TensorT<T> y({m});
  for (int i = 0; i < m; ++i) {
    const T* row = w.data.data() + static_cast<std::size_t>(i) * n;
    T acc = b[i];
    for (int j = 0; j < n; ++j) acc += row[j] * x[j];
    y[i] = acc;
  }
  return y;
}

// Accumulates into grad_w / grad_b; grad_x is overwritten.
template <typename T>
inline void dense_backward(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& grad_y,
                           TensorT<T>& grad_x, TensorT<T>& grad_w, TensorT<T>& grad_b) {
  const int m = w.dim(0), n = w.dim(1);
  grad_x = TensorT<T>(x.shape);
  if (!grad_w.same_shape(w)) grad_w = TensorT<T>(w.shape);
  if (grad_b.numel() != static_cast<std::size_t>(m)) grad_b = TensorT<T>({m});
  for (int i = 0; i < m; ++i) {
    const T gy = grad_y[i];
    grad_b[i] += gy;
    const T* row = w.data.data() + static_cast<std::size_t>(i) * n;
    T* gw = grad_w.data.data() + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      gw[j] += gy * x[j];
      grad_x[j] += gy * row[j];
    }
  }
}

template <typename T>
inline TensorT<T> relu(const TensorT<T>& x) {
  TensorT<T> y(x.shape);
  for (std::size_t i = 0; i < x.numel(); ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
  return y;
}

// Subgradient at 0 is 0.
template <typename T>
inline TensorT<T> relu_backward(const TensorT<T>& x, const TensorT<T>& grad_y) {
  TensorT<T> gx(x.shape);
  for (std::size_t i = 0; i < x.numel(); ++i) gx[i] = x[i] > T(0) ? grad_y[i] : T(0);
  return gx;
}

// LSTM cell parameters: wx [4h, d], wh [4h, h], b [4h]; gate order (i, f, g, o).
template <typename T>
struct LstmCache {
  TensorT<T> x, h_prev, c_prev;
  TensorT<T> gates;  // post-activation, [4h]
  TensorT<T> c_new, tanh_c_new;
};

template <typename T>
inline void lstm_cell(const TensorT<T>& x, const TensorT<T>& h_prev, const TensorT<T>& c_prev,
                      const TensorT<T>& wx, const TensorT<T>& wh, const TensorT<T>& b,
                      TensorT<T>& h_out, TensorT<T>& c_out, LstmCache<T>* cache = nullptr) {
  const int hidden = wh.dim(1);
  if (wx.dim(0) != 4 * hidden || h_prev.numel() != static_cast<std::size_t>(hidden) ||
      c_prev.numel() != static_cast<std::size_t>(hidden) ||
      x.numel() != static_cast<std::size_t>(wx.dim(1)))
    throw std::invalid_argument("lstm_cell: shape mismatch");
  TensorT<T> pre({4 * hidden});
  const int d = wx.dim(1);
  for (int i = 0; i < 4 * hidden; ++i) {
    const T* rx = wx.data.data() + static_cast<std::size_t>(i) * d;
    const T* rh = wh.data.data() + static_cast<std::size_t>(i) * hidden;
    T acc = b[i];
    for (int j = 0; j < d; ++j) acc += rx[j] * x[j];
    for (int j = 0; j < hidden; ++j) acc += rh[j] * h_prev[j];
    pre[i] = acc;
  }
  TensorT<T> gates({4 * hidden});
  auto sigmoid = [](T v) { return T(1) / (T(1) + std::exp(-v)); };
  for (int j = 0; j < hidden; ++j) {
    gates[j] = sigmoid(pre[j]);                          // input gate
    gates[hidden + j] = sigmoid(pre[hidden + j]);        // forget gate
    gates[2 * hidden + j] = std::tanh(pre[2 * hidden + j]);  // candidate
    gates[3 * hidden + j] = sigmoid(pre[3 * hidden + j]);    // output gate
  }
  c_out = TensorT<T>({hidden});
  h_out = TensorT<T>({hidden});
  TensorT<T> tc({hidden});
  for (int j = 0; j < hidden; ++j) {
    c_out[j] = gates[hidden + j] * c_prev[j] + gates[j] * gates[2 * hidden + j];
    tc[j] = std::tanh(c_out[j]);
    h_out[j] = gates[3 * hidden + j] * tc[j];
  }
  if (cache) {
    cache->x = x;
    cache->h_prev = h_prev;
    cache->c_prev = c_prev;
    cache->gates = std::move(gates);
    cache->c_new = c_out;
    cache->tanh_c_new = std::move(tc);
  }
}

// Backward through one cell. grad_h / grad_c are the gradients flowing into
// h_out / c_out; parameter grads accumulate; dx, dh_prev, dc_prev overwrite.
template <typename T>
inline void lstm_cell_backward(const LstmCache<T>& cc, const TensorT<T>& wx, const TensorT<T>& wh,
                               const TensorT<T>& grad_h, const TensorT<T>& grad_c,
                               TensorT<T>& dx, TensorT<T>& dh_prev, TensorT<T>& dc_prev,
                               TensorT<T>& gwx, TensorT<T>& gwh, TensorT<T>& gb) {
  const int hidden = wh.dim(1);
  const int d = wx.dim(1);
  if (!gwx.same_shape(wx)) gwx = TensorT<T>(wx.shape);
  if (!gwh.same_shape(wh)) gwh = TensorT<T>(wh.shape);
  if (gb.numel() != static_cast<std::size_t>(4 * hidden)) gb = TensorT<T>({4 * hidden});

  TensorT<T> dpre({4 * hidden});
  dc_prev = TensorT<T>({hidden});
  for (int j = 0; j < hidden; ++j) {
    const T gi = cc.gates[j], gf = cc.gates[hidden + j];
    const T gg = cc.gates[2 * hidden + j], go = cc.gates[3 * hidden + j];
    const T tc = cc.tanh_c_new[j];
    const T dc = grad_c[j] + grad_h[j] * go * (T(1) - tc * tc);
    dpre[3 * hidden + j] = grad_h[j] * tc * go * (T(1) - go);
    dpre[j] = dc * gg * gi * (T(1) - gi);
    dpre[hidden + j] = dc * cc.c_prev[j] * gf * (T(1) - gf);
    dpre[2 * hidden + j] = dc * gi * (T(1) - gg * gg);
    dc_prev[j] = dc * gf;
  }
  dx = TensorT<T>({d});
  dh_prev = TensorT<T>({hidden});
  for (int i = 0; i < 4 * hidden; ++i) {
    const T g = dpre[i];
    gb[i] += g;
    const T* rx = wx.data.data() + static_cast<std::size_t>(i) * d;
    const T* rh = wh.data.data() + static_cast<std::size_t>(i) * hidden;
    T* grx = gwx.data.data() + static_cast<std::size_t>(i) * d;
    T* grh = gwh.data.data() + static_cast<std::size_t>(i) * hidden;
    for (int j = 0; j < d; ++j) {
      grx[j] += g * cc.x[j];
      dx[j] += g * rx[j];
    }
    for (int j = 0; j < hidden; ++j) {
      grh[j] += g * cc.h_prev[j];
      dh_prev[j] += g * rh[j];
    }
  }
}

template <typename T>
inline T mse(const TensorT<T>& pred, const TensorT<T>& target) {
  if (!pred.same_shape(target)) throw std::invalid_argument("mse: shape mismatch");
  T acc = T(0);
  for (std::size_t i = 0; i < pred.numel(); ++i) {
    const T d = pred[i] - target[i];
    acc += d * d;
  }
  return acc / static_cast<T>(pred.numel());
}

template <typename T>
inline TensorT<T> mse_backward(const TensorT<T>& pred, const TensorT<T>& target, T grad = T(1)) {
  TensorT<T> g(pred.shape);
  const T scale = grad * T(2) / static_cast<T>(pred.numel());
  for (std::size_t i = 0; i < pred.numel(); ++i) g[i] = scale * (pred[i] - target[i]);
  return g;
}

template <typename T>
inline TensorT<T> softmax(const TensorT<T>& logits) {
  TensorT<T> p(logits.shape);
  T mx = logits[0];
  for (std::size_t i = 1; i < logits.numel(); ++i) mx = std::max(mx, logits[i]);
  T sum = T(0);
  for (std::size_t i = 0; i < logits.numel(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    sum += p[i];
  }
  for (auto& v : p.data) v /= sum;
  return p;
}

template <typename T>
inline int one_hot_class(const TensorT<T>& target) {
  int cls = -1;
  for (std::size_t i = 0; i < target.numel(); ++i) {
    if (target[i] == T(1)) {
      if (cls >= 0) throw std::invalid_argument("cce: target is not one-hot");
      cls = static_cast<int>(i);
    } else if (target[i] != T(0)) {
      throw std::invalid_argument("cce: target is not one-hot");
    }
  }
  if (cls < 0) throw std::invalid_argument("cce: target is not one-hot");
  return cls;
}

template <typename T>
inline T categorical_cross_entropy(const TensorT<T>& logits, const TensorT<T>& target) {
  if (!logits.same_shape(target)) throw std::invalid_argument("cce: shape mismatch");
  const int cls = one_hot_class(target);
  T mx = logits[0];
  for (std::size_t i = 1; i < logits.numel(); ++i) mx = std::max(mx, logits[i]);
  T lse = T(0);
  for (std::size_t i = 0; i < logits.numel(); ++i) lse += std::exp(logits[i] - mx);
  return std::log(lse) + mx - logits[cls];
}

template <typename T>
inline TensorT<T> cce_backward(const TensorT<T>& logits, const TensorT<T>& target, T grad = T(1)) {
  const int cls = one_hot_class(target);
  TensorT<T> g = softmax(logits);
  g[cls] -= T(1);
  g *= grad;
  return g;
}

template <typename T>
inline T l1(const TensorT<T>& pred, const TensorT<T>& target) {
  if (!pred.same_shape(target)) throw std::invalid_argument("l1: shape mismatch");
  T acc = T(0);
  for (std::size_t i = 0; i < pred.numel(); ++i) acc += std::abs(pred[i] - target[i]);
  return acc / static_cast<T>(pred.numel());
}

template <typename T>
inline TensorT<T> l1_backward(const TensorT<T>& pred, const TensorT<T>& target, T grad = T(1)) {
  TensorT<T> g(pred.shape);
  const T scale = grad / static_cast<T>(pred.numel());
  for (std::size_t i = 0; i < pred.numel(); ++i) {
    const T d = pred[i] - target[i];
    g[i] = d > T(0) ? scale : (d < T(0) ? -scale : T(0));
  }
  return g;
}

// Nearest-neighbour 2x upsampling for [C,H,W].
template <typename T>
inline TensorT<T> upsample2x(const TensorT<T>& x) {
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  TensorT<T> y({c, 2 * h, 2 * w});
  for (int ci = 0; ci < c; ++ci)
    for (int yi = 0; yi < 2 * h; ++yi)
      for (int xi = 0; xi < 2 * w; ++xi) y.at3(ci, yi, xi) = x.at3(ci, yi / 2, xi / 2);
  return y;
}

template <typename T>
inline TensorT<T> upsample2x_backward(const TensorT<T>& grad_y) {
  const int c = grad_y.dim(0), h = grad_y.dim(1) / 2, w = grad_y.dim(2) / 2;
  TensorT<T> gx({c, h, w});
  for (int ci = 0; ci < c; ++ci)
    for (int yi = 0; yi < 2 * h; ++yi)
      for (int xi = 0; xi < 2 * w; ++xi) gx.at3(ci, yi / 2, xi / 2) += grad_y.at3(ci, yi, xi);
  return gx;
}

}  // namespace geeco::ops
