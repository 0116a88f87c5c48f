#pragma once

// Reference implementations of the temporal-encoder component math:
// BiasNorm / Swoosh / Bypass and the composed Zipformer block, multi-scale
// retention, the selective-SSM scan with its bidirectional wrapper,
// attention pooling, learned downsampling, and focal loss. Pure numeric
// functions, no training.

#include <cstddef>
#include <vector>

#include "searchlab/errors.hpp"

namespace searchlab {

using Vec = std::vector<double>;

// Minimal row-major matrix; a SequenceTensor is a Mat with T rows and d cols.
struct Mat {
  std::size_t rows = 0, cols = 0;
  std::vector<double> data;

  Mat() = default;
  Mat(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  Vec row(std::size_t r) const {
    return Vec(data.begin() + static_cast<long>(r * cols),
               data.begin() + static_cast<long>((r + 1) * cols));
  }
  void set_row(std::size_t r, const Vec& v) {
    for (std::size_t c = 0; c < cols; ++c) (*this)(r, c) = v[c];
  }
};

Mat matmul(const Mat& a, const Mat& b);
Mat transpose(const Mat& m);

// x * exp(gamma) / sqrt(mean_j (x_j - b_j)^2 + eps)
Vec bias_norm(const Vec& x, const Vec& b, double gamma, double eps);

enum class SwooshVariant { R, L };

// R: log(1 + e^(x-1)) - 0.08 x - 0.313;  L: log(1 + e^(x-4)) - 0.08 x - 0.035
double swoosh(double x, SwooshVariant variant);

// Elementwise (1 - c_eff) * x + c_eff * y with c clamped into [lo, hi].
Vec bypass(const Vec& x, const Vec& y, const Vec& c, double lo, double hi);

struct BypassSchedule {
  double initial_lo = 0.9, initial_hi = 1.0;
  double final_lo = 0.0, final_hi = 1.0;
  std::int64_t warmup_steps = 1000;

  // Bounds relax linearly from the initial to the final interval.
  std::pair<double, double> bounds_at(std::int64_t step) const;
};

// Lower-triangular decay matrix D_ij = gamma^(i-j) for i >= j.
Mat retention_matrix(double gamma, std::size_t t);

// (Q K^T / sqrt(d) ⊙ D(gamma)) V
Mat retention(const Mat& q, const Mat& k, const Mat& v, double gamma);

// Per-head decay rate gamma_h = 1 - 2^-(5+h).
double retention_head_decay(int head);

struct MsrParams {
  int heads = 2;
  std::vector<Mat> w_q, w_k, w_v;  // per head, d x (d / heads)
  Mat w_out;                       // d x d
  double group_norm_eps = 1e-5;
};

// Multi-scale retention: per-head retention, concat, GroupNorm (one group
// per head), output projection.
Mat msr(const Mat& x, const MsrParams& params);

struct SsmParams {
  // Per-channel-shared diagonal SSM of state size n: A (diagonal, negative),
  // B, and an input-affine readout C(x_t) = c0 + c1 * x_t[channel].
  Vec a_diag;
  Vec b_in;
  Vec c0, c1;
  double d_skip = 0.0;
  Vec delta;  // per timestep, > 0
};

// Zero-order-hold style recurrence: h_t = exp(delta_t A) h_{t-1} +
// (delta_t B) x_t, y_t = C(x_t)^T h_t + D x_t. Throws on delta <= 0.
Mat ssm_scan(const Mat& x, const SsmParams& params);

struct BimambaParams {
  SsmParams forward, backward;
  double alpha_fwd = 0.5, alpha_bwd = 0.5;
  double layer_norm_eps = 1e-5;
};

// LN(alpha_fwd * fwd(x) + alpha_bwd * flip(bwd(flip(x)))) + x
Mat bimamba(const Mat& x, const BimambaParams& params);

Mat flip_time(const Mat& x);

// Pool weights softmax_t(q^T W_K x_t / sqrt(d)); output sum_t w_t x_t.
Vec attention_pool(const Mat& x, const Vec& q, const Mat& w_k);

// Output frame t' = sum_j softmax(alpha)_j x_{t'*factor + j}; the tail is
// right-padded by repeating the last frame.
Mat downsample_softmax(const Mat& x, const Vec& alpha, std::size_t factor);

// -alpha_y (1 - p_y)^gamma log(p_y); p_y clipped at 1e-12 (sets *clipped).
double focal_loss(const Vec& p, std::size_t y, double alpha, double gamma,
                  bool* clipped = nullptr);

struct ZipformerBlockParams {
  // Self-attention (single head), depthwise conv (width 3), feedforward.
  Mat w_q, w_k, w_v, w_o;  // d x d
  Mat conv_kernel;         // d x 3, per-channel
  Mat ffn_w1, ffn_w2;      // d x h, h x d
  Vec norm_bias1, norm_bias2, norm_bias3;
  double norm_gamma1 = 0.0, norm_gamma2 = 0.0, norm_gamma3 = 0.0;
  double norm_eps = 1e-5;
  Vec bypass_attn, bypass_conv, bypass_ffn;  // d-vectors
  double bypass_lo = 0.0, bypass_hi = 1.0;
};

// h1 = Bypass(x, x + MHSA(BiasNorm(x)));  h2 = Bypass(h1, h1 +
// Conv1D(BiasNorm(h1)));  h3 = Bypass(h2, h2 + FFN(BiasNorm(h2))).
Mat zipformer_block(const Mat& x, const ZipformerBlockParams& params);

struct HybridStackParams {
  int n_layers = 2;
  MsrParams retention;
  BimambaParams mamba;
};

// Even layers x <- x + MSR(x); odd layers x <- BiMamba(x).
Mat hybrid_stack(const Mat& x, const HybridStackParams& params);

}  // namespace searchlab
