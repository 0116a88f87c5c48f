#include "searchlab/encoders.hpp"

#include <algorithm>
#include <cmath>

namespace searchlab {

namespace {

double softplus(double z) {
  if (z > 30.0) return z;
  if (z < -30.0) return std::exp(z);
  return std::log1p(std::exp(z));
}

void check_shape(bool ok, const char* what) {
  if (!ok) throw Error(std::string("shape mismatch: ") + what);
}

Vec softmax(const Vec& scores) {
  double m = scores[0];
  for (double s : scores) m = std::max(m, s);
  Vec out(scores.size());
  double total = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out[i] = std::exp(scores[i] - m);
    total += out[i];
  }
  for (auto& v : out) v /= total;
  return out;
}

// Per-timestep layer norm with unit gain and zero bias.
Vec layer_norm(const Vec& x, double eps) {
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= static_cast<double>(x.size());
  Vec out(x.size());
  const double denom = std::sqrt(var + eps);
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - mean) / denom;
  return out;
}

}  // namespace

Mat matmul(const Mat& a, const Mat& b) {
  check_shape(a.cols == b.rows, "matmul");
  Mat out(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols; ++j) out(i, j) += aik * b(k, j);
    }
  return out;
}

Mat transpose(const Mat& m) {
  Mat out(m.cols, m.rows);
  for (std::size_t i = 0; i < m.rows; ++i)
    for (std::size_t j = 0; j < m.cols; ++j) out(j, i) = m(i, j);
  return out;
}

Vec bias_norm(const Vec& x, const Vec& b, double gamma, double eps) {
  check_shape(x.size() == b.size(), "bias_norm");
  double ms = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) ms += (x[i] - b[i]) * (x[i] - b[i]);
  ms /= static_cast<double>(x.size());
  const double scale = std::exp(gamma) / std::sqrt(ms + eps);
  Vec out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * scale;
  return out;
}

double swoosh(double x, SwooshVariant variant) {
  if (variant == SwooshVariant::R) return softplus(x - 1.0) - 0.08 * x - 0.313;
  return softplus(x - 4.0) - 0.08 * x - 0.035;
}

Vec bypass(const Vec& x, const Vec& y, const Vec& c, double lo, double hi) {
  check_shape(x.size() == y.size() && x.size() == c.size(), "bypass");
  Vec out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double ce = std::max(lo, std::min(hi, c[i]));
    out[i] = (1.0 - ce) * x[i] + ce * y[i];
  }
  return out;
}

std::pair<double, double> BypassSchedule::bounds_at(std::int64_t step) const {
  const double frac =
      warmup_steps <= 0
          ? 1.0
          : std::min(1.0, static_cast<double>(std::max<std::int64_t>(0, step)) /
                              static_cast<double>(warmup_steps));
  return {initial_lo + frac * (final_lo - initial_lo),
          initial_hi + frac * (final_hi - initial_hi)};
}

Mat retention_matrix(double gamma, std::size_t t) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw Error("retention decay must be in (0, 1)");
  Mat d(t, t);
  for (std::size_t i = 0; i < t; ++i) {
    double g = 1.0;
    for (std::size_t j = i + 1; j-- > 0;) {
      d(i, j) = g;
      g *= gamma;
    }
  }
  return d;
}

Mat retention(const Mat& q, const Mat& k, const Mat& v, double gamma) {
  check_shape(q.rows == k.rows && q.cols == k.cols && k.rows == v.rows, "retention");
  const double scale = 1.0 / std::sqrt(static_cast<double>(q.cols));
  Mat scores = matmul(q, transpose(k));
  const Mat d = retention_matrix(gamma, q.rows);
  for (std::size_t i = 0; i < scores.rows; ++i)
    for (std::size_t j = 0; j < scores.cols; ++j) scores(i, j) *= scale * d(i, j);
  return matmul(scores, v);
}

double retention_head_decay(int head) { return 1.0 - std::pow(2.0, -(5.0 + head)); }

Mat msr(const Mat& x, const MsrParams& params) {
  const auto heads = static_cast<std::size_t>(params.heads);
  check_shape(params.w_q.size() == heads && params.w_k.size() == heads &&
                  params.w_v.size() == heads,
              "msr head projections");
  check_shape(x.cols % heads == 0, "msr head split");
  const std::size_t dh = x.cols / heads;

  Mat concat(x.rows, x.cols);
  for (std::size_t h = 0; h < heads; ++h) {
    check_shape(params.w_q[h].rows == x.cols && params.w_q[h].cols == dh, "msr w_q");
    const Mat qh = matmul(x, params.w_q[h]);
    const Mat kh = matmul(x, params.w_k[h]);
    const Mat vh = matmul(x, params.w_v[h]);
    const Mat rh = retention(qh, kh, vh, retention_head_decay(static_cast<int>(h)));
    for (std::size_t t = 0; t < x.rows; ++t)
      for (std::size_t c = 0; c < dh; ++c) concat(t, h * dh + c) = rh(t, c);
  }

  // GroupNorm with one group per head, per timestep.
  for (std::size_t t = 0; t < concat.rows; ++t) {
    for (std::size_t h = 0; h < heads; ++h) {
      double mean = 0.0;
      for (std::size_t c = 0; c < dh; ++c) mean += concat(t, h * dh + c);
      mean /= static_cast<double>(dh);
      double var = 0.0;
      for (std::size_t c = 0; c < dh; ++c) {
        const double d = concat(t, h * dh + c) - mean;
        var += d * d;
      }
      var /= static_cast<double>(dh);
      const double denom = std::sqrt(var + params.group_norm_eps);
      for (std::size_t c = 0; c < dh; ++c)
        concat(t, h * dh + c) = (concat(t, h * dh + c) - mean) / denom;
    }
  }
  check_shape(params.w_out.rows == x.cols && params.w_out.cols == x.cols, "msr w_out");
  return matmul(concat, params.w_out);
}

Mat ssm_scan(const Mat& x, const SsmParams& params) {
  const std::size_t n = params.a_diag.size();
  check_shape(params.b_in.size() == n && params.c0.size() == n && params.c1.size() == n,
              "ssm parameter sizes");
  check_shape(params.delta.size() == x.rows, "ssm delta length");
  for (double dt : params.delta)
    if (!(dt > 0.0)) throw Error("ssm step sizes must be positive");

  Mat y(x.rows, x.cols);
  std::vector<double> h(n);
  for (std::size_t ch = 0; ch < x.cols; ++ch) {
    std::fill(h.begin(), h.end(), 0.0);
    for (std::size_t t = 0; t < x.rows; ++t) {
      const double dt = params.delta[t];
      const double xt = x(t, ch);
      double out = params.d_skip * xt;
      for (std::size_t s = 0; s < n; ++s) {
        const double a_bar = std::exp(dt * params.a_diag[s]);
        h[s] = a_bar * h[s] + dt * params.b_in[s] * xt;
        out += (params.c0[s] + params.c1[s] * xt) * h[s];
      }
      y(t, ch) = out;
    }
  }
  return y;
}

Mat flip_time(const Mat& x) {
  Mat out(x.rows, x.cols);
  for (std::size_t t = 0; t < x.rows; ++t)
    for (std::size_t c = 0; c < x.cols; ++c) out(t, c) = x(x.rows - 1 - t, c);
  return out;
}

Mat bimamba(const Mat& x, const BimambaParams& params) {
  const Mat fwd = ssm_scan(x, params.forward);
  const Mat bwd = flip_time(ssm_scan(flip_time(x), params.backward));
  Mat mixed(x.rows, x.cols);
  for (std::size_t t = 0; t < x.rows; ++t)
    for (std::size_t c = 0; c < x.cols; ++c)
      mixed(t, c) = params.alpha_fwd * fwd(t, c) + params.alpha_bwd * bwd(t, c);
  Mat out(x.rows, x.cols);
  for (std::size_t t = 0; t < x.rows; ++t) {
    const Vec normed = layer_norm(mixed.row(t), params.layer_norm_eps);
    for (std::size_t c = 0; c < x.cols; ++c) out(t, c) = normed[c] + x(t, c);
  }
  return out;
}

Vec attention_pool(const Mat& x, const Vec& q, const Mat& w_k) {
  check_shape(q.size() == x.cols && w_k.rows == x.cols && w_k.cols == x.cols,
              "attention_pool");
  const double scale = 1.0 / std::sqrt(static_cast<double>(x.cols));
  // qk = q^T W_K, then score_t = qk . x_t
  Vec qk(x.cols, 0.0);
  for (std::size_t i = 0; i < x.cols; ++i)
    for (std::size_t j = 0; j < x.cols; ++j) qk[j] += q[i] * w_k(i, j);
  Vec scores(x.rows, 0.0);
  for (std::size_t t = 0; t < x.rows; ++t) {
    double s = 0.0;
    for (std::size_t j = 0; j < x.cols; ++j) s += qk[j] * x(t, j);
    scores[t] = s * scale;
  }
  const Vec w = softmax(scores);
  Vec out(x.cols, 0.0);
  for (std::size_t t = 0; t < x.rows; ++t)
    for (std::size_t j = 0; j < x.cols; ++j) out[j] += w[t] * x(t, j);
  return out;
}

Mat downsample_softmax(const Mat& x, const Vec& alpha, std::size_t factor) {
  check_shape(factor >= 1 && alpha.size() == factor, "downsample factor");
  std::size_t padded_rows = x.rows;
  if (padded_rows % factor != 0) padded_rows += factor - (padded_rows % factor);
  const Vec w = softmax(alpha);
  Mat out(padded_rows / factor, x.cols);
  for (std::size_t t = 0; t < out.rows; ++t) {
    for (std::size_t j = 0; j < factor; ++j) {
      const std::size_t src = std::min(t * factor + j, x.rows - 1);  // repeat last frame
      for (std::size_t c = 0; c < x.cols; ++c) out(t, c) += w[j] * x(src, c);
    }
  }
  return out;
}

double focal_loss(const Vec& p, std::size_t y, double alpha, double gamma, bool* clipped) {
  if (y >= p.size()) throw Error("focal_loss: label out of range");
  double py = p[y];
  if (clipped) *clipped = false;
  if (py < 1e-12) {
    py = 1e-12;
    if (clipped) *clipped = true;
  }
  const double alpha_y = y == 1 ? alpha : 1.0 - alpha;
  return -alpha_y * std::pow(1.0 - py, gamma) * std::log(py);
}

namespace {

Mat map_rows(const Mat& x, const Vec& b, double gamma, double eps) {
  Mat out(x.rows, x.cols);
  for (std::size_t t = 0; t < x.rows; ++t) out.set_row(t, bias_norm(x.row(t), b, gamma, eps));
  return out;
}

Mat bypass_rows(const Mat& x, const Mat& y, const Vec& c, double lo, double hi) {
  Mat out(x.rows, x.cols);
  for (std::size_t t = 0; t < x.rows; ++t)
    out.set_row(t, bypass(x.row(t), y.row(t), c, lo, hi));
  return out;
}

Mat add(const Mat& a, const Mat& b) {
  Mat out(a.rows, a.cols);
  for (std::size_t i = 0; i < a.data.size(); ++i) out.data[i] = a.data[i] + b.data[i];
  return out;
}

Mat self_attention(const Mat& x, const ZipformerBlockParams& p) {
  const Mat q = matmul(x, p.w_q);
  const Mat k = matmul(x, p.w_k);
  const Mat v = matmul(x, p.w_v);
  const double scale = 1.0 / std::sqrt(static_cast<double>(x.cols));
  Mat attn(x.rows, x.cols);
  Vec scores(x.rows);
  for (std::size_t i = 0; i < x.rows; ++i) {
    for (std::size_t j = 0; j < x.rows; ++j) {
      double s = 0.0;
      for (std::size_t c = 0; c < x.cols; ++c) s += q(i, c) * k(j, c);
      scores[j] = s * scale;
    }
    const Vec w = softmax(scores);
    for (std::size_t j = 0; j < x.rows; ++j)
      for (std::size_t c = 0; c < x.cols; ++c) attn(i, c) += w[j] * v(j, c);
  }
  return matmul(attn, p.w_o);
}

Mat depthwise_conv3(const Mat& x, const Mat& kernel) {
  Mat out(x.rows, x.cols);
  for (std::size_t t = 0; t < x.rows; ++t) {
    for (std::size_t c = 0; c < x.cols; ++c) {
      double acc = 0.0;
      for (int k = -1; k <= 1; ++k) {
        const long tt = static_cast<long>(t) + k;
        if (tt < 0 || tt >= static_cast<long>(x.rows)) continue;  // zero padding
        acc += kernel(c, static_cast<std::size_t>(k + 1)) *
               x(static_cast<std::size_t>(tt), c);
      }
      out(t, c) = acc;
    }
  }
  return out;
}

Mat ffn(const Mat& x, const ZipformerBlockParams& p) {
  Mat hidden = matmul(x, p.ffn_w1);
  for (auto& v : hidden.data) v = swoosh(v, SwooshVariant::R);
  return matmul(hidden, p.ffn_w2);
}

}  // namespace

Mat zipformer_block(const Mat& x, const ZipformerBlockParams& p) {
  check_shape(p.w_q.rows == x.cols && p.conv_kernel.rows == x.cols &&
                  p.norm_bias1.size() == x.cols,
              "zipformer_block");
  const Mat h1 = bypass_rows(
      x, add(x, self_attention(map_rows(x, p.norm_bias1, p.norm_gamma1, p.norm_eps), p)),
      p.bypass_attn, p.bypass_lo, p.bypass_hi);
  const Mat h2 = bypass_rows(
      h1,
      add(h1, depthwise_conv3(map_rows(h1, p.norm_bias2, p.norm_gamma2, p.norm_eps),
                              p.conv_kernel)),
      p.bypass_conv, p.bypass_lo, p.bypass_hi);
  const Mat h3 = bypass_rows(
      h2, add(h2, ffn(map_rows(h2, p.norm_bias3, p.norm_gamma3, p.norm_eps), p)),
      p.bypass_ffn, p.bypass_lo, p.bypass_hi);
  return h3;
}

Mat hybrid_stack(const Mat& x, const HybridStackParams& params) {
  Mat out = x;
  for (int layer = 0; layer < params.n_layers; ++layer) {
    if (layer % 2 == 0)
      out = add(out, msr(out, params.retention));
    else
      out = bimamba(out, params.mamba);
  }
  return out;
}

}  // namespace searchlab
