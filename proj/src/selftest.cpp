#include "searchlab/selftest.hpp"

#include <cmath>
#include <cstdio>

#include "searchlab/encoders.hpp"
#include "searchlab/rng.hpp"

namespace searchlab {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

Vec random_vec(std::size_t n, Rng& rng, double scale = 1.0) {
  Vec v(n);
  for (auto& x : v) x = rng.uniform(-scale, scale);
  return v;
}

Mat random_mat(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
  Mat m(r, c);
  for (auto& x : m.data) x = rng.uniform(-scale, scale);
  return m;
}

MsrParams random_msr(std::size_t d, int heads, Rng& rng) {
  MsrParams p;
  p.heads = heads;
  const std::size_t dh = d / static_cast<std::size_t>(heads);
  for (int h = 0; h < heads; ++h) {
    p.w_q.push_back(random_mat(d, dh, rng, 0.4));
    p.w_k.push_back(random_mat(d, dh, rng, 0.4));
    p.w_v.push_back(random_mat(d, dh, rng, 0.4));
  }
  p.w_out = random_mat(d, d, rng, 0.4);
  return p;
}

SsmParams random_ssm(std::size_t t, std::size_t n_state, Rng& rng) {
  SsmParams p;
  p.a_diag = random_vec(n_state, rng, 1.0);
  for (auto& a : p.a_diag) a = -std::fabs(a) - 0.05;
  p.b_in = random_vec(n_state, rng, 0.8);
  p.c0 = random_vec(n_state, rng, 0.8);
  p.c1 = random_vec(n_state, rng, 0.3);
  p.d_skip = rng.uniform(-0.5, 0.5);
  p.delta.resize(t);
  for (auto& dt : p.delta) dt = rng.uniform(0.05, 1.0);
  return p;
}

// Independent unrolled-sum oracle for the SSM recurrence.
Mat ssm_unrolled(const Mat& x, const SsmParams& p) {
  const std::size_t n = p.a_diag.size();
  Mat y(x.rows, x.cols);
  for (std::size_t ch = 0; ch < x.cols; ++ch) {
    for (std::size_t t = 0; t < x.rows; ++t) {
      double out = p.d_skip * x(t, ch);
      for (std::size_t s_dim = 0; s_dim < n; ++s_dim) {
        double h = 0.0;
        for (std::size_t s = 0; s <= t; ++s) {
          double decay = 1.0;
          for (std::size_t r = s + 1; r <= t; ++r)
            decay *= std::exp(p.delta[r] * p.a_diag[s_dim]);
          h += decay * p.delta[s] * p.b_in[s_dim] * x(s, ch);
        }
        out += (p.c0[s_dim] + p.c1[s_dim] * x(t, ch)) * h;
      }
      y(t, ch) = out;
    }
  }
  return y;
}

ZipformerBlockParams random_block(std::size_t d, std::size_t hidden, Rng& rng) {
  ZipformerBlockParams p;
  p.w_q = random_mat(d, d, rng, 0.3);
  p.w_k = random_mat(d, d, rng, 0.3);
  p.w_v = random_mat(d, d, rng, 0.3);
  p.w_o = random_mat(d, d, rng, 0.3);
  p.conv_kernel = random_mat(d, 3, rng, 0.4);
  p.ffn_w1 = random_mat(d, hidden, rng, 0.3);
  p.ffn_w2 = random_mat(hidden, d, rng, 0.3);
  p.norm_bias1 = random_vec(d, rng, 0.2);
  p.norm_bias2 = random_vec(d, rng, 0.2);
  p.norm_bias3 = random_vec(d, rng, 0.2);
  p.norm_gamma1 = rng.uniform(-0.3, 0.3);
  p.norm_gamma2 = rng.uniform(-0.3, 0.3);
  p.norm_gamma3 = rng.uniform(-0.3, 0.3);
  Vec c = random_vec(d, rng, 0.5);
  for (auto& v : c) v = std::fabs(v);
  p.bypass_attn = c;
  p.bypass_conv = random_vec(d, rng, 0.5);
  p.bypass_ffn = random_vec(d, rng, 0.5);
  for (auto& v : p.bypass_conv) v = std::fabs(v);
  for (auto& v : p.bypass_ffn) v = std::fabs(v);
  return p;
}

double max_abs_diff(const Mat& a, const Mat& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i)
    m = std::max(m, std::fabs(a.data[i] - b.data[i]));
  return m;
}

}  // namespace

std::vector<SelftestResult> run_encoder_selftest() {
  std::vector<SelftestResult> results;
  auto check = [&](const std::string& name, bool pass, const std::string& detail = "") {
    results.push_back({name, pass, detail});
  };
  Rng rng(20240517);

  {  // bias_norm scale invariance at b = 0, eps -> 0
    bool pass = true;
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
      const Vec x = random_vec(8, rng);
      const Vec b(8, 0.0);
      const Vec lhs = bias_norm(x, b, 0.37, 1e-12);
      Vec scaled = x;
      for (auto& v : scaled) v *= 7.0;
      const Vec rhs = bias_norm(scaled, b, 0.37, 1e-12);
      for (std::size_t i = 0; i < lhs.size(); ++i)
        worst = std::max(worst, std::fabs(lhs[i] - rhs[i]));
    }
    pass = worst < 1e-6;
    check("bias_norm positive-scale invariance", pass, "max diff " + fmt(worst));
  }
  {  // bias_norm at x = b and the direct unit evaluation
    const Vec x = {0.4, -1.2, 2.0};
    const Vec out = bias_norm(x, x, 0.5, 1e-6);
    bool pass = true;
    for (std::size_t i = 0; i < x.size(); ++i)
      pass = pass && std::fabs(out[i] - x[i] * std::exp(0.5) / std::sqrt(1e-6)) < 1e-6;
    const Vec unit = bias_norm({1.0, 1.0}, {0.0, 0.0}, 0.0, 0.0);
    pass = pass && std::fabs(unit[0] - 1.0) < 1e-12 && std::fabs(unit[1] - 1.0) < 1e-12;
    check("bias_norm closed-form points", pass);
  }
  {  // swoosh fixed points from direct evaluation of the formulas
    const double r0 = std::log1p(std::exp(-1.0)) - 0.313;
    const double l0 = std::log1p(std::exp(-4.0)) - 0.035;
    bool pass = std::fabs(swoosh(0.0, SwooshVariant::R) - r0) < 1e-12 &&
                std::fabs(swoosh(0.0, SwooshVariant::L) - l0) < 1e-12;
    // Asymptotic slope of softplus(x-1) - 0.08x is 0.92.
    const double slope = swoosh(101.0, SwooshVariant::R) - swoosh(100.0, SwooshVariant::R);
    pass = pass && std::fabs(slope - 0.92) < 1e-3;
    check("swoosh fixed points and asymptote", pass,
          "R(0)=" + fmt(swoosh(0.0, SwooshVariant::R)) +
              " L(0)=" + fmt(swoosh(0.0, SwooshVariant::L)));
  }
  {  // bypass endpoints, convexity, warmup clamp
    const Vec x = {1.0, -2.0, 0.5}, y = {-1.0, 4.0, 0.25};
    const Vec zero(3, 0.0), one(3, 1.0);
    bool pass = bypass(x, y, zero, 0.0, 1.0) == x && bypass(x, y, one, 0.0, 1.0) == y;
    const Vec mid = bypass(x, y, {0.3, 0.7, 0.5}, 0.0, 1.0);
    for (std::size_t i = 0; i < 3; ++i)
      pass = pass && mid[i] >= std::min(x[i], y[i]) - 1e-12 &&
             mid[i] <= std::max(x[i], y[i]) + 1e-12;
    BypassSchedule schedule;
    const auto [lo, hi] = schedule.bounds_at(0);
    const Vec warm = bypass(x, y, {0.2, 0.2, 0.2}, lo, hi);
    for (std::size_t i = 0; i < 3; ++i)
      pass = pass && std::fabs(warm[i] - (0.1 * x[i] + 0.9 * y[i])) < 1e-12;
    check("bypass interpolation and warmup clamp", pass);
  }
  {  // retention matrix closed form and monotonicity
    const Mat d = retention_matrix(0.5, 3);
    const double expected[3][3] = {{1, 0, 0}, {0.5, 1, 0}, {0.25, 0.5, 1}};
    bool pass = true;
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 3; ++j)
        pass = pass && std::fabs(d(i, j) - expected[i][j]) < 1e-12;
    for (double g : {0.3, 0.7, 0.96875}) {
      const Mat m = retention_matrix(g, 6);
      for (std::size_t j = 0; j < 6; ++j)
        for (std::size_t i = j + 1; i < 6; ++i)
          pass = pass && m(i, j) <= m(i - 1, j) + 1e-15 && m(j, j) == 1.0;
    }
    pass = pass && std::fabs(retention_head_decay(0) - 0.96875) < 1e-12;
    check("retention matrix closed form", pass);
  }
  {  // single-step retention reduces to (q.k/sqrt(d)) v
    const Mat q = random_mat(1, 4, rng), k = random_mat(1, 4, rng), v = random_mat(1, 4, rng);
    const Mat r = retention(q, k, v, 0.9);
    double qk = 0.0;
    for (std::size_t c = 0; c < 4; ++c) qk += q(0, c) * k(0, c);
    qk /= 2.0;  // sqrt(4)
    bool pass = true;
    for (std::size_t c = 0; c < 4; ++c) pass = pass && std::fabs(r(0, c) - qk * v(0, c)) < 1e-12;
    check("retention single-step reduction", pass);
  }
  {  // ssm prefix-sum degenerate case
    SsmParams p;
    p.a_diag = {0.0};
    p.b_in = {1.0};
    p.c0 = {1.0};
    p.c1 = {0.0};
    p.d_skip = 0.0;
    p.delta = Vec(6, 1.0);
    Mat x(6, 1);
    for (std::size_t t = 0; t < 6; ++t) x(t, 0) = static_cast<double>(t) + 1.0;
    const Mat y = ssm_scan(x, p);
    bool pass = true;
    double acc = 0.0;
    for (std::size_t t = 0; t < 6; ++t) {
      acc += x(t, 0);
      pass = pass && std::fabs(y(t, 0) - acc) < 1e-12;
    }
    check("ssm prefix-sum reduction", pass);
  }
  {  // ssm recurrence equals the unrolled-sum oracle
    double worst = 0.0;
    for (int trial = 0; trial < 40; ++trial) {
      const std::size_t t = 2 + rng.below(15);  // T <= 16
      const std::size_t d = 1 + rng.below(4);
      const SsmParams p = random_ssm(t, 1 + rng.below(4), rng);
      const Mat x = random_mat(t, d, rng);
      worst = std::max(worst, max_abs_diff(ssm_scan(x, p), ssm_unrolled(x, p)));
    }
    check("ssm scan vs unrolled oracle (1e-10)", worst < 1e-10, "max diff " + fmt(worst));
  }
  {  // bimamba palindrome invariance with symmetric parameters
    const std::size_t t = 7, d = 4;
    BimambaParams p;
    p.forward = random_ssm(t, 3, rng);
    p.backward = p.forward;
    p.alpha_fwd = p.alpha_bwd = 0.6;
    Mat x(t, d);
    for (std::size_t i = 0; i < t; ++i)
      for (std::size_t c = 0; c < d; ++c) {
        const std::size_t mirror = std::min(i, t - 1 - i);
        x(i, c) = std::sin(static_cast<double>(mirror + 1) * 0.7 + static_cast<double>(c));
      }
    const Mat y = bimamba(x, p);
    const double diff = max_abs_diff(y, flip_time(y));
    check("bimamba time-reversal symmetry on palindromes", diff < 1e-10,
          "max diff " + fmt(diff));
  }
  {  // attention pool: constant frames and convex hull
    Mat x(5, 3);
    for (std::size_t t = 0; t < 5; ++t)
      for (std::size_t c = 0; c < 3; ++c) x(t, c) = 0.3 * static_cast<double>(c) - 0.1;
    const Vec q = random_vec(3, rng);
    const Mat wk = random_mat(3, 3, rng);
    const Vec pooled = attention_pool(x, q, wk);
    bool pass = true;
    for (std::size_t c = 0; c < 3; ++c) pass = pass && std::fabs(pooled[c] - x(0, c)) < 1e-12;
    for (int trial = 0; trial < 30; ++trial) {
      const Mat xr = random_mat(6, 4, rng);
      const Vec pr = attention_pool(xr, random_vec(4, rng), random_mat(4, 4, rng));
      for (std::size_t c = 0; c < 4; ++c) {
        double lo = xr(0, c), hi = xr(0, c);
        for (std::size_t t = 1; t < 6; ++t) {
          lo = std::min(lo, xr(t, c));
          hi = std::max(hi, xr(t, c));
        }
        pass = pass && pr[c] >= lo - 1e-12 && pr[c] <= hi + 1e-12;
      }
    }
    check("attention pool convex hull", pass);
  }
  {  // downsample with uniform weights averages pairs
    Mat x(4, 2);
    for (std::size_t t = 0; t < 4; ++t)
      for (std::size_t c = 0; c < 2; ++c) x(t, c) = static_cast<double>(t * 2 + c);
    const Mat y = downsample_softmax(x, {0.0, 0.0}, 2);
    bool pass = y.rows == 2;
    pass = pass && std::fabs(y(0, 0) - 1.0) < 1e-12 && std::fabs(y(1, 0) - 5.0) < 1e-12;
    check("downsample uniform-softmax averaging", pass);
  }
  {  // focal loss reductions
    bool clipped = false;
    bool pass = focal_loss({0.0, 1.0}, 1, 0.25, 3.0) == 0.0;
    pass = pass && std::fabs(focal_loss({0.5, 0.5}, 1, 1.0, 0.0) - std::log(2.0)) < 1e-12;
    const double expected = 0.25 * std::pow(0.1, 3.0) * (-std::log(0.9));
    pass = pass && std::fabs(focal_loss({0.1, 0.9}, 1, 0.25, 3.0) - expected) < 1e-15;
    focal_loss({1.0, 0.0}, 1, 0.5, 2.0, &clipped);
    pass = pass && clipped;
    double prev = focal_loss({0.0, 0.05}, 1, 0.5, 2.0);
    for (double p = 0.1; p < 1.0; p += 0.05) {
      const double cur = focal_loss({0.0, p}, 1, 0.5, 2.0);
      pass = pass && cur < prev && cur >= 0.0;
      prev = cur;
    }
    check("focal loss reductions and monotonicity", pass);
  }
  {  // zipformer block identity when every bypass coefficient clamps to 0
    const Mat x = random_mat(4, 8, rng);
    ZipformerBlockParams p = random_block(8, 16, rng);
    p.bypass_attn.assign(8, 0.0);
    p.bypass_conv.assign(8, 0.0);
    p.bypass_ffn.assign(8, 0.0);
    const double diff = max_abs_diff(zipformer_block(x, p), x);
    check("zipformer block identity at zero bypass", diff < 1e-12, "max diff " + fmt(diff));
  }
  {  // zipformer shape contract and finiteness sweep
    bool pass = true;
    for (auto [t, d] : {std::pair<std::size_t, std::size_t>{4, 8}, {16, 32}}) {
      const Mat x = random_mat(t, d, rng);
      const Mat y = zipformer_block(x, random_block(d, 2 * d, rng));
      pass = pass && y.rows == t && y.cols == d;
    }
    for (int trial = 0; trial < 1000 && pass; ++trial) {
      const std::size_t t = 2 + rng.below(6), d = 4 + 2 * rng.below(5);
      const Mat x = random_mat(t, d, rng, 3.0);
      const Mat y = zipformer_block(x, random_block(d, d, rng));
      for (double v : y.data) pass = pass && std::isfinite(v);
    }
    check("zipformer shape and finiteness sweep", pass);
  }
  {  // hybrid stack with zero-weight mamba equals a pure retention stack
    const std::size_t d = 8;
    const Mat x = random_mat(6, d, rng);
    HybridStackParams p;
    p.n_layers = 4;
    p.retention = random_msr(d, 2, rng);
    p.mamba.forward = random_ssm(6, 2, rng);
    p.mamba.backward = random_ssm(6, 2, rng);
    p.mamba.alpha_fwd = p.mamba.alpha_bwd = 0.0;
    Mat pure = x;
    for (int layer = 0; layer < 4; layer += 2) {
      Mat r = msr(pure, p.retention);
      for (std::size_t i = 0; i < pure.data.size(); ++i) pure.data[i] += r.data[i];
    }
    const double diff = max_abs_diff(hybrid_stack(x, p), pure);
    check("hybrid stack reduces to retention at zero mamba weight", diff < 1e-12,
          "max diff " + fmt(diff));
  }
  return results;
}

}  // namespace searchlab
