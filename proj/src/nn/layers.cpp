#include "leafscope/nn/layers.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace leafscope::nn {

namespace {

using MatrixRM =
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<MatrixRM>;
using MapCM = Eigen::Map<const MatrixRM>;

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

// col is (n*oh*ow) x (kh*kw*ic), entry = x(n, oy*s - pt + ky, ox*s - pl + kx, ic).
void im2col(const Tensor& x, int kh, int kw, int stride, int pt, int pl, int oh,
            int ow, std::vector<Scalar>& col) {
  const std::size_t cols = static_cast<std::size_t>(kh) * kw * x.c;
  col.assign(static_cast<std::size_t>(x.n) * oh * ow * cols, Scalar(0));
  std::size_t r = 0;
  for (int in = 0; in < x.n; ++in) {
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox, ++r) {
        Scalar* dst = col.data() + r * cols;
        for (int ky = 0; ky < kh; ++ky) {
          const int iy = oy * stride - pt + ky;
          if (iy < 0 || iy >= x.h) {
            dst += kw * x.c;
            continue;
          }
          for (int kx = 0; kx < kw; ++kx, dst += x.c) {
            const int ix = ox * stride - pl + kx;
            if (ix < 0 || ix >= x.w) continue;
            const Scalar* src = x.data.data() +
                                ((static_cast<std::size_t>(in) * x.h + iy) * x.w + ix) * x.c;
            std::copy(src, src + x.c, dst);
          }
        }
      }
    }
  }
}

// Scatter-add of the col-shaped gradient back onto the input.
void col2im(const std::vector<Scalar>& col, int kh, int kw, int stride, int pt,
            int pl, int oh, int ow, Tensor& dx) {
  const std::size_t cols = static_cast<std::size_t>(kh) * kw * dx.c;
  std::size_t r = 0;
  for (int in = 0; in < dx.n; ++in) {
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox, ++r) {
        const Scalar* src = col.data() + r * cols;
        for (int ky = 0; ky < kh; ++ky) {
          const int iy = oy * stride - pt + ky;
          if (iy < 0 || iy >= dx.h) {
            src += kw * dx.c;
            continue;
          }
          for (int kx = 0; kx < kw; ++kx, src += dx.c) {
            const int ix = ox * stride - pl + kx;
            if (ix < 0 || ix >= dx.w) continue;
            Scalar* dst = dx.data.data() +
                          ((static_cast<std::size_t>(in) * dx.h + iy) * dx.w + ix) * dx.c;
            for (int ic = 0; ic < dx.c; ++ic) dst[ic] += src[ic];
          }
        }
      }
    }
  }
}

}  // namespace

void conv_out_dim(int in, int k, int stride, Padding padding, int* out, int* pad_lo) {
  if (padding == Padding::Valid) {
    require(in >= k, "conv: input smaller than kernel under valid padding");
    *out = (in - k) / stride + 1;
    *pad_lo = 0;
  } else {
    *out = (in + stride - 1) / stride;
    const int total = std::max((*out - 1) * stride + k - in, 0);
    *pad_lo = total / 2;  // extra padding goes to the high side
  }
}

// ---- InputLayer -------------------------------------------------------------

Tensor InputLayer::forward(const std::vector<const Tensor*>&, bool, bool) {
  throw std::logic_error("input layer is fed by the graph, not forwarded");
}

std::vector<Tensor> InputLayer::backward(const std::vector<const Tensor*>&,
                                         const Tensor&, const Tensor&) {
  return {};
}

// ---- Conv2D -----------------------------------------------------------------

Conv2D::Conv2D(std::string name, int in_c, int out_c, int kh, int kw, int stride,
               Padding padding, bool use_bias)
    : Layer(std::move(name)), in_c_(in_c), out_c_(out_c), kh_(kh), kw_(kw),
      stride_(stride), padding_(padding), use_bias_(use_bias) {
  weight_ = {"weight", Tensor(kh, kw, in_c, out_c), Tensor(kh, kw, in_c, out_c)};
  if (use_bias_) bias_ = {"bias", Tensor(1, 1, 1, out_c), Tensor(1, 1, 1, out_c)};
}

std::vector<Param*> Conv2D::params() {
  std::vector<Param*> ps = {&weight_};
  if (use_bias_) ps.push_back(&bias_);
  return ps;
}

void Conv2D::init_params(Rng& rng) {
  const double fan_in = static_cast<double>(kh_) * kw_ * in_c_;
  const double stddev = std::sqrt(2.0 / fan_in);
  for (auto& v : weight_.value.data) v = stddev * rng.next_normal();
  if (use_bias_) bias_.value.zero();
}

Tensor Conv2D::forward(const std::vector<const Tensor*>& inputs, bool, bool keep_cache) {
  const Tensor& x = *inputs[0];
  require(x.c == in_c_, name() + ": expected " + std::to_string(in_c_) +
                            " input channels, got " + std::to_string(x.c));
  int oh, ow, pt, pl;
  conv_out_dim(x.h, kh_, stride_, padding_, &oh, &pt);
  conv_out_dim(x.w, kw_, stride_, padding_, &ow, &pl);
  cached_oh_ = oh;
  cached_ow_ = ow;
  cached_pt_ = pt;
  cached_pl_ = pl;

  Tensor out(x.n, oh, ow, out_c_);
  const std::size_t rows = static_cast<std::size_t>(x.n) * oh * ow;
  MapCM wmat(weight_.value.data.data(), static_cast<std::size_t>(kh_) * kw_ * in_c_,
             out_c_);
  MapM omat(out.data.data(), rows, out_c_);

  if (is_pointwise()) {
    // 1x1 stride-1: the input already is the im2col matrix.
    MapCM xmat(x.data.data(), rows, in_c_);
    omat.noalias() = xmat * wmat;
    col_cache_.clear();
  } else {
    im2col(x, kh_, kw_, stride_, pt, pl, oh, ow, col_cache_);
    MapCM cmat(col_cache_.data(), rows, static_cast<std::size_t>(kh_) * kw_ * in_c_);
    omat.noalias() = cmat * wmat;
    if (!keep_cache) col_cache_.clear();
  }
  if (use_bias_) {
    for (std::size_t r = 0; r < rows; ++r) {
      Scalar* row = out.data.data() + r * out_c_;
      for (int oc = 0; oc < out_c_; ++oc) row[oc] += bias_.value.data[oc];
    }
  }
  return out;
}

std::vector<Tensor> Conv2D::backward(const std::vector<const Tensor*>& inputs,
                                     const Tensor& output, const Tensor& grad_out) {
  const Tensor& x = *inputs[0];
  const int oh = cached_oh_, ow = cached_ow_, pt = cached_pt_, pl = cached_pl_;
  require(grad_out.same_shape(output), name() + ": gradient shape mismatch");
  const std::size_t rows = static_cast<std::size_t>(x.n) * oh * ow;
  const std::size_t wcols = static_cast<std::size_t>(kh_) * kw_ * in_c_;

  MapCM gmat(grad_out.data.data(), rows, out_c_);
  MapCM wmat(weight_.value.data.data(), wcols, out_c_);
  MapM dwmat(weight_.grad.data.data(), wcols, out_c_);

  Tensor dx(x.n, x.h, x.w, x.c);

  if (is_pointwise()) {
    MapCM xmat(x.data.data(), rows, in_c_);
    dwmat.noalias() += xmat.transpose() * gmat;
    MapM dxmat(dx.data.data(), rows, in_c_);
    dxmat.noalias() = gmat * wmat.transpose();
  } else {
    if (col_cache_.empty()) {
      im2col(x, kh_, kw_, stride_, pt, pl, oh, ow, col_cache_);
    }
    MapCM cmat(col_cache_.data(), rows, wcols);
    dwmat.noalias() += cmat.transpose() * gmat;
    std::vector<Scalar> dcol(rows * wcols);
    MapM dcmat(dcol.data(), rows, wcols);
    dcmat.noalias() = gmat * wmat.transpose();
    col2im(dcol, kh_, kw_, stride_, pt, pl, oh, ow, dx);
    col_cache_.clear();
  }
  if (use_bias_) {
    for (std::size_t r = 0; r < rows; ++r) {
      const Scalar* row = grad_out.data.data() + r * out_c_;
      for (int oc = 0; oc < out_c_; ++oc) bias_.grad.data[oc] += row[oc];
    }
  }
  return {std::move(dx)};
}

// ---- DepthwiseConv2D ----------------------------------------------------------

DepthwiseConv2D::DepthwiseConv2D(std::string name, int channels, int kh, int kw,
                                 int stride, Padding padding, bool use_bias)
    : Layer(std::move(name)), channels_(channels), kh_(kh), kw_(kw), stride_(stride),
      padding_(padding), use_bias_(use_bias) {
  weight_ = {"weight", Tensor(kh, kw, channels, 1), Tensor(kh, kw, channels, 1)};
  if (use_bias_) bias_ = {"bias", Tensor(1, 1, 1, channels), Tensor(1, 1, 1, channels)};
}

std::vector<Param*> DepthwiseConv2D::params() {
  std::vector<Param*> ps = {&weight_};
  if (use_bias_) ps.push_back(&bias_);
  return ps;
}

void DepthwiseConv2D::init_params(Rng& rng) {
  const double stddev = std::sqrt(2.0 / (static_cast<double>(kh_) * kw_));
  for (auto& v : weight_.value.data) v = stddev * rng.next_normal();
  if (use_bias_) bias_.value.zero();
}

Tensor DepthwiseConv2D::forward(const std::vector<const Tensor*>& inputs, bool,
                                bool) {
  const Tensor& x = *inputs[0];
  require(x.c == channels_, name() + ": channel mismatch");
  int oh, ow, pt, pl;
  conv_out_dim(x.h, kh_, stride_, padding_, &oh, &pt);
  conv_out_dim(x.w, kw_, stride_, padding_, &ow, &pl);
  cached_pt_ = pt;
  cached_pl_ = pl;

  Tensor out(x.n, oh, ow, channels_);
  for (int in = 0; in < x.n; ++in) {
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        Scalar* dst = &out.at(in, oy, ox, 0);
        for (int ky = 0; ky < kh_; ++ky) {
          const int iy = oy * stride_ - pt + ky;
          if (iy < 0 || iy >= x.h) continue;
          for (int kx = 0; kx < kw_; ++kx) {
            const int ix = ox * stride_ - pl + kx;
            if (ix < 0 || ix >= x.w) continue;
            const Scalar* src = &x.at(in, iy, ix, 0);
            const Scalar* wrow = &weight_.value.at(ky, kx, 0, 0);
            for (int ic = 0; ic < channels_; ++ic) dst[ic] += src[ic] * wrow[ic];
          }
        }
        if (use_bias_) {
          for (int ic = 0; ic < channels_; ++ic) dst[ic] += bias_.value.data[ic];
        }
      }
    }
  }
  return out;
}

std::vector<Tensor> DepthwiseConv2D::backward(const std::vector<const Tensor*>& inputs,
                                              const Tensor& output,
                                              const Tensor& grad_out) {
  const Tensor& x = *inputs[0];
  const int oh = output.h, ow = output.w;
  Tensor dx(x.n, x.h, x.w, x.c);
  for (int in = 0; in < x.n; ++in) {
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        const Scalar* g = &grad_out.at(in, oy, ox, 0);
        for (int ky = 0; ky < kh_; ++ky) {
          const int iy = oy * stride_ - cached_pt_ + ky;
          if (iy < 0 || iy >= x.h) continue;
          for (int kx = 0; kx < kw_; ++kx) {
            const int ix = ox * stride_ - cached_pl_ + kx;
            if (ix < 0 || ix >= x.w) continue;
            const Scalar* src = &x.at(in, iy, ix, 0);
            const Scalar* wrow = &weight_.value.at(ky, kx, 0, 0);
            Scalar* dsrc = &dx.at(in, iy, ix, 0);
            Scalar* dwrow = &weight_.grad.at(ky, kx, 0, 0);
            for (int ic = 0; ic < channels_; ++ic) {
              dsrc[ic] += g[ic] * wrow[ic];
              dwrow[ic] += g[ic] * src[ic];
            }
          }
        }
        if (use_bias_) {
          for (int ic = 0; ic < channels_; ++ic) bias_.grad.data[ic] += g[ic];
        }
      }
    }
  }
  return {std::move(dx)};
}

// ---- BatchNorm ----------------------------------------------------------------

BatchNorm::BatchNorm(std::string name, int channels, Scalar momentum, Scalar epsilon)
    : Layer(std::move(name)), channels_(channels), momentum_(momentum),
      epsilon_(epsilon) {
  gamma_ = {"gamma", Tensor(1, 1, 1, channels), Tensor(1, 1, 1, channels)};
  beta_ = {"beta", Tensor(1, 1, 1, channels), Tensor(1, 1, 1, channels)};
  running_mean_ = {"running_mean", Tensor(1, 1, 1, channels), Tensor(), false};
  running_var_ = {"running_var", Tensor(1, 1, 1, channels), Tensor(), false};
  std::fill(gamma_.value.data.begin(), gamma_.value.data.end(), Scalar(1));
  std::fill(running_var_.value.data.begin(), running_var_.value.data.end(), Scalar(1));
}

std::vector<Param*> BatchNorm::params() {
  return {&gamma_, &beta_, &running_mean_, &running_var_};
}

void BatchNorm::init_params(Rng&) {
  std::fill(gamma_.value.data.begin(), gamma_.value.data.end(), Scalar(1));
  beta_.value.zero();
  running_mean_.value.zero();
  std::fill(running_var_.value.data.begin(), running_var_.value.data.end(), Scalar(1));
}

Tensor BatchNorm::forward(const std::vector<const Tensor*>& inputs, bool training,
                          bool) {
  const Tensor& x = *inputs[0];
  require(x.c == channels_, name() + ": channel mismatch");
  Tensor out(x.n, x.h, x.w, x.c);
  const std::size_t m = static_cast<std::size_t>(x.n) * x.h * x.w;
  last_forward_training_ = training;

  if (training) {
    batch_mean_.assign(channels_, 0);
    std::vector<Scalar> var(channels_, 0);
    for (std::size_t r = 0; r < m; ++r) {
      const Scalar* row = x.data.data() + r * channels_;
      for (int ic = 0; ic < channels_; ++ic) batch_mean_[ic] += row[ic];
    }
    for (int ic = 0; ic < channels_; ++ic) batch_mean_[ic] /= static_cast<Scalar>(m);
    for (std::size_t r = 0; r < m; ++r) {
      const Scalar* row = x.data.data() + r * channels_;
      for (int ic = 0; ic < channels_; ++ic) {
        const Scalar d = row[ic] - batch_mean_[ic];
        var[ic] += d * d;
      }
    }
    batch_inv_std_.assign(channels_, 0);
    for (int ic = 0; ic < channels_; ++ic) {
      var[ic] /= static_cast<Scalar>(m);
      batch_inv_std_[ic] = Scalar(1) / std::sqrt(var[ic] + epsilon_);
      running_mean_.value.data[ic] =
          momentum_ * running_mean_.value.data[ic] + (1 - momentum_) * batch_mean_[ic];
      running_var_.value.data[ic] =
          momentum_ * running_var_.value.data[ic] + (1 - momentum_) * var[ic];
    }
    for (std::size_t r = 0; r < m; ++r) {
      const Scalar* row = x.data.data() + r * channels_;
      Scalar* orow = out.data.data() + r * channels_;
      for (int ic = 0; ic < channels_; ++ic) {
        orow[ic] = gamma_.value.data[ic] * (row[ic] - batch_mean_[ic]) *
                       batch_inv_std_[ic] +
                   beta_.value.data[ic];
      }
    }
  } else {
    std::vector<Scalar> scale(channels_), shift(channels_);
    for (int ic = 0; ic < channels_; ++ic) {
      const Scalar inv = Scalar(1) / std::sqrt(running_var_.value.data[ic] + epsilon_);
      scale[ic] = gamma_.value.data[ic] * inv;
      shift[ic] = beta_.value.data[ic] - scale[ic] * running_mean_.value.data[ic];
    }
    for (std::size_t r = 0; r < m; ++r) {
      const Scalar* row = x.data.data() + r * channels_;
      Scalar* orow = out.data.data() + r * channels_;
      for (int ic = 0; ic < channels_; ++ic) orow[ic] = scale[ic] * row[ic] + shift[ic];
    }
  }
  return out;
}

std::vector<Tensor> BatchNorm::backward(const std::vector<const Tensor*>& inputs,
                                        const Tensor&, const Tensor& grad_out) {
  const Tensor& x = *inputs[0];
  const std::size_t m = static_cast<std::size_t>(x.n) * x.h * x.w;
  Tensor dx(x.n, x.h, x.w, x.c);

  if (!last_forward_training_) {
    // Eval-mode backward: pure affine in x.
    for (int ic = 0; ic < channels_; ++ic) {
      const Scalar inv = Scalar(1) / std::sqrt(running_var_.value.data[ic] + epsilon_);
      const Scalar scale = gamma_.value.data[ic] * inv;
      for (std::size_t r = 0; r < m; ++r) {
        const std::size_t i = r * channels_ + ic;
        dx.data[i] = grad_out.data[i] * scale;
        gamma_.grad.data[ic] +=
            grad_out.data[i] * (x.data[i] - running_mean_.value.data[ic]) * inv;
        beta_.grad.data[ic] += grad_out.data[i];
      }
    }
    return {std::move(dx)};
  }

  // Training-mode backward with batch statistics.
  std::vector<Scalar> sum_dy(channels_, 0), sum_dy_xhat(channels_, 0);
  for (std::size_t r = 0; r < m; ++r) {
    const std::size_t base = r * channels_;
    for (int ic = 0; ic < channels_; ++ic) {
      const Scalar xhat = (x.data[base + ic] - batch_mean_[ic]) * batch_inv_std_[ic];
      sum_dy[ic] += grad_out.data[base + ic];
      sum_dy_xhat[ic] += grad_out.data[base + ic] * xhat;
    }
  }
  for (int ic = 0; ic < channels_; ++ic) {
    gamma_.grad.data[ic] += sum_dy_xhat[ic];
    beta_.grad.data[ic] += sum_dy[ic];
  }
  const Scalar inv_m = Scalar(1) / static_cast<Scalar>(m);
  for (std::size_t r = 0; r < m; ++r) {
    const std::size_t base = r * channels_;
    for (int ic = 0; ic < channels_; ++ic) {
      const Scalar xhat = (x.data[base + ic] - batch_mean_[ic]) * batch_inv_std_[ic];
      dx.data[base + ic] = gamma_.value.data[ic] * batch_inv_std_[ic] *
                           (grad_out.data[base + ic] - sum_dy[ic] * inv_m -
                            xhat * sum_dy_xhat[ic] * inv_m);
    }
  }
  return {std::move(dx)};
}

// ---- ReLU ---------------------------------------------------------------------

Tensor ReLU::forward(const std::vector<const Tensor*>& inputs, bool, bool) {
  Tensor out = *inputs[0];
  for (auto& v : out.data) v = v > 0 ? v : Scalar(0);
  return out;
}

std::vector<Tensor> ReLU::backward(const std::vector<const Tensor*>&,
                                   const Tensor& output, const Tensor& grad_out) {
  Tensor dx(output.n, output.h, output.w, output.c);
  for (std::size_t i = 0; i < dx.size(); ++i) {
    dx.data[i] = output.data[i] > 0 ? grad_out.data[i] : Scalar(0);
  }
  return {std::move(dx)};
}

// ---- MaxPool --------------------------------------------------------------------

MaxPool::MaxPool(std::string name, int kh, int kw, int stride, Padding padding)
    : Layer(std::move(name)), kh_(kh), kw_(kw), stride_(stride), padding_(padding) {}

Tensor MaxPool::forward(const std::vector<const Tensor*>& inputs, bool, bool) {
  const Tensor& x = *inputs[0];
  int oh, ow, pt, pl;
  conv_out_dim(x.h, kh_, stride_, padding_, &oh, &pt);
  conv_out_dim(x.w, kw_, stride_, padding_, &ow, &pl);
  Tensor out(x.n, oh, ow, x.c);
  argmax_.assign(out.size(), 0);
  std::size_t o = 0;
  for (int in = 0; in < x.n; ++in) {
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        for (int ic = 0; ic < x.c; ++ic, ++o) {
          Scalar best = -std::numeric_limits<Scalar>::infinity();
          std::size_t best_idx = 0;
          for (int ky = 0; ky < kh_; ++ky) {
            const int iy = oy * stride_ - pt + ky;
            if (iy < 0 || iy >= x.h) continue;
            for (int kx = 0; kx < kw_; ++kx) {
              const int ix = ox * stride_ - pl + kx;
              if (ix < 0 || ix >= x.w) continue;
              const std::size_t idx =
                  ((static_cast<std::size_t>(in) * x.h + iy) * x.w + ix) * x.c + ic;
              if (x.data[idx] > best) {
                best = x.data[idx];
                best_idx = idx;
              }
            }
          }
          out.data[o] = best;
          argmax_[o] = best_idx;
        }
      }
    }
  }
  return out;
}

std::vector<Tensor> MaxPool::backward(const std::vector<const Tensor*>& inputs,
                                      const Tensor& output, const Tensor& grad_out) {
  const Tensor& x = *inputs[0];
  Tensor dx(x.n, x.h, x.w, x.c);
  if (argmax_.size() != output.size()) {
    forward({&x}, false, true);  // rebuild argmax
  }
  for (std::size_t o = 0; o < output.size(); ++o) dx.data[argmax_[o]] += grad_out.data[o];
  return {std::move(dx)};
}

// ---- AvgPool --------------------------------------------------------------------

AvgPool::AvgPool(std::string name, int kh, int kw, int stride, Padding padding)
    : Layer(std::move(name)), kh_(kh), kw_(kw), stride_(stride), padding_(padding) {}

Tensor AvgPool::forward(const std::vector<const Tensor*>& inputs, bool, bool) {
  const Tensor& x = *inputs[0];
  int oh, ow, pt, pl;
  conv_out_dim(x.h, kh_, stride_, padding_, &oh, &pt);
  conv_out_dim(x.w, kw_, stride_, padding_, &ow, &pl);
  Tensor out(x.n, oh, ow, x.c);
  for (int in = 0; in < x.n; ++in) {
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        int count = 0;
        Scalar* dst = &out.at(in, oy, ox, 0);
        for (int ky = 0; ky < kh_; ++ky) {
          const int iy = oy * stride_ - pt + ky;
          if (iy < 0 || iy >= x.h) continue;
          for (int kx = 0; kx < kw_; ++kx) {
            const int ix = ox * stride_ - pl + kx;
            if (ix < 0 || ix >= x.w) continue;
            ++count;
            const Scalar* src = &x.at(in, iy, ix, 0);
            for (int ic = 0; ic < x.c; ++ic) dst[ic] += src[ic];
          }
        }
        if (count > 0) {
          for (int ic = 0; ic < x.c; ++ic) dst[ic] /= static_cast<Scalar>(count);
        }
      }
    }
  }
  return out;
}

std::vector<Tensor> AvgPool::backward(const std::vector<const Tensor*>& inputs,
                                      const Tensor&, const Tensor& grad_out) {
  const Tensor& x = *inputs[0];
  int oh, ow, pt, pl;
  conv_out_dim(x.h, kh_, stride_, padding_, &oh, &pt);
  conv_out_dim(x.w, kw_, stride_, padding_, &ow, &pl);
  Tensor dx(x.n, x.h, x.w, x.c);
  for (int in = 0; in < x.n; ++in) {
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        int count = 0;
        for (int ky = 0; ky < kh_; ++ky) {
          const int iy = oy * stride_ - pt + ky;
          if (iy < 0 || iy >= x.h) continue;
          for (int kx = 0; kx < kw_; ++kx) {
            const int ix = ox * stride_ - pl + kx;
            if (ix >= 0 && ix < x.w) ++count;
          }
        }
        if (count == 0) continue;
        const Scalar* g = &grad_out.at(in, oy, ox, 0);
        for (int ky = 0; ky < kh_; ++ky) {
          const int iy = oy * stride_ - pt + ky;
          if (iy < 0 || iy >= x.h) continue;
          for (int kx = 0; kx < kw_; ++kx) {
            const int ix = ox * stride_ - pl + kx;
            if (ix < 0 || ix >= x.w) continue;
            Scalar* dst = &dx.at(in, iy, ix, 0);
            for (int ic = 0; ic < x.c; ++ic) dst[ic] += g[ic] / static_cast<Scalar>(count);
          }
        }
      }
    }
  }
  return {std::move(dx)};
}

// ---- GlobalAvgPool ---------------------------------------------------------------

Tensor GlobalAvgPool::forward(const std::vector<const Tensor*>& inputs, bool, bool) {
  const Tensor& x = *inputs[0];
  Tensor out(x.n, 1, 1, x.c);
  const Scalar inv = Scalar(1) / (static_cast<Scalar>(x.h) * x.w);
  for (int in = 0; in < x.n; ++in) {
    for (int iy = 0; iy < x.h; ++iy) {
      for (int ix = 0; ix < x.w; ++ix) {
        const Scalar* src = &x.at(in, iy, ix, 0);
        Scalar* dst = &out.at(in, 0, 0, 0);
        for (int ic = 0; ic < x.c; ++ic) dst[ic] += src[ic] * inv;
      }
    }
  }
  return out;
}

std::vector<Tensor> GlobalAvgPool::backward(const std::vector<const Tensor*>& inputs,
                                            const Tensor&, const Tensor& grad_out) {
  const Tensor& x = *inputs[0];
  Tensor dx(x.n, x.h, x.w, x.c);
  const Scalar inv = Scalar(1) / (static_cast<Scalar>(x.h) * x.w);
  for (int in = 0; in < x.n; ++in) {
    for (int iy = 0; iy < x.h; ++iy) {
      for (int ix = 0; ix < x.w; ++ix) {
        Scalar* dst = &dx.at(in, iy, ix, 0);
        const Scalar* g = &grad_out.at(in, 0, 0, 0);
        for (int ic = 0; ic < x.c; ++ic) dst[ic] = g[ic] * inv;
      }
    }
  }
  return {std::move(dx)};
}

// ---- Dense -----------------------------------------------------------------------

Dense::Dense(std::string name, int in_dim, int out_dim, bool use_bias)
    : Layer(std::move(name)), in_dim_(in_dim), out_dim_(out_dim), use_bias_(use_bias) {
  weight_ = {"weight", Tensor(1, 1, in_dim, out_dim), Tensor(1, 1, in_dim, out_dim)};
  if (use_bias_) bias_ = {"bias", Tensor(1, 1, 1, out_dim), Tensor(1, 1, 1, out_dim)};
}

std::vector<Param*> Dense::params() {
  std::vector<Param*> ps = {&weight_};
  if (use_bias_) ps.push_back(&bias_);
  return ps;
}

void Dense::init_params(Rng& rng) {
  const double limit = std::sqrt(6.0 / (in_dim_ + out_dim_));
  for (auto& v : weight_.value.data) v = rng.next_range(-limit, limit);
  if (use_bias_) bias_.value.zero();
}

Tensor Dense::forward(const std::vector<const Tensor*>& inputs, bool, bool) {
  const Tensor& x = *inputs[0];
  require(x.h == 1 && x.w == 1 && x.c == in_dim_,
          name() + ": expected flattened input of width " + std::to_string(in_dim_) +
              ", got " + x.shape_str());
  Tensor out(x.n, 1, 1, out_dim_);
  MapCM xmat(x.data.data(), x.n, in_dim_);
  MapCM wmat(weight_.value.data.data(), in_dim_, out_dim_);
  MapM omat(out.data.data(), x.n, out_dim_);
  omat.noalias() = xmat * wmat;
  if (use_bias_) {
    for (int in = 0; in < x.n; ++in) {
      Scalar* row = out.data.data() + static_cast<std::size_t>(in) * out_dim_;
      for (int oc = 0; oc < out_dim_; ++oc) row[oc] += bias_.value.data[oc];
    }
  }
  return out;
}

std::vector<Tensor> Dense::backward(const std::vector<const Tensor*>& inputs,
                                    const Tensor&, const Tensor& grad_out) {
  const Tensor& x = *inputs[0];
  Tensor dx(x.n, 1, 1, in_dim_);
  MapCM xmat(x.data.data(), x.n, in_dim_);
  MapCM gmat(grad_out.data.data(), x.n, out_dim_);
  MapCM wmat(weight_.value.data.data(), in_dim_, out_dim_);
  MapM dwmat(weight_.grad.data.data(), in_dim_, out_dim_);
  MapM dxmat(dx.data.data(), x.n, in_dim_);
  dwmat.noalias() += xmat.transpose() * gmat;
  dxmat.noalias() = gmat * wmat.transpose();
  if (use_bias_) {
    for (int in = 0; in < x.n; ++in) {
      const Scalar* row = grad_out.data.data() + static_cast<std::size_t>(in) * out_dim_;
      for (int oc = 0; oc < out_dim_; ++oc) bias_.grad.data[oc] += row[oc];
    }
  }
  return {std::move(dx)};
}

// ---- Add / Concat ------------------------------------------------------------------

Add::Add(std::string name, std::vector<Scalar> coeffs)
    : Layer(std::move(name)), coeffs_(std::move(coeffs)) {}

Tensor Add::forward(const std::vector<const Tensor*>& inputs, bool, bool) {
  require(inputs.size() == coeffs_.size(), name() + ": arity mismatch");
  Tensor out(inputs[0]->n, inputs[0]->h, inputs[0]->w, inputs[0]->c);
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    require(inputs[k]->same_shape(out), name() + ": shape mismatch across inputs");
    out.add_scaled(*inputs[k], coeffs_[k]);
  }
  return out;
}

std::vector<Tensor> Add::backward(const std::vector<const Tensor*>& inputs,
                                  const Tensor&, const Tensor& grad_out) {
  std::vector<Tensor> grads;
  grads.reserve(inputs.size());
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    Tensor g(grad_out.n, grad_out.h, grad_out.w, grad_out.c);
    g.add_scaled(grad_out, coeffs_[k]);
    grads.push_back(std::move(g));
  }
  return grads;
}

Concat::Concat(std::string name, std::size_t arity)
    : Layer(std::move(name)), arity_(arity) {}

Tensor Concat::forward(const std::vector<const Tensor*>& inputs, bool, bool) {
  require(inputs.size() == arity_, name() + ": arity mismatch");
  int total_c = 0;
  for (const auto* t : inputs) {
    require(t->n == inputs[0]->n && t->h == inputs[0]->h && t->w == inputs[0]->w,
            name() + ": spatial shape mismatch across inputs");
    total_c += t->c;
  }
  Tensor out(inputs[0]->n, inputs[0]->h, inputs[0]->w, total_c);
  const std::size_t pixels =
      static_cast<std::size_t>(out.n) * out.h * out.w;
  for (std::size_t p = 0; p < pixels; ++p) {
    Scalar* dst = out.data.data() + p * total_c;
    for (const auto* t : inputs) {
      const Scalar* src = t->data.data() + p * t->c;
      std::copy(src, src + t->c, dst);
      dst += t->c;
    }
  }
  return out;
}

std::vector<Tensor> Concat::backward(const std::vector<const Tensor*>& inputs,
                                     const Tensor& output, const Tensor& grad_out) {
  std::vector<Tensor> grads;
  grads.reserve(inputs.size());
  for (const auto* t : inputs) grads.emplace_back(t->n, t->h, t->w, t->c);
  const std::size_t pixels =
      static_cast<std::size_t>(output.n) * output.h * output.w;
  for (std::size_t p = 0; p < pixels; ++p) {
    const Scalar* src = grad_out.data.data() + p * output.c;
    for (std::size_t k = 0; k < inputs.size(); ++k) {
      Scalar* dst = grads[k].data.data() + p * inputs[k]->c;
      std::copy(src, src + inputs[k]->c, dst);
      src += inputs[k]->c;
    }
  }
  return grads;
}

}  // namespace leafscope::nn
