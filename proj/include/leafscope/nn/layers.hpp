#pragma once

#include <memory>
#include <string>
#include <vector>

#include "leafscope/nn/tensor.hpp"
#include "leafscope/rng.hpp"

namespace leafscope::nn {

struct Param {
  std::string name;
  Tensor value;
  Tensor grad;
  bool trainable = true;  // running BN statistics are state, not weights
};

enum class Padding { Valid, Same };  // Same = TF convention, extra on bottom/right

// One graph node op. Layers cache what their backward pass needs during
// forward (im2col buffers, pool argmax, BN batch stats); a model is therefore
// exclusive to one caller during a forward/backward pair.
class Layer {
 public:
  explicit Layer(std::string name) : name_(std::move(name)) {}
  virtual ~Layer() = default;

  const std::string& name() const { return name_; }
  virtual std::size_t num_inputs() const { return 1; }

  // keep_cache=false skips backward caches (inference-only forward).
  virtual Tensor forward(const std::vector<const Tensor*>& inputs, bool training,
                         bool keep_cache) = 0;

  // dL/d(output) -> dL/d(each input); accumulates into param grads.
  virtual std::vector<Tensor> backward(const std::vector<const Tensor*>& inputs,
                                       const Tensor& output,
                                       const Tensor& grad_out) = 0;

  virtual std::vector<Param*> params() { return {}; }
  virtual void init_params(Rng&) {}

 private:
  std::string name_;
};

class InputLayer : public Layer {
 public:
  using Layer::Layer;
  std::size_t num_inputs() const override { return 0; }
  Tensor forward(const std::vector<const Tensor*>&, bool, bool) override;
  std::vector<Tensor> backward(const std::vector<const Tensor*>&, const Tensor&,
                               const Tensor&) override;
};

class Conv2D : public Layer {
 public:
  Conv2D(std::string name, int in_c, int out_c, int kh, int kw, int stride,
         Padding padding, bool use_bias = true);

  Tensor forward(const std::vector<const Tensor*>& inputs, bool training,
                 bool keep_cache) override;
  std::vector<Tensor> backward(const std::vector<const Tensor*>& inputs,
                               const Tensor& output, const Tensor& grad_out) override;
  std::vector<Param*> params() override;
  void init_params(Rng& rng) override;  // He-normal weights, zero bias

  int in_channels() const { return in_c_; }
  int out_channels() const { return out_c_; }

 private:
  int in_c_, out_c_, kh_, kw_, stride_;
  Padding padding_;
  bool use_bias_;
  Param weight_;  // (kh, kw, in_c, out_c)
  Param bias_;    // (1,1,1,out_c)
  std::vector<Scalar> col_cache_;
  int cached_oh_ = 0, cached_ow_ = 0, cached_pt_ = 0, cached_pl_ = 0;
  bool is_pointwise() const { return kh_ == 1 && kw_ == 1 && stride_ == 1; }
};

class DepthwiseConv2D : public Layer {
 public:
  DepthwiseConv2D(std::string name, int channels, int kh, int kw, int stride,
                  Padding padding, bool use_bias = false);

  Tensor forward(const std::vector<const Tensor*>& inputs, bool training,
                 bool keep_cache) override;
  std::vector<Tensor> backward(const std::vector<const Tensor*>& inputs,
                               const Tensor& output, const Tensor& grad_out) override;
  std::vector<Param*> params() override;
  void init_params(Rng& rng) override;

 private:
  int channels_, kh_, kw_, stride_;
  Padding padding_;
  bool use_bias_;
  Param weight_;  // (kh, kw, channels, 1)
  Param bias_;
  int cached_pt_ = 0, cached_pl_ = 0;
};

class BatchNorm : public Layer {
 public:
  BatchNorm(std::string name, int channels, Scalar momentum = 0.99,
            Scalar epsilon = 1e-5);

  Tensor forward(const std::vector<const Tensor*>& inputs, bool training,
                 bool keep_cache) override;
  std::vector<Tensor> backward(const std::vector<const Tensor*>& inputs,
                               const Tensor& output, const Tensor& grad_out) override;
  std::vector<Param*> params() override;
  void init_params(Rng& rng) override;

 private:
  int channels_;
  Scalar momentum_, epsilon_;
  Param gamma_, beta_, running_mean_, running_var_;
  // Caches from the last training-mode forward.
  std::vector<Scalar> batch_inv_std_, batch_mean_;
  bool last_forward_training_ = false;
};

class ReLU : public Layer {
 public:
  using Layer::Layer;
  Tensor forward(const std::vector<const Tensor*>& inputs, bool, bool) override;
  std::vector<Tensor> backward(const std::vector<const Tensor*>& inputs,
                               const Tensor& output, const Tensor& grad_out) override;
};

class MaxPool : public Layer {
 public:
  MaxPool(std::string name, int kh, int kw, int stride, Padding padding);
  Tensor forward(const std::vector<const Tensor*>& inputs, bool training,
                 bool keep_cache) override;
  std::vector<Tensor> backward(const std::vector<const Tensor*>& inputs,
                               const Tensor& output, const Tensor& grad_out) override;

 private:
  int kh_, kw_, stride_;
  Padding padding_;
  std::vector<std::size_t> argmax_;
};

class AvgPool : public Layer {
 public:
  AvgPool(std::string name, int kh, int kw, int stride, Padding padding);
  Tensor forward(const std::vector<const Tensor*>& inputs, bool training,
                 bool keep_cache) override;
  std::vector<Tensor> backward(const std::vector<const Tensor*>& inputs,
                               const Tensor& output, const Tensor& grad_out) override;

 private:
  int kh_, kw_, stride_;
  Padding padding_;
};

class GlobalAvgPool : public Layer {
 public:
  using Layer::Layer;
  Tensor forward(const std::vector<const Tensor*>& inputs, bool, bool) override;
  std::vector<Tensor> backward(const std::vector<const Tensor*>& inputs,
                               const Tensor& output, const Tensor& grad_out) override;
};

class Dense : public Layer {
 public:
  Dense(std::string name, int in_dim, int out_dim, bool use_bias = true);
  Tensor forward(const std::vector<const Tensor*>& inputs, bool, bool) override;
  std::vector<Tensor> backward(const std::vector<const Tensor*>& inputs,
                               const Tensor& output, const Tensor& grad_out) override;
  std::vector<Param*> params() override;
  void init_params(Rng& rng) override;  // Glorot-uniform weights, zero bias

 private:
  int in_dim_, out_dim_;
  bool use_bias_;
  Param weight_;  // (1,1,in_dim,out_dim)
  Param bias_;
};

// y = sum_i coeff_i * x_i over same-shaped inputs (residual connections;
// InceptionResNet branch scaling uses a non-unit coefficient).
class Add : public Layer {
 public:
  Add(std::string name, std::vector<Scalar> coeffs);
  std::size_t num_inputs() const override { return coeffs_.size(); }
  Tensor forward(const std::vector<const Tensor*>& inputs, bool, bool) override;
  std::vector<Tensor> backward(const std::vector<const Tensor*>& inputs,
                               const Tensor& output, const Tensor& grad_out) override;

 private:
  std::vector<Scalar> coeffs_;
};

// Channel-axis concatenation (dense blocks, inception branches).
class Concat : public Layer {
 public:
  Concat(std::string name, std::size_t arity);
  std::size_t num_inputs() const override { return arity_; }
  Tensor forward(const std::vector<const Tensor*>& inputs, bool, bool) override;
  std::vector<Tensor> backward(const std::vector<const Tensor*>& inputs,
                               const Tensor& output, const Tensor& grad_out) override;

 private:
  std::size_t arity_;
};

// Output spatial size and top/left padding for one axis.
void conv_out_dim(int in, int k, int stride, Padding padding, int* out, int* pad_lo);

}  // namespace leafscope::nn
