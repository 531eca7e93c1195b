#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace aan {

// Rows are batch items, columns are features.
using BatchTensor = Eigen::MatrixXd;

enum class Activation { Linear, Tanh, Relu };

struct DenseLayer {
  Eigen::MatrixXd weights;  // out x in
  Eigen::VectorXd bias;     // out
  Activation activation = Activation::Linear;

  Eigen::Index in_size() const { return weights.cols(); }
  Eigen::Index out_size() const { return weights.rows(); }
};

// Weights uniform(-bound, bound), bias zero.
DenseLayer make_dense(Eigen::Index in, Eigen::Index out, Activation act, double bound,
                      std::uint64_t seed);

struct DenseCache {
  BatchTensor input;
  BatchTensor pre_activation;
};

struct DenseGrads {
  Eigen::MatrixXd weights;
  Eigen::VectorXd bias;

  static DenseGrads zeros_like(const DenseLayer& layer);
};

// out = act(x W^T + b). Fills `cache` when given.
BatchTensor dense_forward(const DenseLayer& layer, const BatchTensor& x,
                          DenseCache* cache = nullptr);

struct DenseBackward {
  BatchTensor input_grad;
  DenseGrads params;
};

DenseBackward dense_backward(const DenseLayer& layer, const DenseCache& cache,
                             const BatchTensor& upstream_grad);

struct LossAndGrad {
  double loss = 0.0;
  BatchTensor grad;
};

// Row-wise softmax, max-subtracted.
BatchTensor softmax(const BatchTensor& logits);

// Mean over the batch of -ln softmax(logits)[label]; grad = (softmax - onehot)/batch.
LossAndGrad softmax_cross_entropy(const BatchTensor& logits, std::span<const int> labels);

// Mean of squared error over every entry; grad = 2(pred - target)/(batch*D).
LossAndGrad mse_loss(const BatchTensor& pred, const BatchTensor& target);

// Gradient reversal layer. Identity forward; backward multiplies by -lambda.
inline const BatchTensor& grl_forward(const BatchTensor& x) { return x; }
BatchTensor grl_backward(const BatchTensor& upstream_grad, double lambda);

// Flat views over parameter and gradient storage. All optimizers and the
// gradient checker operate on these so they stay agnostic of topology.
using ParamSpans = std::vector<std::span<double>>;
using GradSpans = std::vector<std::span<const double>>;

void append_spans(ParamSpans& out, DenseLayer& layer);
void append_spans(GradSpans& out, const DenseGrads& grads);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void validate() const;
};

struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::int64_t step = 0;
};

// Bias-corrected Adam update in place. Throws DivergenceError on non-finite
// gradients, before touching any parameter.
void adam_step(const ParamSpans& params, const GradSpans& grads, AdamState& state,
               const AdamConfig& config);

// theta -= lr * g
void sgd_step(const ParamSpans& params, const GradSpans& grads, double lr);

// Central-difference check of `analytic` against `loss` evaluated while each
// scalar of `params` is perturbed by +-eps. Returns the max relative error
// |a - n| / max(|a|, |n|, 1e-8). Parameters are restored on return.
double finite_difference_check(const std::function<double()>& loss, const ParamSpans& params,
                               const GradSpans& analytic, double eps);

}  // namespace aan
