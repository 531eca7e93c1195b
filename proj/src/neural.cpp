#include "aan/neural.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "aan/errors.hpp"

namespace aan {

namespace {

std::string shape_str(Eigen::Index r, Eigen::Index c) {
  return std::to_string(r) + "x" + std::to_string(c);
}

}  // namespace

DenseLayer make_dense(Eigen::Index in, Eigen::Index out, Activation act, double bound,
                      std::uint64_t seed) {
  if (in < 1 || out < 1) throw ShapeError("dense layer sizes must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-bound, bound);
  DenseLayer layer;
  layer.weights.resize(out, in);
  for (Eigen::Index r = 0; r < out; ++r)
    for (Eigen::Index c = 0; c < in; ++c) layer.weights(r, c) = u(rng);
  layer.bias = Eigen::VectorXd::Zero(out);
  layer.activation = act;
  return layer;
}

DenseGrads DenseGrads::zeros_like(const DenseLayer& layer) {
  return {Eigen::MatrixXd::Zero(layer.weights.rows(), layer.weights.cols()),
          Eigen::VectorXd::Zero(layer.bias.size())};
}

BatchTensor dense_forward(const DenseLayer& layer, const BatchTensor& x, DenseCache* cache) {
  if (x.cols() != layer.in_size())
    throw ShapeError("dense_forward: expected " + std::to_string(layer.in_size()) +
                     " input features, got " + std::to_string(x.cols()));
  BatchTensor z = x * layer.weights.transpose();
  z.rowwise() += layer.bias.transpose();
  BatchTensor out;
  switch (layer.activation) {
    case Activation::Linear: out = z; break;
    case Activation::Tanh: out = z.array().tanh().matrix(); break;
    case Activation::Relu: out = z.cwiseMax(0.0); break;
  }
  if (cache) {
    cache->input = x;
    cache->pre_activation = std::move(z);
  }
  return out;
}

DenseBackward dense_backward(const DenseLayer& layer, const DenseCache& cache,
                             const BatchTensor& upstream_grad) {
  const auto& z = cache.pre_activation;
  if (upstream_grad.rows() != z.rows() || upstream_grad.cols() != z.cols())
    throw ShapeError("dense_backward: upstream gradient is " +
                     shape_str(upstream_grad.rows(), upstream_grad.cols()) + ", layer output is " +
                     shape_str(z.rows(), z.cols()));
  BatchTensor dz;
  switch (layer.activation) {
    case Activation::Linear: dz = upstream_grad; break;
    case Activation::Tanh:
      dz = (upstream_grad.array() * (1.0 - z.array().tanh().square())).matrix();
      break;
    case Activation::Relu:
      // subgradient 0 at exactly 0
      dz = (upstream_grad.array() * (z.array() > 0.0).cast<double>()).matrix();
      break;
  }
  DenseBackward out;
  out.params.weights = dz.transpose() * cache.input;
  out.params.bias = dz.colwise().sum().transpose();
  out.input_grad = dz * layer.weights;
  return out;
}

BatchTensor softmax(const BatchTensor& logits) {
  BatchTensor p = logits;
  for (Eigen::Index r = 0; r < p.rows(); ++r) {
    p.row(r).array() -= p.row(r).maxCoeff();
    p.row(r) = p.row(r).array().exp().matrix();
    p.row(r) /= p.row(r).sum();
  }
  return p;
}

LossAndGrad softmax_cross_entropy(const BatchTensor& logits, std::span<const int> labels) {
  const Eigen::Index batch = logits.rows();
  const Eigen::Index k = logits.cols();
  if (static_cast<Eigen::Index>(labels.size()) != batch)
    throw ShapeError("softmax_cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(batch) + " rows");
  if (batch < 1) throw ShapeError("softmax_cross_entropy: empty batch");
  LossAndGrad out;
  out.grad = softmax(logits);
  double total = 0.0;
  for (Eigen::Index r = 0; r < batch; ++r) {
    const int y = labels[static_cast<std::size_t>(r)];
    if (y < 0 || y >= k)
      throw ValidationError("label " + std::to_string(y) + " out of range [0, " +
                            std::to_string(k) + ")");
    // log-sum-exp form keeps saturated logits exact
    const double m = logits.row(r).maxCoeff();
    const double lse = m + std::log((logits.row(r).array() - m).exp().sum());
    total += lse - logits(r, y);
    out.grad(r, y) -= 1.0;
  }
  out.loss = total / static_cast<double>(batch);
  out.grad /= static_cast<double>(batch);
  return out;
}

LossAndGrad mse_loss(const BatchTensor& pred, const BatchTensor& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols())
    throw ShapeError("mse_loss: prediction is " + shape_str(pred.rows(), pred.cols()) +
                     ", target is " + shape_str(target.rows(), target.cols()));
  const double n = static_cast<double>(pred.size());
  if (n == 0) throw ShapeError("mse_loss: empty batch");
  BatchTensor diff = pred - target;
  return {diff.squaredNorm() / n, (2.0 / n) * diff};
}

BatchTensor grl_backward(const BatchTensor& upstream_grad, double lambda) {
  if (!std::isfinite(lambda) || lambda < 0.0)
    throw ValidationError("lambda must be finite and nonnegative");
  return -lambda * upstream_grad;
}

void append_spans(ParamSpans& out, DenseLayer& layer) {
  out.emplace_back(layer.weights.data(), static_cast<std::size_t>(layer.weights.size()));
  out.emplace_back(layer.bias.data(), static_cast<std::size_t>(layer.bias.size()));
}

void append_spans(GradSpans& out, const DenseGrads& grads) {
  out.emplace_back(grads.weights.data(), static_cast<std::size_t>(grads.weights.size()));
  out.emplace_back(grads.bias.data(), static_cast<std::size_t>(grads.bias.size()));
}

void AdamConfig::validate() const {
  if (!std::isfinite(lr) || lr < 0.0) throw ValidationError("lr must be finite and nonnegative");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ValidationError("beta1 must be in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ValidationError("beta2 must be in [0, 1)");
  if (!(eps > 0.0) || !std::isfinite(eps)) throw ValidationError("eps must be positive");
}

namespace {

void check_pairing(const ParamSpans& params, const GradSpans& grads) {
  if (params.size() != grads.size())
    throw ShapeError("optimizer: " + std::to_string(params.size()) + " parameter blocks but " +
                     std::to_string(grads.size()) + " gradient blocks");
  for (std::size_t i = 0; i < params.size(); ++i)
    if (params[i].size() != grads[i].size())
      throw ShapeError("optimizer: block " + std::to_string(i) + " size mismatch");
}

void check_finite(const GradSpans& grads) {
  for (const auto& g : grads)
    for (double x : g)
      if (!std::isfinite(x)) throw DivergenceError("divergence detected");
}

}  // namespace

void adam_step(const ParamSpans& params, const GradSpans& grads, AdamState& state,
               const AdamConfig& config) {
  config.validate();
  check_pairing(params, grads);
  check_finite(grads);
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.size(), 0.0);
      state.v.emplace_back(p.size(), 0.0);
    }
  } else if (state.m.size() != params.size()) {
    throw ShapeError("adam_step: optimizer state does not match parameters");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t b = 0; b < params.size(); ++b) {
    auto& m = state.m[b];
    auto& v = state.v[b];
    const auto p = params[b];
    const auto g = grads[b];
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g[i];
      v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g[i] * g[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      p[i] -= config.lr * m_hat / (std::sqrt(v_hat) + config.eps);
    }
  }
}

void sgd_step(const ParamSpans& params, const GradSpans& grads, double lr) {
  check_pairing(params, grads);
  check_finite(grads);
  for (std::size_t b = 0; b < params.size(); ++b)
    for (std::size_t i = 0; i < params[b].size(); ++i) params[b][i] -= lr * grads[b][i];
}

double finite_difference_check(const std::function<double()>& loss, const ParamSpans& params,
                               const GradSpans& analytic, double eps) {
  if (!(eps > 0.0)) throw ValidationError("eps must be positive");
  check_pairing(params, analytic);
  double worst = 0.0;
  for (std::size_t b = 0; b < params.size(); ++b) {
    for (std::size_t i = 0; i < params[b].size(); ++i) {
      double& theta = params[b][i];
      const double saved = theta;
      theta = saved + eps;
      const double up = loss();
      theta = saved - eps;
      const double down = loss();
      theta = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic[b][i];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      worst = std::max(worst, std::abs(a - numeric) / denom);
    }
  }
  return worst;
}

}  // namespace aan
