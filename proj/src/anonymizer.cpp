#include "aan/anonymizer.hpp"

#include <algorithm>
#include <numeric>

#include "aan/errors.hpp"

namespace aan {

PseudoPool::PseudoPool(std::vector<Vector> vectors, std::string source)
    : vectors_(std::move(vectors)), source_(std::move(source)) {
  if (vectors_.empty()) throw ValidationError("pseudo-speaker pool is empty");
  const auto d = vectors_.front().size();
  norms_.reserve(vectors_.size());
  for (const auto& v : vectors_) {
    if (v.size() != d || d == 0) throw ShapeError("pseudo-speaker pool vectors differ in dimension");
    if (!v.allFinite()) throw ValidationError("pseudo-speaker pool has non-finite entries");
    const double n = v.norm();
    if (n == 0.0) throw DegenerateVectorError("degenerate vector in pseudo-speaker pool");
    norms_.push_back(n);
  }
}

PseudoPool PseudoPool::from_corpus(const Corpus& corpus, std::string source) {
  std::vector<Vector> v;
  v.reserve(corpus.size());
  for (const auto& e : corpus.embeddings) v.push_back(e.vector);
  return PseudoPool(std::move(v), std::move(source));
}

Vector baseline_anonymize(const PseudoPool& pool, const Vector& x, std::size_t top_k) {
  if (static_cast<std::size_t>(x.size()) != pool.dim())
    throw ShapeError("baseline_anonymize: vector has D=" + std::to_string(x.size()) +
                     ", pool has D=" + std::to_string(pool.dim()));
  if (top_k == 0 || top_k > pool.size())
    throw ValidationError("top_k must be in [1, " + std::to_string(pool.size()) + "]");
  const double xn = x.norm();
  if (xn == 0.0) throw DegenerateVectorError("degenerate vector");

  std::vector<double> sim(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i)
    sim[i] = pool.vectors_[i].dot(x) / (pool.norms_[i] * xn);
  std::vector<std::size_t> order(pool.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return sim[a] < sim[b]; });

  Vector sum = Vector::Zero(x.size());
  for (std::size_t k = 0; k < top_k; ++k) sum += pool.vectors_[order[k]];
  return sum / static_cast<double>(top_k);
}

Vector anonymize_aan1(const AanModel& model, const Vector& x) {
  if (static_cast<std::size_t>(x.size()) != model.dims.input)
    throw ShapeError("anonymize_aan1: vector has D=" + std::to_string(x.size()) +
                     ", model expects " + std::to_string(model.dims.input));
  BatchTensor row = x.transpose();
  const AanOutput out = aan_forward(model, row);
  Vector y = out.reconstruction.row(0).transpose();
  if (!y.allFinite()) throw DivergenceError("divergence detected: non-finite reconstruction");
  return y;
}

Vector anonymize_aan2(const AanModel& model, const PseudoPool& pool, const Vector& x,
                      std::size_t top_k) {
  return anonymize_aan1(model, baseline_anonymize(pool, x, top_k));
}

std::string_view to_string(MethodKind kind) {
  switch (kind) {
    case MethodKind::Identity: return "identity";
    case MethodKind::BaselineFarthest: return "baseline";
    case MethodKind::Aan1: return "aan1";
    case MethodKind::Aan2: return "aan2";
  }
  return "identity";
}

MethodKind parse_method_kind(std::string_view name) {
  if (name == "identity") return MethodKind::Identity;
  if (name == "baseline" || name == "baseline_farthest") return MethodKind::BaselineFarthest;
  if (name == "aan1") return MethodKind::Aan1;
  if (name == "aan2") return MethodKind::Aan2;
  throw ValidationError("unknown anonymization method '" + std::string(name) + "'");
}

AnonymizationMethod AnonymizationMethod::identity() { return {}; }

AnonymizationMethod AnonymizationMethod::baseline(std::shared_ptr<const PseudoPool> pool,
                                                  std::size_t top_k) {
  return {MethodKind::BaselineFarthest, nullptr, std::move(pool), top_k};
}

AnonymizationMethod AnonymizationMethod::aan1(std::shared_ptr<const AanModel> model) {
  return {MethodKind::Aan1, std::move(model), nullptr, 0};
}

AnonymizationMethod AnonymizationMethod::aan2(std::shared_ptr<const AanModel> model,
                                              std::shared_ptr<const PseudoPool> pool,
                                              std::size_t top_k) {
  return {MethodKind::Aan2, std::move(model), std::move(pool), top_k};
}

void AnonymizationMethod::validate(std::size_t dim) const {
  const bool needs_model = kind == MethodKind::Aan1 || kind == MethodKind::Aan2;
  const bool needs_pool = kind == MethodKind::BaselineFarthest || kind == MethodKind::Aan2;
  const std::string name(to_string(kind));
  if (needs_model) {
    if (!model) throw ValidationError(name + " requires a model");
    if (model->dims.input != dim)
      throw ShapeError(name + ": model expects D=" + std::to_string(model->dims.input) +
                       ", corpus has D=" + std::to_string(dim));
  }
  if (needs_pool) {
    if (!pool) throw ValidationError(name + " requires a pseudo-speaker pool");
    if (pool->dim() != dim)
      throw ShapeError(name + ": pool has D=" + std::to_string(pool->dim()) +
                       ", corpus has D=" + std::to_string(dim));
    if (top_k == 0 || top_k > pool->size())
      throw ValidationError(name + ": top_k must be in [1, " + std::to_string(pool->size()) + "]");
  }
}

Vector AnonymizationMethod::apply(const Vector& x) const {
  switch (kind) {
    case MethodKind::Identity: return x;
    case MethodKind::BaselineFarthest: return baseline_anonymize(*pool, x, top_k);
    case MethodKind::Aan1: return anonymize_aan1(*model, x);
    case MethodKind::Aan2: return anonymize_aan2(*model, *pool, x, top_k);
  }
  return x;
}

Corpus anonymize_corpus(const Corpus& corpus, const AnonymizationMethod& method) {
  method.validate(corpus.dim);
  if (method.kind == MethodKind::Identity) return corpus;
  Corpus out = corpus;
  for (auto& e : out.embeddings) e.vector = method.apply(e.vector);
  return out;
}

}  // namespace aan
