#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "aan/dataset.hpp"
#include "aan/model.hpp"

namespace aan {

// Candidate x-vectors the baseline averages over to build a pseudo-speaker.
class PseudoPool {
 public:
  PseudoPool(std::vector<Vector> vectors, std::string source);
  static PseudoPool from_corpus(const Corpus& corpus, std::string source);

  std::size_t size() const { return vectors_.size(); }
  std::size_t dim() const { return static_cast<std::size_t>(vectors_.front().size()); }
  const std::vector<Vector>& vectors() const { return vectors_; }
  const std::string& source() const { return source_; }

 private:
  std::vector<Vector> vectors_;
  std::vector<double> norms_;
  std::string source_;

  friend Vector baseline_anonymize(const PseudoPool&, const Vector&, std::size_t);
};

// Mean of the top_k pool vectors least cosine-similar to x (ties by pool
// index). Throws DegenerateVectorError for zero-norm x.
Vector baseline_anonymize(const PseudoPool& pool, const Vector& x, std::size_t top_k);

// AAN-1: the model's reconstruction of x.
Vector anonymize_aan1(const AanModel& model, const Vector& x);

// AAN-2: AAN-1 applied to the baseline pseudo-speaker vector.
Vector anonymize_aan2(const AanModel& model, const PseudoPool& pool, const Vector& x,
                      std::size_t top_k);

enum class MethodKind { Identity, BaselineFarthest, Aan1, Aan2 };

std::string_view to_string(MethodKind kind);
MethodKind parse_method_kind(std::string_view name);

struct AnonymizationMethod {
  MethodKind kind = MethodKind::Identity;
  std::shared_ptr<const AanModel> model;
  std::shared_ptr<const PseudoPool> pool;
  std::size_t top_k = 10;

  static AnonymizationMethod identity();
  static AnonymizationMethod baseline(std::shared_ptr<const PseudoPool> pool, std::size_t top_k);
  static AnonymizationMethod aan1(std::shared_ptr<const AanModel> model);
  static AnonymizationMethod aan2(std::shared_ptr<const AanModel> model,
                                  std::shared_ptr<const PseudoPool> pool, std::size_t top_k);

  // Required parameters present and consistent with dimension `dim`.
  void validate(std::size_t dim) const;
  Vector apply(const Vector& x) const;
};

// Maps every vector through the method; ids, labels, vocabs and order are kept.
Corpus anonymize_corpus(const Corpus& corpus, const AnonymizationMethod& method);

}  // namespace aan
