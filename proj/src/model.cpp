#include "aan/model.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "aan/errors.hpp"
#include "aan/seed.hpp"

namespace aan {

AanDims AanDims::full_scale() {
  AanDims d;
  d.input = 512;
  d.hidden = 512;
  d.latent = 512;
  d.branch_hidden = 128;
  d.gender_classes = 2;
  d.accent_classes = 30;
  d.speaker_classes = 1251;
  return d;
}

AanDims AanDims::for_corpus(const Corpus& corpus) {
  AanDims d;
  d.input = corpus.dim;
  d.gender_classes = corpus.gender_vocab.size();
  d.accent_classes = corpus.accent_vocab.size();
  d.speaker_classes = corpus.speaker_vocab.size();
  return d;
}

void AanDims::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw ValidationError(std::string("dims.") + name + " must be positive");
  };
  positive(input, "input");
  positive(hidden, "hidden");
  positive(latent, "latent");
  positive(branch_hidden, "branch_hidden");
  positive(gender_classes, "gender_classes");
  positive(accent_classes, "accent_classes");
  positive(speaker_classes, "speaker_classes");
}

const Branch& AanModel::head(Attribute a) const {
  switch (a) {
    case Attribute::Gender: return gender_head;
    case Attribute::Accent: return accent_head;
    case Attribute::Speaker: return speaker_head;
  }
  return speaker_head;
}

Branch& AanModel::head(Attribute a) {
  return const_cast<Branch&>(static_cast<const AanModel&>(*this).head(a));
}

ParamSpans AanModel::parameters() {
  ParamSpans out;
  for (auto& l : encoder) append_spans(out, l);
  for (auto& l : decoder) append_spans(out, l);
  for (Branch* b : {&gender_head, &accent_head, &speaker_head}) {
    append_spans(out, b->hidden);
    append_spans(out, b->logits);
  }
  return out;
}

std::size_t AanModel::parameter_count() const {
  std::size_t n = 0;
  auto add = [&](const DenseLayer& l) {
    n += static_cast<std::size_t>(l.weights.size() + l.bias.size());
  };
  for (const auto& l : encoder) add(l);
  for (const auto& l : decoder) add(l);
  for (const Branch* b : {&gender_head, &accent_head, &speaker_head}) {
    add(b->hidden);
    add(b->logits);
  }
  return n;
}

void AanModel::validate() const {
  dims.validate();
  if (!std::isfinite(lambda) || lambda < 0.0)
    throw ValidationError("lambda must be finite and nonnegative");
  if (encoder.empty() || decoder.empty())
    throw ValidationError("encoder and decoder need at least one layer each");
  auto finite = [](const DenseLayer& l) { return l.weights.allFinite() && l.bias.allFinite(); };
  Eigen::Index width = static_cast<Eigen::Index>(dims.input);
  for (const auto& l : encoder) {
    if (l.in_size() != width || l.bias.size() != l.out_size() || !finite(l))
      throw ValidationError("encoder layer shapes are inconsistent or non-finite");
    width = l.out_size();
  }
  if (width != static_cast<Eigen::Index>(dims.latent))
    throw ValidationError("encoder output width differs from dims.latent");
  for (const auto& l : decoder) {
    if (l.in_size() != width || l.bias.size() != l.out_size() || !finite(l))
      throw ValidationError("decoder layer shapes are inconsistent or non-finite");
    width = l.out_size();
  }
  if (width != static_cast<Eigen::Index>(dims.input))
    throw ValidationError("decoder output width differs from dims.input");
  const std::size_t classes[] = {dims.gender_classes, dims.accent_classes, dims.speaker_classes};
  const Branch* heads[] = {&gender_head, &accent_head, &speaker_head};
  for (int i = 0; i < 3; ++i) {
    const Branch& b = *heads[i];
    if (b.hidden.in_size() != static_cast<Eigen::Index>(dims.latent) ||
        b.logits.in_size() != b.hidden.out_size() ||
        b.logits.out_size() != static_cast<Eigen::Index>(classes[i]) || !finite(b.hidden) ||
        !finite(b.logits))
      throw ValidationError("adversarial branch shapes are inconsistent or non-finite");
  }
}

namespace {

AanModel build_with(const AanDims& dims, double lambda, std::uint64_t seed,
                    const std::function<double(Eigen::Index)>& bound) {
  dims.validate();
  if (!std::isfinite(lambda) || lambda < 0.0)
    throw ValidationError("lambda must be finite and nonnegative");
  const auto d = static_cast<Eigen::Index>(dims.input);
  const auto h = static_cast<Eigen::Index>(dims.hidden);
  const auto l = static_cast<Eigen::Index>(dims.latent);
  const auto bh = static_cast<Eigen::Index>(dims.branch_hidden);
  std::uint64_t layer_index = 0;
  auto layer = [&](Eigen::Index in, Eigen::Index out, Activation act) {
    return make_dense(in, out, act, bound(in), derive_seed(seed, layer_index++));
  };
  AanModel m;
  m.dims = dims;
  m.lambda = lambda;
  m.encoder.push_back(layer(d, h, Activation::Tanh));
  m.encoder.push_back(layer(h, l, Activation::Tanh));
  m.decoder.push_back(layer(l, h, Activation::Tanh));
  m.decoder.push_back(layer(h, d, Activation::Linear));
  auto branch = [&](std::size_t k) {
    Branch b;
    b.hidden = layer(l, bh, Activation::Relu);
    b.logits = layer(bh, static_cast<Eigen::Index>(k), Activation::Linear);
    return b;
  };
  m.gender_head = branch(dims.gender_classes);
  m.accent_head = branch(dims.accent_classes);
  m.speaker_head = branch(dims.speaker_classes);
  return m;
}

}  // namespace

AanModel build_aan(const AanDims& dims, double lambda, std::uint64_t seed) {
  return build_with(dims, lambda, seed,
                    [](Eigen::Index fan_in) { return 1.0 / std::sqrt(static_cast<double>(fan_in)); });
}

AanModel build_aan_uniform(const AanDims& dims, double lambda, double bound, std::uint64_t seed) {
  return build_with(dims, lambda, seed, [bound](Eigen::Index) { return bound; });
}

namespace {

void check_input(const AanModel& model, const BatchTensor& x) {
  if (x.cols() != static_cast<Eigen::Index>(model.dims.input))
    throw ShapeError("model expects " + std::to_string(model.dims.input) +
                     "-dimensional input, got " + std::to_string(x.cols()));
}

BatchTensor run_stack(const std::vector<DenseLayer>& layers, BatchTensor h,
                      std::vector<DenseCache>* caches) {
  if (caches) caches->resize(layers.size());
  for (std::size_t i = 0; i < layers.size(); ++i)
    h = dense_forward(layers[i], h, caches ? &(*caches)[i] : nullptr);
  return h;
}

// Backpropagates through a stack, writing parameter gradients; returns the
// gradient with respect to the stack input.
BatchTensor back_stack(const std::vector<DenseLayer>& layers, const std::vector<DenseCache>& caches,
                       BatchTensor g, std::vector<DenseGrads>& grads) {
  grads.resize(layers.size());
  for (std::size_t i = layers.size(); i-- > 0;) {
    auto bw = dense_backward(layers[i], caches[i], g);
    grads[i] = std::move(bw.params);
    g = std::move(bw.input_grad);
  }
  return g;
}

struct BranchPass {
  DenseCache hidden_cache, logits_cache;
  BatchTensor logits;
};

BranchPass branch_forward(const Branch& b, const BatchTensor& latent) {
  BranchPass p;
  const BatchTensor& in = grl_forward(latent);
  BatchTensor h = dense_forward(b.hidden, in, &p.hidden_cache);
  p.logits = dense_forward(b.logits, h, &p.logits_cache);
  return p;
}

// Returns d loss / d latent (before reversal).
BatchTensor branch_backward(const Branch& b, const BranchPass& p, const BatchTensor& logit_grad,
                            BranchGrads& grads) {
  auto top = dense_backward(b.logits, p.logits_cache, logit_grad);
  auto bottom = dense_backward(b.hidden, p.hidden_cache, top.input_grad);
  grads.logits = std::move(top.params);
  grads.hidden = std::move(bottom.params);
  return std::move(bottom.input_grad);
}

void check_labels(const AanModel& model, const LabeledBatch& batch) {
  const auto n = static_cast<std::size_t>(batch.x.rows());
  if (batch.gender.size() != n || batch.accent.size() != n || batch.speaker.size() != n)
    throw ShapeError("label vectors must match the batch size");
  auto in_range = [](const std::vector<int>& labels, std::size_t k) {
    return std::all_of(labels.begin(), labels.end(),
                       [k](int y) { return y >= 0 && static_cast<std::size_t>(y) < k; });
  };
  if (!in_range(batch.gender, model.dims.gender_classes) ||
      !in_range(batch.accent, model.dims.accent_classes) ||
      !in_range(batch.speaker, model.dims.speaker_classes))
    throw ValidationError("label outside the head's class range");
}

void check_finite(const LossBreakdown& l) {
  if (!std::isfinite(l.l_au) || !std::isfinite(l.l_gender) || !std::isfinite(l.l_accent) ||
      !std::isfinite(l.l_speaker))
    throw DivergenceError("divergence detected: non-finite loss");
}

}  // namespace

AanOutput aan_forward(const AanModel& model, const BatchTensor& x) {
  check_input(model, x);
  AanOutput out;
  out.latent = run_stack(model.encoder, x, nullptr);
  out.reconstruction = run_stack(model.decoder, out.latent, nullptr);
  out.gender_logits = branch_forward(model.gender_head, out.latent).logits;
  out.accent_logits = branch_forward(model.accent_head, out.latent).logits;
  out.speaker_logits = branch_forward(model.speaker_head, out.latent).logits;
  return out;
}

LossBreakdown aan_loss(const AanModel& model, const LabeledBatch& batch) {
  check_labels(model, batch);
  const AanOutput out = aan_forward(model, batch.x);
  LossBreakdown l;
  l.l_au = mse_loss(out.reconstruction, batch.x).loss;
  l.l_gender = softmax_cross_entropy(out.gender_logits, batch.gender).loss;
  l.l_accent = softmax_cross_entropy(out.accent_logits, batch.accent).loss;
  l.l_speaker = softmax_cross_entropy(out.speaker_logits, batch.speaker).loss;
  check_finite(l);
  return l;
}

LossAndGrads aan_loss_and_grads(const AanModel& model, const LabeledBatch& batch) {
  check_input(model, batch.x);
  check_labels(model, batch);

  std::vector<DenseCache> enc_caches, dec_caches;
  const BatchTensor latent = run_stack(model.encoder, batch.x, &enc_caches);
  const BatchTensor recon = run_stack(model.decoder, latent, &dec_caches);
  const BranchPass gp = branch_forward(model.gender_head, latent);
  const BranchPass ap = branch_forward(model.accent_head, latent);
  const BranchPass sp = branch_forward(model.speaker_head, latent);

  const auto au = mse_loss(recon, batch.x);
  const auto ce_g = softmax_cross_entropy(gp.logits, batch.gender);
  const auto ce_a = softmax_cross_entropy(ap.logits, batch.accent);
  const auto ce_s = softmax_cross_entropy(sp.logits, batch.speaker);

  LossAndGrads out;
  out.loss = {au.loss, ce_g.loss, ce_a.loss, ce_s.loss};
  check_finite(out.loss);

  BatchTensor d_latent = back_stack(model.decoder, dec_caches, au.grad, out.grads.decoder);
  d_latent += grl_backward(branch_backward(model.gender_head, gp, ce_g.grad, out.grads.gender_head),
                           model.lambda);
  d_latent += grl_backward(branch_backward(model.accent_head, ap, ce_a.grad, out.grads.accent_head),
                           model.lambda);
  d_latent += grl_backward(
      branch_backward(model.speaker_head, sp, ce_s.grad, out.grads.speaker_head), model.lambda);
  back_stack(model.encoder, enc_caches, std::move(d_latent), out.grads.encoder);
  return out;
}

GradSpans AanGrads::spans() const {
  GradSpans out;
  for (const auto& g : encoder) append_spans(out, g);
  for (const auto& g : decoder) append_spans(out, g);
  for (const BranchGrads* b : {&gender_head, &accent_head, &speaker_head}) {
    append_spans(out, b->hidden);
    append_spans(out, b->logits);
  }
  return out;
}

LabeledBatch LabeledBatch::from_corpus(const Corpus& corpus) {
  LabeledBatch b;
  b.x = corpus.matrix();
  b.gender = corpus.gender_labels();
  b.accent = corpus.accent_labels();
  b.speaker = corpus.speaker_labels();
  return b;
}

LabeledBatch LabeledBatch::rows(const std::vector<std::size_t>& index) const {
  LabeledBatch b;
  b.x.resize(static_cast<Eigen::Index>(index.size()), x.cols());
  for (std::size_t i = 0; i < index.size(); ++i) {
    b.x.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(index[i]));
    b.gender.push_back(gender[index[i]]);
    b.accent.push_back(accent[index[i]]);
    b.speaker.push_back(speaker[index[i]]);
  }
  return b;
}

}  // namespace aan
