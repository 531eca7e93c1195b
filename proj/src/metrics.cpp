// Detection metrics: EER, Cllr and PAV-calibrated minimum Cllr.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>

#include "aan/asv_eval.hpp"
#include "aan/errors.hpp"

namespace aan {

namespace {

void require_both_classes(std::span<const double> targets, std::span<const double> nontargets) {
  if (targets.empty() || nontargets.empty())
    throw ValidationError("metric needs at least one target and one nontarget score");
}

struct LabeledScore {
  double score;
  bool target;
};

std::vector<LabeledScore> sorted_scores(std::span<const double> targets,
                                        std::span<const double> nontargets) {
  std::vector<LabeledScore> all;
  all.reserve(targets.size() + nontargets.size());
  for (double s : targets) all.push_back({s, true});
  for (double s : nontargets) all.push_back({s, false});
  for (const auto& s : all)
    if (std::isnan(s.score)) throw ValidationError("NaN score");
  std::stable_sort(all.begin(), all.end(),
                   [](const LabeledScore& a, const LabeledScore& b) { return a.score < b.score; });
  return all;
}

// log2(1 + e^x) without overflow.
double softplus_bits(double x) {
  const double nat = x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
  return nat / std::log(2.0);
}

}  // namespace

double compute_eer(std::span<const double> targets, std::span<const double> nontargets) {
  require_both_classes(targets, nontargets);
  const auto all = sorted_scores(targets, nontargets);
  const std::int64_t nt = static_cast<std::int64_t>(targets.size());
  const std::int64_t nn = static_cast<std::int64_t>(nontargets.size());

  std::int64_t targets_below = 0;
  std::int64_t nontargets_below = 0;
  std::int64_t best_diff = -1;
  double best = 0.0;
  for (std::size_t i = 0; i < all.size();) {
    // threshold t = all[i].score: FR = targets < t, FA = nontargets >= t
    const std::int64_t fr = targets_below;
    const std::int64_t fa = nn - nontargets_below;
    const std::int64_t diff = std::abs(fa * nt - fr * nn);
    if (best_diff < 0 || diff < best_diff) {
      best_diff = diff;
      best = 0.5 * (static_cast<double>(fa) / static_cast<double>(nn) +
                    static_cast<double>(fr) / static_cast<double>(nt));
    }
    const double t = all[i].score;
    for (; i < all.size() && all[i].score == t; ++i) (all[i].target ? targets_below : nontargets_below)++;
  }
  return best;
}

double compute_cllr(std::span<const double> targets, std::span<const double> nontargets) {
  require_both_classes(targets, nontargets);
  double t = 0.0, n = 0.0;
  for (double s : targets) t += softplus_bits(-s);
  for (double s : nontargets) n += softplus_bits(s);
  return 0.5 * (t / static_cast<double>(targets.size()) +
                n / static_cast<double>(nontargets.size()));
}

std::vector<double> pav_calibrated_llrs(std::span<const double> targets,
                                        std::span<const double> nontargets) {
  require_both_classes(targets, nontargets);
  const std::size_t n = targets.size() + nontargets.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto score_at = [&](std::size_t i) {
    return i < targets.size() ? targets[i] : nontargets[i - targets.size()];
  };
  for (std::size_t i = 0; i < n; ++i)
    if (std::isnan(score_at(i))) throw ValidationError("NaN score");
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return score_at(a) < score_at(b); });

  // Blocks of (count, target count); tied scores start in one block so they
  // always share a posterior.
  struct Block {
    double weight;
    double hits;
    std::size_t first, last;  // positions in `order`, inclusive
  };
  std::vector<Block> blocks;
  for (std::size_t pos = 0; pos < n;) {
    const double s = score_at(order[pos]);
    Block b{0.0, 0.0, pos, pos};
    for (; pos < n && score_at(order[pos]) == s; ++pos) {
      b.weight += 1.0;
      b.hits += order[pos] < targets.size() ? 1.0 : 0.0;
      b.last = pos;
    }
    blocks.push_back(b);
    // pool while the previous block's mean is not below this one's
    while (blocks.size() > 1) {
      Block& cur = blocks.back();
      Block& prev = blocks[blocks.size() - 2];
      if (prev.hits * cur.weight < cur.hits * prev.weight) break;
      prev.weight += cur.weight;
      prev.hits += cur.hits;
      prev.last = cur.last;
      blocks.pop_back();
    }
  }

  constexpr double kLo = 1e-12;
  constexpr double kHi = 1.0 - 1e-12;
  const double prior_log_odds =
      std::log(static_cast<double>(targets.size()) / static_cast<double>(nontargets.size()));
  std::vector<double> llr(n);
  for (const auto& b : blocks) {
    const double p = std::clamp(b.hits / b.weight, kLo, kHi);
    const double value = std::log(p) - std::log1p(-p) - prior_log_odds;
    for (std::size_t pos = b.first; pos <= b.last; ++pos) llr[order[pos]] = value;
  }
  return llr;
}

double compute_min_cllr(std::span<const double> targets, std::span<const double> nontargets) {
  const auto llr = pav_calibrated_llrs(targets, nontargets);
  const auto split = llr.begin() + static_cast<std::ptrdiff_t>(targets.size());
  return compute_cllr(std::span<const double>(llr.data(), targets.size()),
                      std::span<const double>(&*split, nontargets.size()));
}

std::vector<double> ScoredTrials::target_scores() const {
  std::vector<double> out;
  for (std::size_t i = 0; i < trials.size(); ++i)
    if (trials[i].is_target) out.push_back(scores.at(i));
  return out;
}

std::vector<double> ScoredTrials::nontarget_scores() const {
  std::vector<double> out;
  for (std::size_t i = 0; i < trials.size(); ++i)
    if (!trials[i].is_target) out.push_back(scores.at(i));
  return out;
}

double compute_eer(const ScoredTrials& s) { return compute_eer(s.target_scores(), s.nontarget_scores()); }
double compute_cllr(const ScoredTrials& s) { return compute_cllr(s.target_scores(), s.nontarget_scores()); }
double compute_min_cllr(const ScoredTrials& s) {
  return compute_min_cllr(s.target_scores(), s.nontarget_scores());
}

}  // namespace aan
