#include <algorithm>
#include <cstdio>
#include <sstream>

#include "aan/asv_eval.hpp"
#include "aan/errors.hpp"
#include "aan/seed.hpp"

namespace aan {

namespace {

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

MetricsRow metrics_row(const std::string& method, const std::string& dataset, char enroll,
                       char trial, const std::string& gender, const ScoredTrials& scored) {
  const auto tar = scored.target_scores();
  const auto non = scored.nontarget_scores();
  MetricsRow r{method, dataset, enroll, trial, gender};
  r.eer_percent = 100.0 * compute_eer(tar, non);
  r.min_cllr = compute_min_cllr(tar, non);
  r.cllr = compute_cllr(tar, non);
  r.n_target = tar.size();
  r.n_nontarget = non.size();
  return r;
}

ScoredTrials restrict_gender(const ScoredTrials& s, const std::string& gender) {
  ScoredTrials out;
  for (std::size_t i = 0; i < s.trials.size(); ++i)
    if (s.trials[i].gender == gender) {
      out.trials.push_back(s.trials[i]);
      out.scores.push_back(s.scores[i]);
    }
  return out;
}

}  // namespace

MetricsReport evaluate_conditions(const std::vector<EvalSet>& sets,
                                  const std::vector<NamedMethod>& methods,
                                  const TrialConfig& trial_config, const ProbeSet* probes) {
  MetricsReport report;
  for (const auto& set : sets) {
    const auto trials = make_trials(set.enroll, set.trial, trial_config.n_nontarget_per_target,
                                    derive_seed(trial_config.seed, set.tag));
    std::vector<std::string> genders;
    for (const auto& t : trials) genders.push_back(t.gender);
    std::sort(genders.begin(), genders.end());
    genders.erase(std::unique(genders.begin(), genders.end()), genders.end());

    for (const auto& m : methods) {
      const Corpus enroll_a = anonymize_corpus(set.enroll, m.method);
      const Corpus trial_a = anonymize_corpus(set.trial, m.method);
      const auto models_o = enroll_speaker_models(set.enroll);
      const auto models_a = enroll_speaker_models(enroll_a);
      struct Cell {
        char enroll, trial;
        const std::map<std::string, Vector>* models;
        const Corpus* trial_corpus;
      };
      const Cell cells[] = {{'o', 'o', &models_o, &set.trial},
                            {'o', 'a', &models_o, &trial_a},
                            {'a', 'a', &models_a, &trial_a}};
      for (const auto& cell : cells) {
        const ScoredTrials scored = score_trials(*cell.models, *cell.trial_corpus, trials);
        for (const auto& g : genders)
          report.rows.push_back(
              metrics_row(m.name, set.tag, cell.enroll, cell.trial, g, restrict_gender(scored, g)));
      }
    }
  }
  if (probes) {
    for (const auto& m : methods) {
      const Corpus train_a = anonymize_corpus(probes->train, m.method);
      const Corpus test_a = anonymize_corpus(probes->test, m.method);
      for (Attribute a : {Attribute::Speaker, Attribute::Gender, Attribute::Accent}) {
        const double acc = probe_attack(train_a, test_a, a,
                                        derive_seed(probes->seed, to_string(a)), probes->config);
        report.probes.push_back({m.name, std::string(to_string(a)), acc});
      }
    }
  }
  return report;
}

const MetricsRow* MetricsReport::find(std::string_view method, std::string_view dataset,
                                      char enroll, char trial, std::string_view gender) const {
  for (const auto& r : rows)
    if (r.method == method && r.dataset == dataset && r.enroll == enroll && r.trial == trial &&
        r.gender == gender)
      return &r;
  return nullptr;
}

const ProbeRow* MetricsReport::find_probe(std::string_view method, std::string_view attribute) const {
  for (const auto& p : probes)
    if (p.method == method && p.attribute == attribute) return &p;
  return nullptr;
}

std::string MetricsReport::rows_csv() const {
  std::string out = "method,dataset,enroll,trial,gender,eer_percent,min_cllr,cllr,n_target,n_nontarget\n";
  for (const auto& r : rows) {
    out += r.method + ',' + r.dataset + ',' + r.enroll + ',' + r.trial + ',' + r.gender + ',' +
           fmt("%.17g", r.eer_percent) + ',' + fmt("%.17g", r.min_cllr) + ',' +
           fmt("%.17g", r.cllr) + ',' + std::to_string(r.n_target) + ',' +
           std::to_string(r.n_nontarget) + '\n';
  }
  return out;
}

std::string MetricsReport::probes_csv() const {
  std::string out = "method,attribute,accuracy\n";
  for (const auto& p : probes) out += p.method + ',' + p.attribute + ',' + fmt("%.17g", p.accuracy) + '\n';
  return out;
}

std::string MetricsReport::to_table() const {
  std::ostringstream out;
  std::vector<std::string> methods;
  for (const auto& r : rows)
    if (std::find(methods.begin(), methods.end(), r.method) == methods.end())
      methods.push_back(r.method);
  for (const auto& m : methods) {
    out << "ASV results for " << m << "\n";
    char line[160];
    std::snprintf(line, sizeof line, "%3s  %-14s %9s %10s %10s  %-6s %-5s %-4s\n", "#", "Dataset",
                  "EER,%", "Cllr_min", "Cllr", "Enroll", "Trial", "Gen");
    out << line;
    int n = 0;
    for (const auto& r : rows) {
      if (r.method != m) continue;
      std::snprintf(line, sizeof line, "%3d  %-14s %9.3f %10.3f %10.3f  %-6c %-5c %-4s\n", ++n,
                    r.dataset.c_str(), r.eer_percent, r.min_cllr, r.cllr, r.enroll, r.trial,
                    r.gender.c_str());
      out << line;
    }
    out << "\n";
  }
  if (!probes.empty()) {
    out << "Probe attacks (top-1 accuracy)\n";
    char line[128];
    std::snprintf(line, sizeof line, "%-12s %-9s %9s\n", "Method", "Attribute", "Accuracy");
    out << line;
    for (const auto& p : probes) {
      std::snprintf(line, sizeof line, "%-12s %-9s %9.4f\n", p.method.c_str(), p.attribute.c_str(),
                    p.accuracy);
      out << line;
    }
  }
  return out.str();
}

MetricsReport read_report_csv(std::string_view rows_text, std::string_view probes_text) {
  MetricsReport rep;
  auto lines = [](std::string_view text) {
    std::vector<std::string> out;
    std::istringstream in{std::string(text)};
    std::string l;
    while (std::getline(in, l)) {
      if (!l.empty() && l.back() == '\r') l.pop_back();
      if (!l.empty()) out.push_back(l);
    }
    return out;
  };
  auto fields = [](const std::string& l) {
    std::vector<std::string> f;
    std::stringstream ss(l);
    std::string x;
    while (std::getline(ss, x, ',')) f.push_back(x);
    return f;
  };
  auto num = [](const std::string& s) {
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      throw ParseError("bad number '" + s + "' in report");
    }
    if (used != s.size()) throw ParseError("bad number '" + s + "' in report");
    return v;
  };
  const auto rl = lines(rows_text);
  if (rl.empty() || rl[0] != "method,dataset,enroll,trial,gender,eer_percent,min_cllr,cllr,n_target,n_nontarget")
    throw ParseError("report rows: bad header");
  for (std::size_t i = 1; i < rl.size(); ++i) {
    const auto f = fields(rl[i]);
    if (f.size() != 10 || f[2].size() != 1 || f[3].size() != 1)
      throw ParseError("report rows: line " + std::to_string(i + 1) + " malformed");
    MetricsRow r{f[0], f[1], f[2][0], f[3][0], f[4]};
    r.eer_percent = num(f[5]);
    r.min_cllr = num(f[6]);
    r.cllr = num(f[7]);
    r.n_target = static_cast<std::size_t>(num(f[8]));
    r.n_nontarget = static_cast<std::size_t>(num(f[9]));
    rep.rows.push_back(std::move(r));
  }
  if (!probes_text.empty()) {
    const auto pl = lines(probes_text);
    if (pl.empty() || pl[0] != "method,attribute,accuracy") throw ParseError("report probes: bad header");
    for (std::size_t i = 1; i < pl.size(); ++i) {
      const auto f = fields(pl[i]);
      if (f.size() != 3) throw ParseError("report probes: line " + std::to_string(i + 1) + " malformed");
      rep.probes.push_back({f[0], f[1], num(f[2])});
    }
  }
  return rep;
}

}  // namespace aan
