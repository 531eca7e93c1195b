#include "aan/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "aan/errors.hpp"

namespace aan {

Vocab Vocab::from_labels(std::vector<std::string> labels) {
  std::sort(labels.begin(), labels.end());
  labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
  Vocab v;
  v.labels_ = std::move(labels);
  return v;
}

std::optional<int> Vocab::find(std::string_view label) const {
  auto it = std::lower_bound(labels_.begin(), labels_.end(), label);
  if (it == labels_.end() || *it != label) return std::nullopt;
  return static_cast<int>(it - labels_.begin());
}

int Vocab::index(std::string_view label) const {
  if (auto i = find(label)) return *i;
  throw ValidationError("unknown label '" + std::string(label) + "'");
}

bool Embedding::operator==(const Embedding& other) const {
  return utterance_id == other.utterance_id && speaker_id == other.speaker_id &&
         gender == other.gender && accent == other.accent &&
         vector.size() == other.vector.size() && vector == other.vector;
}

std::string_view to_string(SplitTag tag) {
  switch (tag) {
    case SplitTag::Train: return "train";
    case SplitTag::Valid: return "valid";
    case SplitTag::Test: return "test";
    case SplitTag::Unsplit: return "unsplit";
  }
  return "unsplit";
}

Eigen::MatrixXd Corpus::matrix() const {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(embeddings.size()),
                    static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < embeddings.size(); ++i)
    m.row(static_cast<Eigen::Index>(i)) = embeddings[i].vector.transpose();
  return m;
}

namespace {

template <typename Field>
std::vector<int> labels_of(const Corpus& c, const Vocab& vocab, Field field) {
  std::vector<int> out;
  out.reserve(c.embeddings.size());
  for (const auto& e : c.embeddings) out.push_back(vocab.index(e.*field));
  return out;
}

}  // namespace

std::vector<int> Corpus::speaker_labels() const {
  return labels_of(*this, speaker_vocab, &Embedding::speaker_id);
}
std::vector<int> Corpus::gender_labels() const {
  return labels_of(*this, gender_vocab, &Embedding::gender);
}
std::vector<int> Corpus::accent_labels() const {
  return labels_of(*this, accent_vocab, &Embedding::accent);
}

void Corpus::validate() const {
  if (dim == 0) throw ValidationError("corpus dim must be positive");
  std::set<std::string_view> ids;
  std::map<std::string_view, std::pair<std::string_view, std::string_view>> attrs;
  for (const auto& e : embeddings) {
    if (static_cast<std::size_t>(e.vector.size()) != dim)
      throw ValidationError("utterance '" + e.utterance_id + "' has length " +
                            std::to_string(e.vector.size()) + ", expected " +
                            std::to_string(dim));
    if (!e.vector.allFinite())
      throw ValidationError("utterance '" + e.utterance_id + "' has non-finite entries");
    if (!ids.insert(e.utterance_id).second)
      throw ValidationError("duplicate utterance_id '" + e.utterance_id + "'");
    if (!speaker_vocab.find(e.speaker_id) || !gender_vocab.find(e.gender) ||
        !accent_vocab.find(e.accent))
      throw ValidationError("utterance '" + e.utterance_id + "' has a label missing from the vocab");
    auto [it, inserted] = attrs.emplace(e.speaker_id, std::pair{std::string_view(e.gender),
                                                                std::string_view(e.accent)});
    if (!inserted && (it->second.first != e.gender || it->second.second != e.accent))
      throw ValidationError("speaker '" + e.speaker_id + "' has inconsistent gender/accent");
  }
}

Corpus make_corpus(std::vector<Embedding> embeddings, std::size_t dim, SplitTag tag) {
  std::vector<std::string> spk, gen, acc;
  for (const auto& e : embeddings) {
    spk.push_back(e.speaker_id);
    gen.push_back(e.gender);
    acc.push_back(e.accent);
  }
  Corpus c;
  c.embeddings = std::move(embeddings);
  c.dim = dim;
  c.speaker_vocab = Vocab::from_labels(std::move(spk));
  c.gender_vocab = Vocab::from_labels(std::move(gen));
  c.accent_vocab = Vocab::from_labels(std::move(acc));
  c.split_tag = tag;
  return c;
}

void CorpusSpec::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw ValidationError(std::string(name) + " must be positive");
  };
  positive(n_speakers, "n_speakers");
  positive(n_genders, "n_genders");
  positive(n_accents, "n_accents");
  positive(utterances_per_speaker, "utterances_per_speaker");
  positive(dim, "dim");
  if (n_speakers < n_genders)
    throw ValidationError("n_speakers must be >= n_genders");
  auto scale = [](double v, const char* name) {
    if (!std::isfinite(v) || v < 0.0)
      throw ValidationError(std::string(name) + " must be finite and nonnegative");
  };
  scale(attribute_strength.speaker, "attribute_strength.speaker");
  scale(attribute_strength.gender, "attribute_strength.gender");
  scale(attribute_strength.accent, "attribute_strength.accent");
  scale(noise_sigma, "noise_sigma");
}

CorpusSpec default_desk_spec(std::uint64_t seed) {
  CorpusSpec spec;
  spec.attribute_strength.speaker = 0.63;
  spec.attribute_strength.gender = 0.45;
  spec.attribute_strength.accent = 2.46;
  spec.noise_sigma = 0.46;
  spec.seed = seed;
  return spec;
}

namespace {

std::string padded(const char* prefix, std::size_t value, std::size_t count) {
  std::size_t width = 3;
  for (std::size_t n = count > 0 ? count - 1 : 0; n >= 1000; n /= 10) ++width;
  std::string digits = std::to_string(value);
  if (digits.size() < width) digits.insert(0, width - digits.size(), '0');
  return prefix + digits;
}

std::string gender_label(std::size_t g, std::size_t n_genders) {
  if (n_genders == 2) return g == 0 ? "f" : "m";
  return padded("g", g, n_genders);
}

}  // namespace

Corpus generate_corpus(const CorpusSpec& spec) {
  spec.validate();
  const auto dim = static_cast<Eigen::Index>(spec.dim);
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto gaussian = [&](double scale) {
    Vector v(dim);
    for (Eigen::Index i = 0; i < dim; ++i) v[i] = scale * normal(rng);
    return v;
  };

  std::vector<Vector> gender_dirs, accent_dirs;
  for (std::size_t g = 0; g < spec.n_genders; ++g)
    gender_dirs.push_back(gaussian(spec.attribute_strength.gender));
  for (std::size_t a = 0; a < spec.n_accents; ++a)
    accent_dirs.push_back(gaussian(spec.attribute_strength.accent));

  struct Speaker {
    std::size_t gender, accent;
    Vector centre;
  };
  std::vector<Speaker> speakers;
  std::uniform_int_distribution<std::size_t> pick_accent(0, spec.n_accents - 1);
  for (std::size_t s = 0; s < spec.n_speakers; ++s) {
    Speaker sp;
    sp.gender = s % spec.n_genders;
    sp.accent = pick_accent(rng);
    sp.centre = gender_dirs[sp.gender] + accent_dirs[sp.accent] +
                gaussian(spec.attribute_strength.speaker);
    speakers.push_back(std::move(sp));
  }

  std::vector<Embedding> embeddings;
  embeddings.reserve(spec.n_speakers * spec.utterances_per_speaker);
  for (std::size_t s = 0; s < spec.n_speakers; ++s) {
    const auto& sp = speakers[s];
    const std::string speaker_id = padded("spk", s, spec.n_speakers);
    for (std::size_t u = 0; u < spec.utterances_per_speaker; ++u) {
      Embedding e;
      e.utterance_id = speaker_id + "-" + padded("u", u, spec.utterances_per_speaker);
      e.speaker_id = speaker_id;
      e.gender = gender_label(sp.gender, spec.n_genders);
      e.accent = padded("acc", sp.accent, spec.n_accents);
      e.vector = sp.centre + gaussian(spec.noise_sigma);
      embeddings.push_back(std::move(e));
    }
  }
  return make_corpus(std::move(embeddings), spec.dim);
}

namespace {

// Indices of each speaker's utterances sorted by utterance_id.
std::map<std::string, std::vector<std::size_t>> utterances_by_speaker(const Corpus& c) {
  std::map<std::string, std::vector<std::size_t>> by;
  for (std::size_t i = 0; i < c.embeddings.size(); ++i)
    by[c.embeddings[i].speaker_id].push_back(i);
  for (auto& [_, idx] : by)
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      return c.embeddings[a].utterance_id < c.embeddings[b].utterance_id;
    });
  return by;
}

Corpus subset(const Corpus& c, const std::vector<char>& mask, SplitTag tag) {
  Corpus out;
  out.dim = c.dim;
  out.speaker_vocab = c.speaker_vocab;
  out.gender_vocab = c.gender_vocab;
  out.accent_vocab = c.accent_vocab;
  out.split_tag = tag;
  for (std::size_t i = 0; i < c.embeddings.size(); ++i)
    if (mask[i]) out.embeddings.push_back(c.embeddings[i]);
  return out;
}

}  // namespace

CorpusSplit split_corpus(const Corpus& corpus, std::size_t n_heldout_per_speaker) {
  const std::size_t n = n_heldout_per_speaker;
  // 0 = train, 1 = test, 2 = valid
  std::vector<char> role(corpus.embeddings.size(), 0);
  if (n > 0) {
    for (const auto& [speaker, idx] : utterances_by_speaker(corpus)) {
      if (idx.size() <= 2 * n)
        throw ValidationError("speaker '" + speaker + "' has " + std::to_string(idx.size()) +
                              " utterances; need more than " + std::to_string(2 * n));
      const std::size_t m = idx.size();
      for (std::size_t k = m - n; k < m; ++k) role[idx[k]] = 2;
      for (std::size_t k = m - 2 * n; k < m - n; ++k) role[idx[k]] = 1;
    }
  }
  auto mask_for = [&](char r) {
    std::vector<char> mask(role.size());
    for (std::size_t i = 0; i < role.size(); ++i) mask[i] = role[i] == r;
    return mask;
  };
  return {subset(corpus, mask_for(0), SplitTag::Train), subset(corpus, mask_for(2), SplitTag::Valid),
          subset(corpus, mask_for(1), SplitTag::Test)};
}

std::pair<Corpus, Corpus> split_enroll_trial(const Corpus& corpus,
                                             std::size_t n_enroll_per_speaker) {
  std::vector<char> enroll(corpus.embeddings.size(), 0);
  for (const auto& [speaker, idx] : utterances_by_speaker(corpus)) {
    if (idx.size() <= n_enroll_per_speaker || n_enroll_per_speaker == 0)
      throw ValidationError("speaker '" + speaker + "' has " + std::to_string(idx.size()) +
                            " utterances; cannot reserve " +
                            std::to_string(n_enroll_per_speaker) +
                            " for enrollment and keep at least one trial");
    for (std::size_t k = 0; k < n_enroll_per_speaker; ++k) enroll[idx[k]] = 1;
  }
  std::vector<char> trial(enroll.size());
  for (std::size_t i = 0; i < enroll.size(); ++i) trial[i] = !enroll[i];
  return {subset(corpus, enroll, corpus.split_tag), subset(corpus, trial, corpus.split_tag)};
}

// ---------------------------------------------------------------------------
// CSV

namespace {

void append_double(std::string& out, double v) {
  char buf[32];
  const int n = std::snprintf(buf, sizeof buf, "%.17g", v);
  out.append(buf, static_cast<std::size_t>(n));
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    fields.push_back(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

[[noreturn]] void parse_fail(std::size_t line_no, const std::string& what) {
  throw ParseError("line " + std::to_string(line_no) + ": " + what);
}

}  // namespace

std::string corpus_to_csv(const Corpus& corpus) {
  std::string out = "utterance_id,speaker_id,gender,accent";
  for (std::size_t j = 0; j < corpus.dim; ++j) out += ",v" + std::to_string(j);
  out += '\n';
  for (const auto& e : corpus.embeddings) {
    out += e.utterance_id;
    out += ',';
    out += e.speaker_id;
    out += ',';
    out += e.gender;
    out += ',';
    out += e.accent;
    for (Eigen::Index j = 0; j < e.vector.size(); ++j) {
      out += ',';
      append_double(out, e.vector[j]);
    }
    out += '\n';
  }
  return out;
}

void write_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open '" + path.string() + "' for writing");
  f << corpus_to_csv(corpus);
  if (!f) throw Error("failed writing '" + path.string() + "'");
}

Corpus corpus_from_csv(std::string_view text, SplitTag tag) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  auto next_line = [&](std::string_view& line) {
    if (pos >= text.size()) return false;
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    line = text.substr(pos, nl - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos = nl + 1;
    ++line_no;
    return true;
  };

  std::string_view line;
  if (!next_line(line)) throw ParseError("empty corpus");
  const auto header = split_fields(line);
  static constexpr std::string_view kFixed[] = {"utterance_id", "speaker_id", "gender", "accent"};
  if (header.size() < 5) parse_fail(line_no, "header needs the four id columns and at least one v column");
  for (std::size_t k = 0; k < 4; ++k)
    if (header[k] != kFixed[k]) parse_fail(line_no, "expected header column '" + std::string(kFixed[k]) + "'");
  const std::size_t dim = header.size() - 4;
  for (std::size_t j = 0; j < dim; ++j)
    if (header[4 + j] != "v" + std::to_string(j))
      parse_fail(line_no, "expected header column 'v" + std::to_string(j) + "'");

  std::vector<Embedding> rows;
  while (next_line(line)) {
    if (line.empty()) {
      if (pos >= text.size()) break;
      parse_fail(line_no, "blank line");
    }
    const auto fields = split_fields(line);
    if (fields.size() != dim + 4)
      parse_fail(line_no, "row has " + std::to_string(fields.size() >= 4 ? fields.size() - 4 : 0) +
                              " vector entries, header declares D=" + std::to_string(dim));
    Embedding e;
    e.utterance_id = fields[0];
    e.speaker_id = fields[1];
    e.gender = fields[2];
    e.accent = fields[3];
    if (e.utterance_id.empty() || e.speaker_id.empty() || e.gender.empty() || e.accent.empty())
      parse_fail(line_no, "empty id or label field");
    e.vector.resize(static_cast<Eigen::Index>(dim));
    for (std::size_t j = 0; j < dim; ++j) {
      const auto f = fields[4 + j];
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (ec != std::errc() || ptr != f.data() + f.size() || !std::isfinite(v))
        parse_fail(line_no, "bad number '" + std::string(f) + "' in column v" + std::to_string(j));
      e.vector[static_cast<Eigen::Index>(j)] = v;
    }
    rows.push_back(std::move(e));
  }
  if (rows.empty()) throw ParseError("empty corpus");
  Corpus c = make_corpus(std::move(rows), dim, tag);
  try {
    c.validate();
  } catch (const ValidationError& e) {
    throw ParseError(e.what());
  }
  return c;
}

Corpus read_corpus(const std::filesystem::path& path, SplitTag tag) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open '" + path.string() + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return corpus_from_csv(ss.str(), tag);
}

}  // namespace aan
