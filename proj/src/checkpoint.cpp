#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "aan/errors.hpp"
#include "aan/model.hpp"

namespace aan {

namespace {

static_assert(sizeof(double) == 8);

template <typename T>
void put_le(std::string& out, T value) {
  static_assert(std::is_integral_v<T> || std::is_same_v<T, std::uint64_t>);
  for (std::size_t i = 0; i < sizeof(T); ++i)
    out.push_back(static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double v) { put_le(out, std::bit_cast<std::uint64_t>(v)); }

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += sizeof(T);
    return static_cast<T>(v);
  }
  double f64() { return std::bit_cast<double>(get<std::uint64_t>()); }
  std::string_view raw(std::size_t n) {
    need(n);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw ParseError("checkpoint truncated at byte " + std::to_string(pos_));
  }
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

void put_layer(std::string& out, const DenseLayer& l) {
  for (Eigen::Index r = 0; r < l.weights.rows(); ++r)
    for (Eigen::Index c = 0; c < l.weights.cols(); ++c) put_f64(out, l.weights(r, c));
  for (Eigen::Index i = 0; i < l.bias.size(); ++i) put_f64(out, l.bias[i]);
}

void get_layer(Reader& in, DenseLayer& l) {
  for (Eigen::Index r = 0; r < l.weights.rows(); ++r)
    for (Eigen::Index c = 0; c < l.weights.cols(); ++c) l.weights(r, c) = in.f64();
  for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias[i] = in.f64();
}

}  // namespace

std::string serialize_model(const AanModel& model) {
  model.validate();
  std::string out(kCheckpointMagic, sizeof kCheckpointMagic);
  put_le<std::uint32_t>(out, kCheckpointVersion);
  const auto& d = model.dims;
  for (std::size_t v : {d.input, d.hidden, d.latent, d.branch_hidden, d.gender_classes,
                        d.accent_classes, d.speaker_classes})
    put_le<std::uint64_t>(out, v);
  put_f64(out, model.lambda);
  for (const auto& l : model.encoder) put_layer(out, l);
  for (const auto& l : model.decoder) put_layer(out, l);
  for (const Branch* b : {&model.gender_head, &model.accent_head, &model.speaker_head}) {
    put_layer(out, b->hidden);
    put_layer(out, b->logits);
  }
  return out;
}

AanModel deserialize_model(std::string_view bytes) {
  Reader in(bytes);
  if (bytes.size() < sizeof kCheckpointMagic ||
      in.raw(sizeof kCheckpointMagic) != std::string_view(kCheckpointMagic, sizeof kCheckpointMagic))
    throw ParseError("not an AAN checkpoint (bad magic)");
  const auto version = in.get<std::uint32_t>();
  if (version != kCheckpointVersion)
    throw ParseError("unsupported checkpoint version " + std::to_string(version));
  AanDims d;
  for (std::size_t* f : {&d.input, &d.hidden, &d.latent, &d.branch_hidden, &d.gender_classes,
                         &d.accent_classes, &d.speaker_classes}) {
    const auto v = in.get<std::uint64_t>();
    if (v == 0 || v > (1ULL << 24)) throw ParseError("checkpoint has implausible dimension " + std::to_string(v));
    *f = static_cast<std::size_t>(v);
  }
  const double lambda = in.f64();
  if (!std::isfinite(lambda) || lambda < 0.0) throw ParseError("checkpoint has invalid lambda");
  AanModel m = build_aan_uniform(d, lambda, 0.0, 0);
  for (auto& l : m.encoder) get_layer(in, l);
  for (auto& l : m.decoder) get_layer(in, l);
  for (Branch* b : {&m.gender_head, &m.accent_head, &m.speaker_head}) {
    get_layer(in, b->hidden);
    get_layer(in, b->logits);
  }
  if (!in.done()) throw ParseError("checkpoint has trailing bytes");
  try {
    m.validate();
  } catch (const ValidationError& e) {
    throw ParseError(std::string("corrupt checkpoint: ") + e.what());
  }
  return m;
}

void save_model(const AanModel& model, const std::filesystem::path& path) {
  const std::string bytes = serialize_model(model);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open '" + path.string() + "' for writing");
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw Error("failed writing '" + path.string() + "'");
}

AanModel load_model(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open '" + path.string() + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return deserialize_model(ss.str());
}

}  // namespace aan
