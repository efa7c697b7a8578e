#pragma once

// Checkpoint layout (all integers little-endian):
//   "NSCK" | u32 version | u64 metadata length | metadata (UTF-8 JSON)
//   | u64 float count | float32 blocks | u64 FNV-1a of everything before it
// Parameter blocks follow the declared layer order, symptom network first;
// per layer: weight, bias, running mean, running variance (when present).

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "nsc/error.hpp"
#include "nsc/model/bundle.hpp"

namespace nsc {

inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr char kCheckpointMagic[4] = {'N', 'S', 'C', 'K'};

namespace detail {

inline std::uint64_t fnv1a(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (auto b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

class ByteWriter {
 public:
  void raw(const void* p, std::size_t n) {
    auto b = static_cast<const std::uint8_t*>(p);
    buf_.insert(buf_.end(), b, b + n);
  }
  template <typename U>
  void le(U v) {
    static_assert(std::is_unsigned_v<U>);
    for (std::size_t i = 0; i < sizeof(U); ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { le(std::bit_cast<std::uint32_t>(v)); }
  std::vector<std::uint8_t>& bytes() { return buf_; }

 private:
  std::vector<std::uint8_t> buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}
  void need(std::size_t n) const {
    if (n > data_.size() - pos_)
      throw CheckpointError(CheckpointError::Kind::truncated, "checkpoint is truncated");
  }
  template <typename U>
  U le() {
    need(sizeof(U));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(data_[pos_ + i]) << (8 * i);
    pos_ += sizeof(U);
    return v;
  }
  float f32() { return std::bit_cast<float>(le<std::uint32_t>()); }
  std::string str(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(data_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }

 private:
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

inline nlohmann::json specs_to_json(const Network& net) {
  auto arr = nlohmann::json::array();
  for (const auto& s : net.specs())
    arr.push_back({{"kind", std::string(numkit::to_string(s.kind))},
                   {"in_dim", s.in_dim},
                   {"out_dim", s.out_dim},
                   {"dropout_prob", s.dropout_prob}});
  return arr;
}

inline std::vector<numkit::LayerSpec> specs_from_json(const nlohmann::json& arr) {
  std::vector<numkit::LayerSpec> specs;
  for (const auto& j : arr)
    specs.push_back({numkit::layer_kind_from_string(j.at("kind").get<std::string>()),
                     j.at("in_dim").get<std::size_t>(), j.at("out_dim").get<std::size_t>(),
                     j.at("dropout_prob").get<double>()});
  return specs;
}

/// Shapes of every stored block for a layer stack, in file order.
inline std::vector<numkit::LayerParams<float>> empty_params(const std::vector<numkit::LayerSpec>& specs) {
  std::vector<numkit::LayerParams<float>> ls(specs.size());
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto& s = specs[i];
    if (s.kind == numkit::LayerKind::dense) {
      ls[i].weight = Tensor(s.in_dim, s.out_dim);
      ls[i].bias = Tensor(1, s.out_dim);
    } else if (s.kind == numkit::LayerKind::batchnorm) {
      ls[i].weight = Tensor(1, s.out_dim);
      ls[i].bias = Tensor(1, s.out_dim);
      ls[i].running_mean = Tensor(1, s.out_dim);
      ls[i].running_var = Tensor(1, s.out_dim);
    }
  }
  return ls;
}

template <typename Fn>
void for_each_block(std::vector<numkit::LayerParams<float>>& layers, Fn&& fn) {
  for (auto& l : layers)
    for (Tensor* t : {&l.weight, &l.bias, &l.running_mean, &l.running_var})
      if (!t->empty()) fn(*t);
}

}  // namespace detail

inline nlohmann::json bundle_metadata(const ModelBundle& b) {
  return {
      {"symptoms", b.vocab.symptoms.names()},
      {"diseases", b.vocab.diseases.names()},
      {"symptom_net", detail::specs_to_json(b.symptom_net)},
      {"diagnosis_net", detail::specs_to_json(b.diagnosis_net)},
      {"loss",
       {{"lambda", b.loss.lambda}, {"gamma_plus", b.loss.gamma_plus}, {"gamma_minus", b.loss.gamma_minus},
        {"margin", b.loss.margin}}},
      {"stopping",
       {{"beta", b.stopping.beta}, {"max_attempts", b.stopping.max_attempts},
        {"use_entropy", b.stopping.use_entropy}, {"normalize_entropy", b.stopping.normalize_entropy}}},
      {"seed", b.seed},
      {"mask_known", b.mask_known},
  };
}

inline std::vector<std::uint8_t> serialize_checkpoint(const ModelBundle& bundle) {
  detail::ByteWriter w;
  w.raw(kCheckpointMagic, 4);
  w.le(kCheckpointVersion);
  const std::string meta = bundle_metadata(bundle).dump();
  w.le(static_cast<std::uint64_t>(meta.size()));
  w.raw(meta.data(), meta.size());
  auto sym = bundle.symptom_net.layers();
  auto dia = bundle.diagnosis_net.layers();
  std::uint64_t count = 0;
  auto tally = [&](Tensor& t) { count += t.size(); };
  detail::for_each_block(sym, tally);
  detail::for_each_block(dia, tally);
  w.le(count);
  auto put = [&](Tensor& t) {
    for (float v : t.values()) w.f32(v);
  };
  detail::for_each_block(sym, put);
  detail::for_each_block(dia, put);
  w.le(detail::fnv1a(w.bytes()));
  return std::move(w.bytes());
}

inline ModelBundle deserialize_checkpoint(std::span<const std::uint8_t> data) {
  using Kind = CheckpointError::Kind;
  if (data.size() < 4 || std::memcmp(data.data(), kCheckpointMagic, 4) != 0)
    throw CheckpointError(Kind::not_a_checkpoint, "not a checkpoint (bad magic bytes)");
  detail::ByteReader r(data);
  r.str(4);
  const auto version = r.le<std::uint32_t>();
  if (version != kCheckpointVersion)
    throw CheckpointError(Kind::unsupported_version,
                          "unsupported checkpoint version " + std::to_string(version) + " (expected " +
                              std::to_string(kCheckpointVersion) + ")");
  const auto meta_len = r.le<std::uint64_t>();
  const std::string meta_text = r.str(meta_len);
  const auto count = r.le<std::uint64_t>();
  if (count > data.size() / 4) throw CheckpointError(Kind::truncated, "checkpoint is truncated");
  r.need(count * 4 + 8);
  if (r.pos() + count * 4 + 8 != data.size())
    throw CheckpointError(Kind::truncated, "checkpoint has unexpected trailing bytes");
  const std::size_t body = data.size() - 8;
  detail::ByteReader tail(data.subspan(body));
  if (tail.le<std::uint64_t>() != detail::fnv1a(data.first(body)))
    throw CheckpointError(Kind::checksum_mismatch, "checkpoint checksum mismatch");

  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(meta_text);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(Kind::not_a_checkpoint, std::string("bad checkpoint metadata: ") + e.what());
  }
  ModelBundle b;
  try {
    b.vocab.symptoms = NameIndex(meta.at("symptoms").get<std::vector<std::string>>());
    b.vocab.diseases = NameIndex(meta.at("diseases").get<std::vector<std::string>>());
    const auto& l = meta.at("loss");
    b.loss = {l.at("lambda").get<double>(), l.at("gamma_plus").get<double>(), l.at("gamma_minus").get<double>(),
              l.at("margin").get<double>()};
    const auto& s = meta.at("stopping");
    b.stopping = {s.at("beta").get<double>(), s.at("max_attempts").get<std::size_t>(),
                  s.at("use_entropy").get<bool>(), s.at("normalize_entropy").get<bool>()};
    b.seed = meta.at("seed").get<std::uint64_t>();
    b.mask_known = meta.at("mask_known").get<bool>();
    auto sym_specs = detail::specs_from_json(meta.at("symptom_net"));
    auto dia_specs = detail::specs_from_json(meta.at("diagnosis_net"));
    auto sym = detail::empty_params(sym_specs);
    auto dia = detail::empty_params(dia_specs);
    std::uint64_t expected = 0;
    auto tally = [&](Tensor& t) { expected += t.size(); };
    detail::for_each_block(sym, tally);
    detail::for_each_block(dia, tally);
    if (expected != count) throw CheckpointError(Kind::truncated, "parameter count does not match metadata");
    auto get = [&](Tensor& t) {
      for (auto& v : t.values()) v = r.f32();
    };
    detail::for_each_block(sym, get);
    detail::for_each_block(dia, get);
    b.symptom_net = Network::from_parts(std::move(sym_specs), std::move(sym));
    b.diagnosis_net = Network::from_parts(std::move(dia_specs), std::move(dia));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(Kind::not_a_checkpoint, std::string("bad checkpoint metadata: ") + e.what());
  }
  b.validate();
  return b;
}

/// Writes to a temporary sibling and renames it into place.
inline void save_checkpoint(const ModelBundle& bundle, const std::filesystem::path& path) {
  const auto bytes = serialize_checkpoint(bundle);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError(CheckpointError::Kind::io, "cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw CheckpointError(CheckpointError::Kind::io, "write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw CheckpointError(CheckpointError::Kind::io, "cannot rename to " + path.string() + ": " + ec.message());
}

inline std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(CheckpointError::Kind::io, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline ModelBundle load_checkpoint(const std::filesystem::path& path) {
  return deserialize_checkpoint(read_file_bytes(path));
}

/// Hex form of the checksum stored at the end of a checkpoint file.
inline std::string checkpoint_hash(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8) return {};
  detail::ByteReader r(bytes.subspan(bytes.size() - 8));
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << r.le<std::uint64_t>();
  return os.str();
}

}  // namespace nsc
