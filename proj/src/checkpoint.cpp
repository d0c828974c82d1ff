#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "lada/error.hpp"
#include "lada/lada_net.hpp"

namespace lada {

namespace {

constexpr std::array<char, 8> kMagic{'L', 'A', 'D', 'A', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const char*>(data);
    buf_.append(p, n);
  }
  template <typename T>
  void le(T value) {
    auto bits = static_cast<std::uint64_t>(value);
    for (std::size_t i = 0; i < sizeof(T); ++i) buf_.push_back(static_cast<char>((bits >> (8 * i)) & 0xffu));
  }
  void f64_array(const double* data, std::size_t n) {
    le<std::uint64_t>(n);
    for (std::size_t i = 0; i < n; ++i) le<std::uint64_t>(std::bit_cast<std::uint64_t>(data[i]));
  }
  const std::string& str() const { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  explicit Reader(std::string data) : data_(std::move(data)) {}
  void bytes(void* out, std::size_t n) {
    need(n);
    std::memcpy(out, data_.data() + pos_, n);
    pos_ += n;
  }
  template <typename T>
  T le() {
    need(sizeof(T));
    std::uint64_t bits = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(T);
    return static_cast<T>(bits);
  }
  void f64_array(double* out, std::size_t expected) {
    const auto n = le<std::uint64_t>();
    if (n != expected) throw Error(ErrorKind::Parse, "checkpoint: array length mismatch");
    for (std::size_t i = 0; i < n; ++i) out[i] = std::bit_cast<double>(le<std::uint64_t>());
  }
  bool done() const { return pos_ == data_.size(); }
  std::size_t remaining() const { return data_.size() - pos_; }
  /// Reads a count and rejects it unless that many items of at least
  /// `min_item_bytes` each could still fit in the file.
  std::size_t count(std::size_t min_item_bytes) {
    const auto n = le<std::uint64_t>();
    if (n > (data_.size() - pos_) / min_item_bytes) throw Error(ErrorKind::Parse, "checkpoint: implausible count");
    return static_cast<std::size_t>(n);
  }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > data_.size()) throw Error(ErrorKind::Parse, "checkpoint: truncated file");
  }
  std::string data_;
  std::size_t pos_ = 0;
};

struct NamedNet {
  const char* name;
  Mlp LadaModel::*member;
};

constexpr std::array<NamedNet, 6> kNets{{
    {"source_encoder", &LadaModel::source_encoder},
    {"target_encoder", &LadaModel::target_encoder},
    {"classifier", &LadaModel::classifier},
    {"generator", &LadaModel::generator},
    {"discriminator", &LadaModel::discriminator},
    {"auxiliary", &LadaModel::auxiliary},
}};

}  // namespace

void save_checkpoint(const LadaModel& model, const std::filesystem::path& path) {
  Writer w;
  w.bytes(kMagic.data(), kMagic.size());
  w.le<std::uint32_t>(kVersion);
  w.le<std::uint64_t>(model.dims.feature_dim);
  w.le<std::uint64_t>(model.dims.encoding_dim);
  w.le<std::uint64_t>(model.dims.num_classes);
  w.le<std::uint64_t>(model.dims.generator_hidden.size());
  for (std::size_t h : model.dims.generator_hidden) w.le<std::uint64_t>(h);
  w.le<std::uint32_t>(kNets.size());
  for (const NamedNet& net : kNets) {
    const std::string name = net.name;
    w.le<std::uint32_t>(static_cast<std::uint32_t>(name.size()));
    w.bytes(name.data(), name.size());
    const Mlp& mlp = model.*(net.member);
    w.le<std::uint32_t>(static_cast<std::uint32_t>(mlp.num_layers()));
    for (const Layer& layer : mlp.layers()) {
      w.le<std::uint8_t>(static_cast<std::uint8_t>(layer.activation));
      w.le<std::uint8_t>(layer.dropout ? 1 : 0);
      w.le<std::uint64_t>(static_cast<std::uint64_t>(layer.weight.rows()));
      w.le<std::uint64_t>(static_cast<std::uint64_t>(layer.weight.cols()));
      w.f64_array(layer.weight.data(), static_cast<std::size_t>(layer.weight.size()));
      w.f64_array(layer.bias.data(), static_cast<std::size_t>(layer.bias.size()));
    }
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write checkpoint " + path.string());
  out.write(w.str().data(), static_cast<std::streamsize>(w.str().size()));
  if (!out) throw Error(ErrorKind::Io, "checkpoint write failed: " + path.string());
}

LadaModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open checkpoint " + path.string());
  Reader r(std::string(std::istreambuf_iterator<char>(in), {}));

  std::array<char, 8> magic{};
  r.bytes(magic.data(), magic.size());
  if (magic != kMagic) throw Error(ErrorKind::Parse, "checkpoint: bad magic");
  if (const auto version = r.le<std::uint32_t>(); version != kVersion) {
    throw Error(ErrorKind::Parse, "checkpoint: unsupported version " + std::to_string(version));
  }
  LadaModel model;
  model.dims.feature_dim = r.le<std::uint64_t>();
  model.dims.encoding_dim = r.le<std::uint64_t>();
  model.dims.num_classes = r.le<std::uint64_t>();
  model.dims.generator_hidden.resize(r.count(8));
  for (std::size_t& h : model.dims.generator_hidden) h = r.le<std::uint64_t>();
  model.dims.validate();

  if (r.le<std::uint32_t>() != kNets.size()) throw Error(ErrorKind::Parse, "checkpoint: unexpected network count");
  for (const NamedNet& net : kNets) {
    const auto name_size = r.le<std::uint32_t>();
    if (name_size > 64) throw Error(ErrorKind::Parse, "checkpoint: bad network name");
    std::string name(name_size, '\0');
    r.bytes(name.data(), name.size());
    if (name != net.name) throw Error(ErrorKind::Parse, "checkpoint: expected network " + std::string(net.name));
    const auto num_layers = r.le<std::uint32_t>();
    if (num_layers == 0 || num_layers > 64) throw Error(ErrorKind::Parse, "checkpoint: bad layer count");
    std::vector<Layer> layers(num_layers);
    for (Layer& layer : layers) {
      const auto act = r.le<std::uint8_t>();
      if (act > 2) throw Error(ErrorKind::Parse, "checkpoint: bad activation tag");
      layer.activation = static_cast<Activation>(act);
      layer.dropout = r.le<std::uint8_t>() != 0;
      const auto rows = static_cast<Eigen::Index>(r.count(8));
      const auto cols = static_cast<Eigen::Index>(r.count(8));
      if (static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols) > r.remaining() / 8) {
        throw Error(ErrorKind::Parse, "checkpoint: truncated file");
      }
      layer.weight.resize(rows, cols);
      r.f64_array(layer.weight.data(), static_cast<std::size_t>(rows * cols));
      layer.bias.resize(rows);
      r.f64_array(layer.bias.data(), static_cast<std::size_t>(rows));
    }
    model.*(net.member) = Mlp(std::move(layers));
  }
  if (!r.done()) throw Error(ErrorKind::Parse, "checkpoint: trailing bytes");
  return model;
}

}  // namespace lada
