#include "pointgnn/io.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>

#include "pointgnn/errors.hpp"
#include "pointgnn/nn.hpp"

namespace pgnn {

void write_file_atomic(const std::string& path, std::string_view contents) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write " + tmp);
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw FormatError("write failed: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

void write_file_atomic(const std::string& path, std::span<const std::uint8_t> contents) {
  write_file_atomic(path, std::string_view(reinterpret_cast<const char*>(contents.data()),
                                           contents.size()));
}

std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string read_file_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

namespace {

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
  const U bits = std::bit_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
    need(sizeof(T));
    U bits = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) bits |= static_cast<U>(bytes_[pos_ + i]) << (8 * i);
    pos_ += sizeof(T);
    return std::bit_cast<T>(bits);
  }

  std::string get_string(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) {
      throw FormatError("checkpoint: truncated at byte offset " + std::to_string(pos_));
    }
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(std::span<const NamedTensor> tensors) {
  std::vector<std::uint8_t> out(std::begin(kCheckpointMagic), std::end(kCheckpointMagic));
  put_le<std::uint32_t>(out, kCheckpointVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    std::uint64_t count = 1;
    for (auto d : t.dims) count *= d;
    if (count != t.data.size()) throw ArgumentError("checkpoint: dims do not match data for " + t.name);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.name.size()));
    out.insert(out.end(), t.name.begin(), t.name.end());
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.dims.size()));
    for (auto d : t.dims) put_le<std::uint64_t>(out, d);
    for (double v : t.data) put_le<double>(out, v);
  }
  return out;
}

std::vector<NamedTensor> decode_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < sizeof(kCheckpointMagic) ||
      std::memcmp(bytes.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0) {
    throw FormatError("checkpoint: bad magic");
  }
  Reader r(bytes.subspan(sizeof(kCheckpointMagic)));
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint: unsupported version " + std::to_string(version));
  }
  const auto count = r.get<std::uint32_t>();
  std::vector<NamedTensor> tensors;
  tensors.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor t;
    t.name = r.get_string(r.get<std::uint32_t>());
    const auto ndim = r.get<std::uint32_t>();
    std::uint64_t n = 1;
    for (std::uint32_t d = 0; d < ndim; ++d) {
      t.dims.push_back(r.get<std::uint64_t>());
      n *= t.dims.back();
    }
    if (n > bytes.size() / 8) throw FormatError("checkpoint: tensor " + t.name + " too large");
    t.data.resize(n);
    for (auto& v : t.data) v = r.get<double>();
    tensors.push_back(std::move(t));
  }
  if (!r.done()) throw FormatError("checkpoint: trailing bytes");
  return tensors;
}

}  // namespace pgnn
