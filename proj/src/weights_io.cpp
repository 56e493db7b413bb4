// Weight file layout (all little-endian):
//   "GSGN" | u32 version | u32 len + recipe id | u32 latent dim
//   u32 block count, per block: shape main input, u32 count + u32 skip sources, shape output
//   u32 param count, per param: shape
//   f64 payload for every param in order
//   u32 CRC32 of everything above
// where shape = u32 rank + u64 extents.

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "gs/generator.hpp"

namespace gs {

namespace {

static_assert(std::endian::native == std::endian::little, "weight files assume a little-endian host");

constexpr char kMagic[4] = {'G', 'S', 'G', 'N'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  template <typename T>
  void put(T v) {
    const auto* p = reinterpret_cast<const unsigned char*>(&v);
    bytes_.insert(bytes_.end(), p, p + sizeof(T));
  }
  void put_shape(const Shape& s) {
    put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    for (std::size_t e : s) put<std::uint64_t>(e);
  }
  void put_bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    bytes_.insert(bytes_.end(), p, p + n);
  }
  std::vector<unsigned char>& bytes() { return bytes_; }

 private:
  std::vector<unsigned char> bytes_;
};

class Reader {
 public:
  Reader(const unsigned char* data, std::size_t size) : data_(data), size_(size) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, data_ + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  Shape get_shape() {
    const auto rank = get<std::uint32_t>();
    if (rank > 8) throw FormatError("weight file: implausible tensor rank " + std::to_string(rank));
    Shape s(rank);
    for (auto& e : s) e = get<std::uint64_t>();
    return s;
  }
  void get_bytes(void* out, std::size_t n) {
    need(n);
    std::memcpy(out, data_ + pos_, n);
    pos_ += n;
  }
  std::size_t remaining() const { return size_ - pos_; }

 private:
  void need(std::size_t n) const {
    if (n > size_ - pos_) throw FormatError("weight file is truncated");
  }
  const unsigned char* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
};

std::uint32_t crc_of(const unsigned char* data, std::size_t n) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; chunk to be safe on large payloads.
  while (n > 0) {
    const uInt chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
    crc = crc32(crc, data, chunk);
    data += chunk;
    n -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

}  // namespace

void save_weights(const GeneratorNet& net, const std::filesystem::path& path) {
  Writer w;
  w.put_bytes(kMagic, sizeof(kMagic));
  w.put<std::uint32_t>(kVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(net.recipe().size()));
  w.put_bytes(net.recipe().data(), net.recipe().size());
  w.put<std::uint32_t>(static_cast<std::uint32_t>(net.latent_dim()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(net.depth()));
  for (const Block& b : net.blocks()) {
    w.put_shape(b.main_input);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(b.skip_sources.size()));
    for (std::size_t s : b.skip_sources) w.put<std::uint32_t>(static_cast<std::uint32_t>(s));
    w.put_shape(b.output);
  }
  w.put<std::uint32_t>(static_cast<std::uint32_t>(net.params().size()));
  for (const Tensor& t : net.params()) w.put_shape(t.shape());
  for (const Tensor& t : net.params()) w.put_bytes(t.ptr(), t.size() * sizeof(double));
  w.put<std::uint32_t>(crc_of(w.bytes().data(), w.bytes().size()));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(w.bytes().data()), static_cast<std::streamsize>(w.bytes().size()));
  if (!out) throw std::runtime_error("failed writing weights to '" + path.string() + "'");
}

GeneratorNet load_weights(const std::filesystem::path& path, std::optional<std::string_view> expected_recipe) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open weight file '" + path.string() + "'");
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  if (bytes.size() < sizeof(kMagic) + 2 * sizeof(std::uint32_t)) throw FormatError("weight file is truncated");
  if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) throw FormatError("not a weight file (bad magic)");
  const std::size_t body = bytes.size() - sizeof(std::uint32_t);
  std::uint32_t stored_crc;
  std::memcpy(&stored_crc, bytes.data() + body, sizeof(stored_crc));

  Reader r(bytes.data() + sizeof(kMagic), body - sizeof(kMagic));
  const auto version = r.get<std::uint32_t>();
  if (version != kVersion) {
    throw FormatError("unsupported weight file version " + std::to_string(version) + " (expected " +
                      std::to_string(kVersion) + ")");
  }
  if (crc_of(bytes.data(), body) != stored_crc) throw FormatError("weight file checksum mismatch (corrupted file)");

  const auto id_len = r.get<std::uint32_t>();
  if (id_len > 256) throw FormatError("weight file: implausible recipe id length");
  std::string recipe(id_len, '\0');
  r.get_bytes(recipe.data(), id_len);
  if (expected_recipe && recipe != *expected_recipe) {
    throw FormatError("weight file holds recipe '" + recipe + "' but '" + std::string(*expected_recipe) +
                      "' was expected");
  }

  GeneratorNet net = make_recipe(recipe, 0);
  auto mismatch = [&](const std::string& what) {
    return FormatError("weight file " + what + " does not match recipe '" + recipe + "'");
  };
  if (r.get<std::uint32_t>() != net.latent_dim()) throw mismatch("latent dimension");
  if (r.get<std::uint32_t>() != net.depth()) throw mismatch("block count");
  for (const Block& b : net.blocks()) {
    if (r.get_shape() != b.main_input) throw mismatch("block input shape");
    const auto skips = r.get<std::uint32_t>();
    if (skips != b.skip_sources.size()) throw mismatch("skip topology");
    for (std::size_t s : b.skip_sources) {
      if (r.get<std::uint32_t>() != s) throw mismatch("skip topology");
    }
    if (r.get_shape() != b.output) throw mismatch("block output shape");
  }
  if (r.get<std::uint32_t>() != net.params().size()) throw mismatch("parameter count");
  for (const Tensor& t : net.params()) {
    if (r.get_shape() != t.shape()) throw mismatch("parameter shape");
  }
  for (Tensor& t : net.params()) r.get_bytes(t.ptr(), t.size() * sizeof(double));
  if (r.remaining() != 0) throw FormatError("weight file has trailing bytes");
  for (const Tensor& t : net.params()) require_finite(t.data(), "weight file payload");
  return net;
}

}  // namespace gs
