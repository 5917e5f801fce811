#include "lvsr/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

#include "lvsr/errors.hpp"

namespace lvsr {

namespace {

constexpr char kMagic[8] = {'L', 'W', 'V', 'S', 'R', '0', '0', '1'};

template <typename U>
void put(std::vector<char>& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

class Reader {
 public:
  explicit Reader(const std::vector<char>& b) : bytes_(b) {}

  template <typename U>
  U get() {
    need(sizeof(U));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      v |= static_cast<U>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(U);
    return v;
  }

  std::string str(std::size_t n) {
    need(n);
    std::string s(bytes_.data() + pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw IoError("checkpoint truncated at byte " + std::to_string(pos_));
  }
  const std::vector<char>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<char> encode_checkpoint(const std::vector<CheckpointEntry>& entries) {
  std::vector<char> out(std::begin(kMagic), std::end(kMagic));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(entries.size()));
  for (const auto& e : entries) {
    if (e.name.size() > std::numeric_limits<std::uint16_t>::max()) throw IoError("tensor name too long: " + e.name);
    if (e.shape.size() > std::numeric_limits<std::uint8_t>::max()) throw IoError("tensor rank too large: " + e.name);
    if (numel(e.shape) != e.data.size()) throw ShapeError("checkpoint entry " + e.name + " has inconsistent size");
    put<std::uint16_t>(out, static_cast<std::uint16_t>(e.name.size()));
    out.insert(out.end(), e.name.begin(), e.name.end());
    put<std::uint8_t>(out, static_cast<std::uint8_t>(e.shape.size()));
    for (auto d : e.shape) put<std::uint32_t>(out, static_cast<std::uint32_t>(d));
    for (float v : e.data) put<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

std::vector<CheckpointEntry> decode_checkpoint(const std::vector<char>& bytes) {
  if (bytes.size() < sizeof(kMagic) || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw IoError("not a checkpoint (bad magic)");
  }
  Reader r(bytes);
  r.str(sizeof(kMagic));
  const auto count = r.get<std::uint32_t>();
  std::vector<CheckpointEntry> entries;
  entries.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    CheckpointEntry e;
    e.name = r.str(r.get<std::uint16_t>());
    const auto rank = r.get<std::uint8_t>();
    for (std::uint8_t a = 0; a < rank; ++a) e.shape.push_back(r.get<std::uint32_t>());
    e.data.resize(numel(e.shape));
    for (auto& v : e.data) v = std::bit_cast<float>(r.get<std::uint32_t>());
    entries.push_back(std::move(e));
  }
  if (!r.done()) throw IoError("trailing bytes after checkpoint payload");
  return entries;
}

void write_checkpoint(const std::filesystem::path& path, const std::vector<CheckpointEntry>& entries) {
  const auto bytes = encode_checkpoint(entries);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("write failed: " + path.string());
}

std::vector<CheckpointEntry> read_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open checkpoint " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const ParameterRegistry<T>& registry) {
  std::vector<CheckpointEntry> entries;
  for (const auto& e : registry.entries()) {
    auto v = e.tensor.data();
    entries.push_back({e.name, e.tensor.shape(), std::vector<float>(v.begin(), v.end())});
  }
  write_checkpoint(path, entries);
}

template <typename T>
void load_checkpoint(const std::filesystem::path& path, ParameterRegistry<T>& registry) {
  const auto entries = read_checkpoint(path);
  const auto& slots = registry.entries();
  const std::size_t common = std::min(entries.size(), slots.size());
  for (std::size_t i = 0; i < common; ++i) {
    if (entries[i].name != slots[i].name || entries[i].shape != slots[i].tensor.shape()) {
      throw ShapeError("checkpoint tensor #" + std::to_string(i) + " '" + entries[i].name + "' " +
                       to_string(entries[i].shape) + " does not match model tensor '" + slots[i].name + "' " +
                       to_string(slots[i].tensor.shape()));
    }
  }
  if (entries.size() != slots.size()) {
    const std::string first = entries.size() > slots.size() ? entries[common].name : slots[common].name;
    throw ShapeError("checkpoint holds " + std::to_string(entries.size()) + " tensors, model has " +
                     std::to_string(slots.size()) + "; first unmatched: " + first);
  }
  for (std::size_t i = 0; i < common; ++i) {
    auto t = slots[i].tensor;
    auto dst = t.mutable_data();
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] = static_cast<T>(entries[i].data[j]);
  }
}

template void save_checkpoint(const std::filesystem::path&, const ParameterRegistry<float>&);
template void save_checkpoint(const std::filesystem::path&, const ParameterRegistry<double>&);
template void load_checkpoint(const std::filesystem::path&, ParameterRegistry<float>&);
template void load_checkpoint(const std::filesystem::path&, ParameterRegistry<double>&);

}  // namespace lvsr
