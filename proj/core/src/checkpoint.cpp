#include "ecac/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "ecac/errors.hpp"

namespace ecac {

static_assert(std::endian::native == std::endian::little, "checkpoint encoding assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'E', 'C', 'A', 'C', 'C', 'K', 'P', 'T'};

template <typename T>
void put(std::string& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  std::string get_string(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  void get_doubles(double* dst, std::size_t n) {
    if (n > (bytes_.size() - pos_) / sizeof(double)) throw IoError("truncated checkpoint");
    std::memcpy(dst, bytes_.data() + pos_, n * sizeof(double));
    pos_ += n * sizeof(double);
  }

  bool done() const { return pos_ == bytes_.size(); }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (n > bytes_.size() - pos_) throw IoError("truncated checkpoint");
  }

  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

const Array& Checkpoint::tensor(const std::string& name) const {
  auto it = tensors.find(name);
  if (it == tensors.end()) throw IoError("checkpoint has no tensor '" + name + "'");
  return it->second;
}

const std::string& Checkpoint::meta_value(const std::string& key) const {
  auto it = meta.find(key);
  if (it == meta.end()) throw IoError("checkpoint has no metadata '" + key + "'");
  return it->second;
}

std::string encode_checkpoint(const Checkpoint& ckpt) {
  std::string out(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, Checkpoint::kVersion);
  put<std::uint64_t>(out, ckpt.tensors.size());
  for (const auto& [name, a] : ckpt.tensors) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put<std::uint32_t>(out, static_cast<std::uint32_t>(a.rank()));
    for (auto d : a.shape()) put<std::uint64_t>(out, d);
    out.append(reinterpret_cast<const char*>(a.data()), a.size() * sizeof(double));
  }
  put<std::uint64_t>(out, ckpt.meta.size());
  for (const auto& [key, value] : ckpt.meta) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(key.size()));
    out += key;
    put<std::uint64_t>(out, value.size());
    out += value;
  }
  return out;
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  Reader in(bytes);
  if (in.get_string(sizeof(kMagic)) != std::string(kMagic, sizeof(kMagic))) {
    throw IoError("not a checkpoint file (bad magic)");
  }
  const auto version = in.get<std::uint32_t>();
  if (version != Checkpoint::kVersion) {
    throw CheckpointVersionError("incompatible checkpoint version " + std::to_string(version) + " (expected " +
                                 std::to_string(Checkpoint::kVersion) + ")");
  }
  Checkpoint ckpt;
  const auto n_tensors = in.get<std::uint64_t>();
  for (std::uint64_t t = 0; t < n_tensors; ++t) {
    const auto name = in.get_string(in.get<std::uint32_t>());
    const auto rank = in.get<std::uint32_t>();
    Shape shape;
    for (std::uint32_t r = 0; r < rank; ++r) shape.push_back(in.get<std::uint64_t>());
    for (auto d : shape) {
      if (d == 0 || d > in.remaining()) throw IoError("corrupt shape for tensor '" + name + "'");
    }
    const auto count = shape_size(shape);
    if (count > in.remaining() / sizeof(double)) throw IoError("truncated checkpoint");
    std::vector<double> values(count);
    in.get_doubles(values.data(), values.size());
    ckpt.tensors.emplace(name, Array(std::move(shape), std::move(values)));
  }
  const auto n_meta = in.get<std::uint64_t>();
  for (std::uint64_t m = 0; m < n_meta; ++m) {
    auto key = in.get_string(in.get<std::uint32_t>());
    auto value = in.get_string(in.get<std::uint64_t>());
    ckpt.meta.emplace(std::move(key), std::move(value));
  }
  if (!in.done()) throw IoError("trailing bytes after checkpoint");
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint " + tmp.string());
    const auto bytes = encode_checkpoint(ckpt);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("failed writing checkpoint " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move checkpoint into place: " + ec.message());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return decode_checkpoint(buf.str());
}

}  // namespace ecac
