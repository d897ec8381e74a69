#include "smad/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace smad {

static_assert(std::endian::native == std::endian::little, "checkpoint io assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'S', 'M', 'A', 'D', 'C', 'K', 'P', 'T'};

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    T v;
    std::memcpy(&v, take(sizeof(T)).data(), sizeof(T));
    return v;
  }

  std::string_view take(std::size_t n) {
    if (n > bytes_.size() - pos_) throw IntegrityError("checkpoint truncated");
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  std::string out(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kCheckpointVersion);
  const std::string header = nlohmann::json{{"model", to_json(ckpt.config)}, {"meta", ckpt.meta}}.dump();
  put<std::uint64_t>(out, header.size());
  out += header;
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.params.size()));
  for (const auto& t : ckpt.params.tensors()) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.name.size()));
    out += t.name;
    put<std::uint8_t>(out, 0);
    put<std::uint64_t>(out, static_cast<std::uint64_t>(t.value.rows()));
    put<std::uint64_t>(out, static_cast<std::uint64_t>(t.value.cols()));
    out.append(reinterpret_cast<const char*>(t.value.data()), sizeof(float) * static_cast<std::size_t>(t.value.size()));
  }
  return out;
}

Checkpoint parse_checkpoint(std::string_view bytes) {
  Reader r(bytes);
  if (r.take(sizeof(kMagic)) != std::string_view(kMagic, sizeof(kMagic))) throw IntegrityError("not a checkpoint");
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion)
    throw IntegrityError("unsupported checkpoint version " + std::to_string(version));
  Checkpoint ckpt;
  const auto header_len = r.get<std::uint64_t>();
  try {
    const auto header = nlohmann::json::parse(r.take(header_len));
    ckpt.config = model_config_from_json(header.at("model"));
    ckpt.meta = header.at("meta");
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError(std::string("bad checkpoint header: ") + e.what());
  }
  const auto count = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = r.get<std::uint32_t>();
    std::string name(r.take(name_len));
    if (r.get<std::uint8_t>() != 0) throw IntegrityError("unsupported tensor dtype in " + name);
    const auto rows = r.get<std::uint64_t>();
    const auto cols = r.get<std::uint64_t>();
    if (cols != 0 && rows > (bytes.size() / sizeof(float)) / cols) throw IntegrityError("tensor " + name + " too large");
    const int k = ckpt.params.add(std::move(name), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    const auto payload = r.take(sizeof(float) * rows * cols);
    std::memcpy(ckpt.params[k].data(), payload.data(), payload.size());
  }
  if (!r.done()) throw IntegrityError("trailing bytes after checkpoint tensors");
  return ckpt;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << serialize_checkpoint(ckpt);
  if (!out) throw IoError("failed writing " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_checkpoint(ss.str());
}

}  // namespace smad
