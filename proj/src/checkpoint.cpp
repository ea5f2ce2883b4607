#include "bimotion/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>

namespace bimotion {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format is little-endian");

namespace {

constexpr char kMagic[4] = {'B', 'M', 'R', 'D'};
constexpr uint32_t kVersion = 1;

uint64_t fnv1a(const std::string& bytes) {
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

void put_str(std::string& out, const std::string& s) {
  put<uint32_t>(out, static_cast<uint32_t>(s.size()));
  out.append(s);
}

struct Reader {
  const std::string& data;
  size_t pos = 0;

  template <typename T>
  T get() {
    require(pos + sizeof(T) <= data.size(), errc::validation, "checkpoint: truncated file");
    T v;
    std::memcpy(&v, data.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
  }

  std::string get_str() {
    uint32_t n = get<uint32_t>();
    require(pos + n <= data.size(), errc::validation, "checkpoint: truncated string");
    std::string s = data.substr(pos, n);
    pos += n;
    return s;
  }
};

}  // namespace

void save_checkpoint(const std::string& path, const std::string& component,
                     uint64_t config_hash, const std::string& meta_json,
                     const ParamStore& params) {
  std::string payload;
  put<uint32_t>(payload, static_cast<uint32_t>(params.items.size()));
  for (const auto& [name, m] : params.items) {
    put_str(payload, name);
    put<uint8_t>(payload, 0);  // dtype: float64
    put<uint32_t>(payload, static_cast<uint32_t>(m.rows));
    put<uint32_t>(payload, static_cast<uint32_t>(m.cols));
    payload.append(reinterpret_cast<const char*>(m.d.data()), m.d.size() * sizeof(double));
  }

  std::string out;
  out.append(kMagic, 4);
  put<uint32_t>(out, kVersion);
  put_str(out, component);
  put<uint64_t>(out, config_hash);
  put_str(out, meta_json);
  put<uint64_t>(out, fnv1a(payload));
  out.append(payload);

  std::filesystem::path tmp = path + ".partial";
  {
    std::ofstream f(tmp, std::ios::binary);
    require(f.good(), errc::runtime, "checkpoint: cannot write " + tmp.string());
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    require(f.good(), errc::runtime, "checkpoint: write failure on " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

LoadedCheckpoint load_checkpoint(const std::string& path, const std::string& expect_component) {
  std::ifstream f(path, std::ios::binary);
  require(f.good(), errc::validation, "checkpoint: cannot open " + path);
  std::string data((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

  require(data.size() > 8 && std::memcmp(data.data(), kMagic, 4) == 0, errc::validation,
          "checkpoint: bad magic in " + path);
  Reader r{data, 4};
  uint32_t version = r.get<uint32_t>();
  require(version == kVersion, errc::validation,
          "checkpoint: unsupported format version " + std::to_string(version));

  LoadedCheckpoint out;
  out.component = r.get_str();
  if (!expect_component.empty())
    require(out.component == expect_component, errc::validation,
            "checkpoint: component tag mismatch: expected " + expect_component + ", found " +
                out.component + " in " + path);
  out.config_hash = r.get<uint64_t>();
  out.meta_json = r.get_str();
  out.model_hash = r.get<uint64_t>();

  std::string payload = data.substr(r.pos);
  require(fnv1a(payload) == out.model_hash, errc::validation,
          "checkpoint: payload hash mismatch in " + path);

  uint32_t count = r.get<uint32_t>();
  for (uint32_t i = 0; i < count; ++i) {
    std::string name = r.get_str();
    uint8_t dtype = r.get<uint8_t>();
    require(dtype == 0, errc::validation, "checkpoint: unsupported dtype");
    uint32_t rows = r.get<uint32_t>();
    uint32_t cols = r.get<uint32_t>();
    size_t n = static_cast<size_t>(rows) * cols;
    require(r.pos + n * sizeof(double) <= data.size(), errc::validation,
            "checkpoint: truncated array " + name);
    Mat m(static_cast<int>(rows), static_cast<int>(cols));
    std::memcpy(m.d.data(), data.data() + r.pos, n * sizeof(double));
    r.pos += n * sizeof(double);
    out.params.add(name, std::move(m));
  }
  return out;
}

}  // namespace bimotion
