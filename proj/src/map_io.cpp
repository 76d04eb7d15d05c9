#include "n3map/map_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "n3map/errors.hpp"

namespace n3map {
namespace {

static_assert(std::endian::native == std::endian::little, "map I/O assumes a little-endian host");

constexpr char kMagic[6] = {'N', '3', 'M', 'A', 'P', '\0'};

class Writer {
 public:
  template <typename T>
  void put(T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    bytes_.append(buf, sizeof(T));
  }
  void raw(const void* p, size_t n) { bytes_.append(static_cast<const char*>(p), n); }
  void section(const char tag[4], const Writer& payload) {
    raw(tag, 4);
    put<uint64_t>(payload.bytes_.size());
    bytes_ += payload.bytes_;
  }
  [[nodiscard]] const std::string& bytes() const { return bytes_; }

 private:
  std::string bytes_;
};

class Reader {
 public:
  Reader(const char* data, size_t size) : data_(data), size_(size) {}
  template <typename T>
  T get() {
    T v;
    std::memcpy(&v, take(sizeof(T)), sizeof(T));
    return v;
  }
  const char* take(size_t n) {
    if (n > size_ - pos_) throw FormatError("map: truncated file");
    const char* p = data_ + pos_;
    pos_ += n;
    return p;
  }
  [[nodiscard]] bool done() const { return pos_ == size_; }

 private:
  const char* data_;
  size_t size_;
  size_t pos_ = 0;
};

}  // namespace

void save_map(const std::filesystem::path& path, const ImplicitMap& map, const std::string& provenance) {
  Writer out;
  out.raw(kMagic, sizeof(kMagic));
  out.put<uint8_t>(kMapFormatVersion);

  const MapConfig& cfg = map.config();
  Writer conf;
  conf.put<double>(cfg.leaf_size);
  conf.put<uint32_t>(static_cast<uint32_t>(cfg.levels));
  conf.put<uint32_t>(kFeatureDim);
  conf.put<uint32_t>(kHiddenWidth);
  conf.put<double>(cfg.fd_step);
  conf.put<uint8_t>(map.decoder().frozen() ? 1 : 0);
  out.section("CONF", conf);

  Writer prov;
  prov.raw(provenance.data(), provenance.size());
  out.section("PROV", prov);

  const FeatureGrid& grid = map.grid();
  Writer leaf;
  leaf.put<uint64_t>(grid.leaves().size());
  for (const Vec3i& l : grid.leaves())
    for (int a = 0; a < 3; ++a) leaf.put<int32_t>(static_cast<int32_t>(l[a]));
  out.section("LEAF", leaf);

  Writer vert;
  vert.put<uint64_t>(grid.feature_count());
  for (size_t i = 0; i < grid.feature_count(); ++i) {
    vert.put<uint64_t>(grid.vertex_keys()[i].code);
    vert.put<uint8_t>(grid.vertex_keys()[i].level);
    vert.raw(grid.features()[i].data(), sizeof(double) * kFeatureDim);
  }
  out.section("VERT", vert);

  Writer mlp;
  const auto& params = map.decoder().params();
  mlp.put<uint64_t>(static_cast<uint64_t>(params.size()));
  mlp.raw(params.data(), sizeof(double) * static_cast<size_t>(params.size()));
  out.section("MLPW", mlp);

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError("map: cannot write " + path.string());
  os.write(out.bytes().data(), static_cast<std::streamsize>(out.bytes().size()));
  if (!os) throw FormatError("map: write failed for " + path.string());
}

ImplicitMap load_map(const std::filesystem::path& path, std::string* provenance) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("map: cannot open " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Reader r(bytes.data(), bytes.size());
  if (std::memcmp(r.take(sizeof(kMagic)), kMagic, sizeof(kMagic)) != 0) throw FormatError("map: bad magic");
  const auto version = r.get<uint8_t>();
  if (version != kMapFormatVersion)
    throw FormatError("map: unsupported version " + std::to_string(version));

  std::optional<MapConfig> cfg;
  bool frozen = false;
  std::vector<Vec3i> leaves;
  std::vector<MortonKey> keys;
  std::vector<Feature> features;
  std::optional<Eigen::VectorXd> params;
  bool have_leaf = false, have_vert = false;

  while (!r.done()) {
    std::string tag(r.take(4), 4);
    const auto len = r.get<uint64_t>();
    Reader s(r.take(len), len);
    if (tag == "CONF") {
      MapConfig c;
      c.leaf_size = s.get<double>();
      c.levels = static_cast<int>(s.get<uint32_t>());
      const auto feat = s.get<uint32_t>();
      const auto hidden = s.get<uint32_t>();
      c.fd_step = s.get<double>();
      frozen = s.get<uint8_t>() != 0;
      if (feat != kFeatureDim || hidden != kHiddenWidth)
        throw FormatError("map: feature/hidden width mismatch with this build");
      if (!(c.leaf_size > 0) || c.levels < 1 || c.levels > kMaxLevels) throw FormatError("map: bad config section");
      cfg = c;
    } else if (tag == "PROV") {
      if (provenance) provenance->assign(s.take(len), len);
    } else if (tag == "LEAF") {
      const auto n = s.get<uint64_t>();
      if (n > len / 12) throw FormatError("map: truncated leaf section");
      leaves.reserve(n);
      for (uint64_t i = 0; i < n; ++i) {
        const auto x = s.get<int32_t>();
        const auto y = s.get<int32_t>();
        const auto z = s.get<int32_t>();
        leaves.emplace_back(x, y, z);
      }
      have_leaf = true;
    } else if (tag == "VERT") {
      const auto n = s.get<uint64_t>();
      if (n > len / (9 + 8 * kFeatureDim)) throw FormatError("map: truncated vertex section");
      keys.reserve(n);
      features.reserve(n);
      for (uint64_t i = 0; i < n; ++i) {
        MortonKey k;
        k.code = s.get<uint64_t>();
        k.level = s.get<uint8_t>();
        Feature f;
        std::memcpy(f.data(), s.take(sizeof(double) * kFeatureDim), sizeof(double) * kFeatureDim);
        keys.push_back(k);
        features.push_back(f);
      }
      have_vert = true;
    } else if (tag == "MLPW") {
      const auto n = s.get<uint64_t>();
      if (n != static_cast<uint64_t>(MlpDecoder::kParamCount)) throw FormatError("map: decoder size mismatch");
      Eigen::VectorXd p(static_cast<Eigen::Index>(n));
      std::memcpy(p.data(), s.take(sizeof(double) * n), sizeof(double) * n);
      params = std::move(p);
    }
    // unknown sections are skipped
  }
  if (!cfg || !have_leaf || !have_vert || !params) throw FormatError("map: missing required section");

  ImplicitMap map(*cfg, 0);
  map.grid().restore(std::move(keys), std::move(features), leaves);
  map.decoder().params() = *params;
  map.decoder().set_frozen(frozen);
  return map;
}

}  // namespace n3map
