#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <zlib.h>

#include "roadblocks/model.hpp"

namespace roadblocks {

namespace {

constexpr char kMagic[4] = {'R', 'D', 'M', 'B'};

class Writer {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    bytes_.insert(bytes_.end(), b, b + n);
  }
  /// Appends `body` prefixed by its u64 length.
  void section(const Writer& body) {
    u64(body.bytes_.size());
    bytes_.insert(bytes_.end(), body.bytes_.begin(), body.bytes_.end());
  }
  std::vector<std::uint8_t>& bytes() { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_++]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_++]) << (8 * i);
    return v;
  }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::span<const std::uint8_t> take(std::size_t n) {
    need(n);
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  Reader section() {
    const std::uint64_t len = u64();
    return Reader(take(static_cast<std::size_t>(len)));
  }
  std::span<const std::uint8_t> rest() { return take(bytes_.size() - pos_); }
  bool done() const { return pos_ == bytes_.size(); }
  void expect_done(const char* what) const {
    if (!done()) throw ModelFormatError(std::string("model file: trailing bytes in ") + what);
  }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw ModelFormatError("model file: truncated");
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, bytes.data(), static_cast<uInt>(bytes.size()));
  return static_cast<std::uint32_t>(crc);
}

template <typename Matrix>
void write_matrix(Writer& w, const Matrix& m) {
  w.u64(static_cast<std::uint64_t>(m.rows()));
  w.u64(static_cast<std::uint64_t>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) w.f64(m(r, c));
  }
}

Eigen::MatrixXd read_matrix(Reader& r) {
  const std::uint64_t rows = r.u64();
  const std::uint64_t cols = r.u64();
  if (rows == 0 || cols == 0 || rows > (1u << 24) || cols > (1u << 24)) {
    throw ModelFormatError("model file: implausible matrix dimensions");
  }
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = r.f64();
  }
  return m;
}

}  // namespace

std::vector<std::uint8_t> serialize_model(const MlpModel& model) {
  Writer payload;

  Writer cfg;
  cfg.i32(model.block_config.class_size);
  cfg.i32(model.block_config.context_size);
  cfg.i32(model.block_config.radius);
  cfg.i32(model.block_config.ignore_top);
  payload.section(cfg);

  Writer tag;
  const std::string t = model.layout.tag();
  tag.raw(t.data(), t.size());
  payload.section(tag);

  Writer stdz;
  stdz.u64(static_cast<std::uint64_t>(model.standardization.mean.size()));
  for (Eigen::Index i = 0; i < model.standardization.mean.size(); ++i) stdz.f64(model.standardization.mean[i]);
  for (Eigen::Index i = 0; i < model.standardization.scale.size(); ++i) stdz.f64(model.standardization.scale[i]);
  payload.section(stdz);

  Writer wh;
  write_matrix(wh, model.hidden);
  payload.section(wh);

  Writer wo;
  write_matrix(wo, model.output);
  payload.section(wo);

  Writer file;
  file.raw(kMagic, 4);
  file.u32(kModelFormatVersion);
  file.raw(payload.bytes().data(), payload.bytes().size());
  file.u32(crc32_of(payload.bytes()));
  return std::move(file.bytes());
}

MlpModel deserialize_model(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12) throw ModelFormatError("model file: truncated");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw ModelFormatError("model file: bad magic");
  Reader head(bytes.subspan(4, 4));
  const std::uint32_t version = head.u32();
  if (version != kModelFormatVersion) {
    throw ModelVersionError("model file: unsupported format version " + std::to_string(version) + " (expected " +
                            std::to_string(kModelFormatVersion) + ")");
  }
  const auto payload = bytes.subspan(8, bytes.size() - 12);
  Reader trailer(bytes.subspan(bytes.size() - 4));
  if (trailer.u32() != crc32_of(payload)) throw ModelFormatError("model file: CRC mismatch (truncated or corrupt)");

  Reader r(payload);
  MlpModel m;
  {
    Reader s = r.section();
    m.block_config.class_size = s.i32();
    m.block_config.context_size = s.i32();
    m.block_config.radius = s.i32();
    m.block_config.ignore_top = s.i32();
    s.expect_done("block config");
    try {
      m.block_config.validate();
    } catch (const std::invalid_argument& e) {
      throw ModelFormatError(std::string("model file: ") + e.what());
    }
  }
  {
    Reader s = r.section();
    const auto b = s.rest();
    try {
      m.layout = FeatureLayout::from_tag(std::string(b.begin(), b.end()));
    } catch (const std::invalid_argument& e) {
      throw ModelFormatError(std::string("model file: ") + e.what());
    }
  }
  {
    Reader s = r.section();
    const std::uint64_t dim = s.u64();
    if (dim == 0 || dim > (1u << 24)) throw ModelFormatError("model file: implausible standardization size");
    m.standardization.mean.resize(static_cast<Eigen::Index>(dim));
    m.standardization.scale.resize(static_cast<Eigen::Index>(dim));
    for (Eigen::Index i = 0; i < m.standardization.mean.size(); ++i) m.standardization.mean[i] = s.f64();
    for (Eigen::Index i = 0; i < m.standardization.scale.size(); ++i) m.standardization.scale[i] = s.f64();
    s.expect_done("standardization");
  }
  {
    Reader s = r.section();
    m.hidden = read_matrix(s);
    s.expect_done("hidden weights");
  }
  {
    Reader s = r.section();
    const Eigen::MatrixXd o = read_matrix(s);
    s.expect_done("output weights");
    if (o.rows() != 1) throw ModelFormatError("model file: output weights must be a single row");
    m.output = o.row(0);
  }
  r.expect_done("payload");

  if (m.output.size() != m.hidden.rows() + 1 || m.standardization.mean.size() != m.input_dim()) {
    throw ModelFormatError("model file: inconsistent dimensions");
  }
  if ((m.standardization.scale.array() <= 0).any()) {
    throw ModelFormatError("model file: non-positive standardization scale");
  }
  return m;
}

void save_model(const MlpModel& model, const std::string& path) {
  const auto bytes = serialize_model(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("save_model: cannot open '" + path + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("save_model: write failed for '" + path + "'");
}

MlpModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_model: cannot open '" + path + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_model(bytes);
}

}  // namespace roadblocks
