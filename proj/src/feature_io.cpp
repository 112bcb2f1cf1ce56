#include <fstream>
#include <iterator>
#include <limits>

#include "clothsr/binary.hpp"
#include "clothsr/error.hpp"
#include "clothsr/tsacap.hpp"

namespace clothsr {

namespace binary {

void Reader::expect_magic(std::string_view m) {
  if (remaining() < m.size() || std::memcmp(bytes_.data() + pos_, m.data(), m.size()) != 0) {
    throw FormatError("bad magic, expected '" + std::string(m) + "'");
  }
  pos_ += m.size();
}

std::uint64_t Reader::get(int n) {
  if (remaining() < static_cast<std::size_t>(n)) throw FormatError("unexpected end of data");
  std::uint64_t v = 0;
  for (int k = 0; k < n; ++k) v |= static_cast<std::uint64_t>(bytes_[pos_ + k]) << (8 * k);
  pos_ += static_cast<std::size_t>(n);
  return v;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed writing " + path.string());
}

}  // namespace binary

namespace tsacap {

namespace {
constexpr std::string_view kMagic = "TSACAP01";
}

std::vector<std::uint8_t> serialize_features(const FeatureSequence& seq) {
  seq.validate();
  if (seq.frame_count() > std::numeric_limits<std::uint32_t>::max() ||
      seq.vertex_count() > std::numeric_limits<std::uint32_t>::max()) {
    throw ShapeError("feature sequence too large for the TSACAP01 header");
  }
  binary::Writer w;
  w.magic(kMagic);
  w.u32(static_cast<std::uint32_t>(seq.frame_count()));
  w.u32(static_cast<std::uint32_t>(seq.vertex_count()));
  for (const auto& frame : seq.frames) {
    for (Eigen::Index i = 0; i < frame.rows(); ++i) {
      for (int k = 0; k < kFeatureDim; ++k) w.f64(frame(i, k));
    }
  }
  return w.take();
}

FeatureSequence deserialize_features(std::span<const std::uint8_t> bytes) {
  binary::Reader r(bytes);
  r.expect_magic(kMagic);
  const std::uint32_t frames = r.u32();
  const std::uint32_t vertices = r.u32();
  if (r.remaining() != static_cast<std::size_t>(frames) * vertices * kFeatureDim * 8) {
    throw FormatError("TSACAP01 payload size does not match header");
  }
  FeatureSequence seq;
  seq.frames.reserve(frames);
  for (std::uint32_t t = 0; t < frames; ++t) {
    FeatureFrame frame(vertices, kFeatureDim);
    for (std::uint32_t i = 0; i < vertices; ++i) {
      for (int k = 0; k < kFeatureDim; ++k) frame(i, k) = r.f64();
    }
    seq.frames.push_back(std::move(frame));
  }
  return seq;
}

void write_features(const std::filesystem::path& path, const FeatureSequence& seq) {
  binary::write_file(path, serialize_features(seq));
}

FeatureSequence read_features(const std::filesystem::path& path) {
  return deserialize_features(binary::read_file(path));
}

}  // namespace tsacap
}  // namespace clothsr
