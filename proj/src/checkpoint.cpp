// Copyright 2026 The svox Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "svox/checkpoint.hpp"

#include "svox/errors.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

namespace svox {

namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

class Writer {
 public:
  template <typename T>
  void put(T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out_.append(buf, sizeof(T));
  }
  void put_string(const std::string& s) {
    put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    out_ += s;
  }
  std::string& bytes() { return out_; }

 private:
  std::string out_;
};

class Reader {
 public:
  Reader(const std::string& bytes, std::size_t end) : bytes_(bytes), end_(end) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string get_string() {
    const auto n = get<std::uint32_t>();
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  void read_floats(float* dst, std::size_t count) {
    need(count * sizeof(float));
    std::memcpy(dst, bytes_.data() + pos_, count * sizeof(float));
    pos_ += count * sizeof(float);
  }
  bool done() const { return pos_ == end_; }

 private:
  void need(std::size_t n) const {
    if (n > end_ - pos_) throw FormatError("checkpoint truncated");
  }
  const std::string& bytes_;
  std::size_t end_;
  std::size_t pos_ = 0;
};

std::uint32_t crc32_of(const char* data, std::size_t n) {
  uLong crc = crc32(0L, Z_NULL, 0);
  while (n > 0) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
    crc = crc32(crc, reinterpret_cast<const Bytef*>(data), chunk);
    data += chunk;
    n -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

template <typename E>
E checked_enum(std::uint8_t v, int count, const char* what) {
  if (v >= count) throw FormatError(std::string("checkpoint has an invalid ") + what);
  return static_cast<E>(v);
}

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ck) {
  const ModelBundle<float>& m = ck.model;
  m.spec.validate();
  Writer w;
  w.bytes() = "SVOX";
  w.put<std::uint32_t>(kCheckpointVersion);
  for (const int v : {m.spec.kernel_count, m.spec.encoder_blocks,
                      m.spec.carrier_decoder_blocks, m.spec.message_decoder_blocks,
                      m.spec.discriminator_layers, m.spec.k})
    w.put<std::int32_t>(v);
  w.put<std::uint8_t>(m.spec.conditional);
  w.put<std::uint8_t>(m.spec.discriminator);
  for (const int v : {m.stft.fft_size, m.stft.hop, m.stft.window_length,
                      m.stft.sample_rate})
    w.put<std::int32_t>(v);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(m.stft.window));
  w.put<std::uint8_t>(static_cast<std::uint8_t>(m.stft.scale));
  w.put<std::uint64_t>(ck.config_digest);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(ck.regime));
  w.put<std::int64_t>(ck.iteration);
  w.put<std::uint64_t>(m.rng_seed);
  w.put<std::uint64_t>(ck.data_seed);

  const auto shapes = enumerate_parameters(m.spec);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(shapes.size()));
  for (const auto& shape : shapes) {
    const Matrix<float>& p = m.at(shape.path);
    if (p.rows() != shape.rows || p.cols() != shape.cols)
      throw InvalidInput("parameter " + shape.path + " has the wrong shape");
    w.put_string(shape.path);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(p.rows()));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(p.cols()));
    for (Index r = 0; r < p.rows(); ++r)
      for (Index c = 0; c < p.cols(); ++c) w.put<float>(p(r, c));
  }
  std::string& bytes = w.bytes();
  w.put<std::uint32_t>(crc32_of(bytes.data(), bytes.size()));
  return std::move(bytes);
}

Checkpoint parse_checkpoint(const std::string& bytes) {
  if (bytes.size() < 8 || bytes.compare(0, 4, "SVOX") != 0)
    throw FormatError("not an SVOX checkpoint");
  const std::size_t body = bytes.size() - sizeof(std::uint32_t);
  std::uint32_t stored;
  std::memcpy(&stored, bytes.data() + body, sizeof stored);
  if (stored != crc32_of(bytes.data(), body))
    throw ChecksumError("checkpoint checksum mismatch; the file is corrupted");

  Reader r(bytes, body);
  r.get<std::uint32_t>();  // magic, checked above
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion)
    throw FormatError("unsupported checkpoint version " + std::to_string(version));

  Checkpoint ck;
  ModelBundle<float>& m = ck.model;
  m.spec.kernel_count = r.get<std::int32_t>();
  m.spec.encoder_blocks = r.get<std::int32_t>();
  m.spec.carrier_decoder_blocks = r.get<std::int32_t>();
  m.spec.message_decoder_blocks = r.get<std::int32_t>();
  m.spec.discriminator_layers = r.get<std::int32_t>();
  m.spec.k = r.get<std::int32_t>();
  m.spec.conditional = r.get<std::uint8_t>() != 0;
  m.spec.discriminator = r.get<std::uint8_t>() != 0;
  try {
    m.spec.validate();
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint architecture invalid: ") + e.what());
  }
  m.stft.fft_size = r.get<std::int32_t>();
  m.stft.hop = r.get<std::int32_t>();
  m.stft.window_length = r.get<std::int32_t>();
  m.stft.sample_rate = r.get<std::int32_t>();
  m.stft.window = checked_enum<WindowKind>(r.get<std::uint8_t>(), 3, "window");
  m.stft.scale = checked_enum<MagnitudeScale>(r.get<std::uint8_t>(), 2, "magnitude scale");
  try {
    m.stft.validate();
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint STFT config invalid: ") + e.what());
  }
  ck.config_digest = r.get<std::uint64_t>();
  ck.regime = checked_enum<Regime>(r.get<std::uint8_t>(), 4, "regime");
  ck.iteration = r.get<std::int64_t>();
  m.rng_seed = r.get<std::uint64_t>();
  ck.data_seed = r.get<std::uint64_t>();

  std::map<std::string, ParameterShape> expected;
  for (auto& s : enumerate_parameters(m.spec)) expected.emplace(s.path, s);
  const auto count = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string path = r.get_string();
    const auto rows = r.get<std::uint32_t>();
    const auto cols = r.get<std::uint32_t>();
    const auto it = expected.find(path);
    if (it == expected.end())
      throw FormatError("checkpoint has unexpected parameter '" + path + "'");
    if (m.parameters.count(path))
      throw FormatError("checkpoint repeats parameter '" + path + "'");
    if (rows != it->second.rows || cols != it->second.cols)
      throw FormatError("checkpoint parameter '" + path + "' has the wrong shape");
    RowMajorMatrix<float> p(rows, cols);
    r.read_floats(p.data(), static_cast<std::size_t>(rows) * cols);
    m.parameters.emplace(path, p);
  }
  if (m.parameters.size() != expected.size())
    throw FormatError("checkpoint is missing parameters");
  if (!r.done()) throw FormatError("checkpoint has trailing bytes");
  return ck;
}

void save_checkpoint(const Checkpoint& checkpoint,
                     const std::filesystem::path& path) {
  const std::string bytes = serialize_checkpoint(checkpoint);
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw InvalidInput("cannot write '" + path.string() + "'");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw InvalidInput("failed writing '" + path.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot read checkpoint '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_checkpoint(ss.str());
}

}  // namespace svox
