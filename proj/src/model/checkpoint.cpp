#include "nrg/model/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <fstream>
#include <sstream>
#include <system_error>

#include "nrg/error.hpp"

namespace nrg::model {

void ByteWriter::u32(std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void ByteWriter::u64(std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void ByteWriter::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void ByteWriter::str(std::string_view s) {
  u32(static_cast<std::uint32_t>(s.size()));
  out_.append(s);
}

void ByteWriter::tensor(const Tensor& t) {
  u32(static_cast<std::uint32_t>(t.shape().size()));
  for (std::size_t d : t.shape()) u64(d);
  for (double v : t.values()) f64(v);
}

std::string_view ByteReader::take(std::size_t n) {
  if (n > in_.size() - pos_) {
    throw FormatError("truncated data: need " + std::to_string(n) + " bytes at offset " +
                      std::to_string(pos_) + ", have " + std::to_string(in_.size() - pos_));
  }
  auto out = in_.substr(pos_, n);
  pos_ += n;
  return out;
}

std::uint32_t ByteReader::u32() {
  auto b = take(4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(b[i])) << (8 * i);
  return v;
}

std::uint64_t ByteReader::u64() {
  auto b = take(8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(b[i])) << (8 * i);
  return v;
}

double ByteReader::f64() { return std::bit_cast<double>(u64()); }

std::string ByteReader::str() {
  const std::uint32_t n = u32();
  return std::string(take(n));
}

std::string_view ByteReader::raw(std::size_t n) { return take(n); }

Tensor ByteReader::tensor() {
  const std::uint32_t rank = u32();
  if (rank == 0 || rank > 8) throw FormatError("tensor rank " + std::to_string(rank) + " out of range");
  tensor::Shape shape(rank);
  std::size_t count = 1;
  for (auto& d : shape) {
    d = u64();
    if (d == 0 || d > (std::size_t{1} << 32)) throw FormatError("tensor extent out of range");
    count *= d;
  }
  if (count * 8 > in_.size() - pos_) throw FormatError("truncated tensor payload");
  std::vector<double> values(count);
  for (double& v : values) v = f64();
  return Tensor(std::move(shape), std::move(values));
}

const std::string* Checkpoint::section(std::string_view name) const {
  for (const auto& [n, bytes] : sections) {
    if (n == name) return &bytes;
  }
  return nullptr;
}

namespace {

std::uint32_t crc32_of(std::string_view bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size()));
  return static_cast<std::uint32_t>(crc);
}

}  // namespace

std::string encode_checkpoint(const Checkpoint& ckpt) {
  ByteWriter w;
  w.raw(kCheckpointMagic);
  w.u32(kCheckpointVersion);
  const ModelDims& d = ckpt.params.dims;
  w.u64(d.src_vocab);
  w.u64(d.tgt_vocab);
  w.u64(d.embed);
  w.u64(d.hidden);
  const auto named = ckpt.params.named();
  w.u32(static_cast<std::uint32_t>(named.size()));
  for (const auto& [name, t] : named) {
    w.str(name);
    w.tensor(*t);
  }
  ByteWriter limits;
  limits.u64(d.max_query_len);
  limits.u64(d.max_reply_len);
  w.u32(static_cast<std::uint32_t>(ckpt.sections.size() + 1));
  w.str("limits");
  w.u64(limits.bytes().size());
  w.raw(limits.bytes());
  for (const auto& [name, bytes] : ckpt.sections) {
    w.str(name);
    w.u64(bytes.size());
    w.raw(bytes);
  }
  const std::uint32_t crc = crc32_of(w.bytes());
  w.u32(crc);
  return w.take();
}

Checkpoint decode_checkpoint(std::string_view bytes) {
  if (bytes.size() < kCheckpointMagic.size() + 8) throw FormatError("checkpoint truncated: too short");
  if (bytes.substr(0, kCheckpointMagic.size()) != kCheckpointMagic) throw FormatError("not a checkpoint: bad magic");
  const std::string_view body = bytes.substr(0, bytes.size() - 4);
  ByteReader trailer(bytes.substr(bytes.size() - 4));
  const std::uint32_t stored = trailer.u32();

  ByteReader r(body);
  r.raw(kCheckpointMagic.size());
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint version " + std::to_string(version) + " unsupported (expected " +
                      std::to_string(kCheckpointVersion) + ")");
  }
  if (crc32_of(body) != stored) throw FormatError("checkpoint checksum mismatch (file corrupted or truncated)");

  Checkpoint ckpt;
  ModelDims d;
  d.src_vocab = r.u64();
  d.tgt_vocab = r.u64();
  d.embed = r.u64();
  d.hidden = r.u64();
  ckpt.params = ModelParams::zeros(d);
  const auto expected = param_shapes(d);
  auto slots = ckpt.params.named();
  const std::uint32_t count = r.u32();
  if (count != slots.size()) throw FormatError("checkpoint has " + std::to_string(count) + " tensors, expected " +
                                               std::to_string(slots.size()));
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const std::string name = r.str();
    if (name != slots[i].name) throw FormatError("unexpected tensor '" + name + "', expected '" + slots[i].name + "'");
    Tensor t = r.tensor();
    if (t.shape() != expected[i].second) {
      throw FormatError("tensor '" + name + "' has shape " + tensor::to_string(t.shape()) + ", header implies " +
                        tensor::to_string(expected[i].second));
    }
    *slots[i].tensor = std::move(t);
  }
  const std::uint32_t nsections = r.u32();
  for (std::uint32_t i = 0; i < nsections; ++i) {
    std::string name = r.str();
    const std::uint64_t len = r.u64();
    std::string payload(r.raw(len));
    if (name == "limits") {
      ByteReader lr(payload);
      ckpt.params.dims.max_query_len = lr.u64();
      ckpt.params.dims.max_reply_len = lr.u64();
      continue;
    }
    ckpt.sections.emplace_back(std::move(name), std::move(payload));
  }
  if (!r.done()) throw FormatError("trailing bytes after checkpoint sections");
  return ckpt;
}

void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + tmp.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw Error("write failed for " + tmp.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw Error("cannot move output into place at " + path.string());
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  write_file_atomic(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(read_file(path)); }

}  // namespace nrg::model
