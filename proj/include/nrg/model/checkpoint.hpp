#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "nrg/model/params.hpp"

namespace nrg::model {

// Little-endian serialization helpers shared by the checkpoint sections.
class ByteWriter {
 public:
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f64(double v);
  void str(std::string_view s);
  void tensor(const Tensor& t);
  void raw(std::string_view bytes) { out_.append(bytes); }

  const std::string& bytes() const { return out_; }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

// Bounds-checked reader; every overrun throws FormatError("truncated ...").
class ByteReader {
 public:
  explicit ByteReader(std::string_view bytes) : in_(bytes) {}
  std::uint32_t u32();
  std::uint64_t u64();
  double f64();
  std::string str();
  Tensor tensor();
  std::string_view raw(std::size_t n);

  bool done() const { return pos_ == in_.size(); }
  std::size_t position() const { return pos_; }

 private:
  std::string_view take(std::size_t n);

  std::string_view in_;
  std::size_t pos_ = 0;
};

// File layout:
//   "NRGCKPT\0", u32 version, u64 V_src, V_tgt, E, H,
//   u32 tensor count, then per tensor: name, u32 rank, u64 dims..., f64 values,
//   u32 section count, then per section: name, u64 length, bytes,
//   u32 CRC-32 of everything above.
// Strings are a u32 length followed by bytes. All integers little-endian.
inline constexpr std::string_view kCheckpointMagic{"NRGCKPT\0", 8};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ModelParams params;
  // Opaque named blobs (optimizer state, config text, vocabulary, ...).
  std::vector<std::pair<std::string, std::string>> sections;

  const std::string* section(std::string_view name) const;
};

std::string encode_checkpoint(const Checkpoint& ckpt);
// Throws FormatError on bad magic, version mismatch, truncation, checksum
// failure, or tensor shapes inconsistent with the header dimensions.
Checkpoint decode_checkpoint(std::string_view bytes);

// Writes to a sibling temp file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);
std::string read_file(const std::filesystem::path& path);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace nrg::model
