#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "gfv/error.hpp"
#include "gfv/image.hpp"

namespace gfv::io {

// --- little-endian framing -------------------------------------------------

class ByteWriter {
 public:
  void u8(uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u16(uint16_t v);
  void u32(uint32_t v);
  void u64(uint64_t v);
  void f64(double v);
  void bytes(const void* p, size_t n);
  void magic(const char tag[4]) { bytes(tag, 4); }
  const std::string& str() const { return buf_; }
  void save(const std::string& path) const;

 private:
  std::string buf_;
};

// Reads from an in-memory buffer; every failure names the source and byte
// offset so truncated or oversized files diagnose themselves.
class ByteReader {
 public:
  ByteReader(std::string data, std::string source)
      : data_(std::move(data)), source_(std::move(source)) {}
  static ByteReader from_file(const std::string& path);

  uint8_t u8();
  uint16_t u16();
  uint32_t u32();
  uint64_t u64();
  double f64();
  void bytes(void* p, size_t n);
  void expect_magic(const char tag[4]);
  void expect_exhausted() const;  // trailing bytes are a format error
  size_t offset() const { return pos_; }
  size_t remaining() const { return data_.size() - pos_; }
  const std::string& source() const { return source_; }

 private:
  void need(size_t n);
  std::string data_;
  std::string source_;
  size_t pos_ = 0;
};

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& data);

// Resolves a path stored relative to `anchor_file` (e.g. a manifest row
// naming a file next to the manifest). Absolute paths pass through.
std::string sibling_path(const std::string& anchor_file, const std::string& rel);

// --- clip files ------------------------------------------------------------
// Layout: magic "GFV1"; u32 T, Hpx, Wpx, Ch, label; then T*Hpx*Wpx*Ch pixel
// bytes, frame-major, row-major, channel-interleaved.

void write_clip(const std::string& path, const VideoClip& clip);
VideoClip read_clip(const std::string& path);

// --- token files -----------------------------------------------------------
// Layout: magic "TOK1"; u32 seq_len, vocab, label; then seq_len u32 ids.

struct TokenRecord {
  std::vector<int> ids;
  int vocab = 0;
  int label = 0;
};

void write_tokens(const std::string& path, const TokenRecord& rec);
TokenRecord read_tokens(const std::string& path);

// --- manifests -------------------------------------------------------------
// Tab-separated rows (path, label, seed) with optional leading metadata
// lines of the form "# key = value".

struct ManifestRow {
  std::string path;
  int label = 0;
  uint64_t seed = 0;
};

struct Manifest {
  std::vector<ManifestRow> rows;
  std::map<std::string, std::string> meta;
};

void write_manifest(const std::string& path, const Manifest& m);
Manifest read_manifest(const std::string& path);

// --- flat config text ------------------------------------------------------
// "key = value" per line; '#' starts a comment; later keys override earlier.

std::map<std::string, std::string> parse_config(const std::string& text,
                                                const std::string& source);
std::map<std::string, std::string> read_config(const std::string& path);

}  // namespace gfv::io
