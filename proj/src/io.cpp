#include "gfv/io.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace gfv::io {

namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

// --- ByteWriter ------------------------------------------------------------

void ByteWriter::u16(uint16_t v) {
  for (int i = 0; i < 2; ++i) u8(static_cast<uint8_t>(v >> (8 * i)));
}
void ByteWriter::u32(uint32_t v) {
  for (int i = 0; i < 4; ++i) u8(static_cast<uint8_t>(v >> (8 * i)));
}
void ByteWriter::u64(uint64_t v) {
  for (int i = 0; i < 8; ++i) u8(static_cast<uint8_t>(v >> (8 * i)));
}
void ByteWriter::f64(double v) { u64(std::bit_cast<uint64_t>(v)); }
void ByteWriter::bytes(const void* p, size_t n) {
  buf_.append(static_cast<const char*>(p), n);
}
void ByteWriter::save(const std::string& path) const { write_file(path, buf_); }

// --- ByteReader ------------------------------------------------------------

ByteReader ByteReader::from_file(const std::string& path) {
  return ByteReader(read_file(path), path);
}

void ByteReader::need(size_t n) {
  if (pos_ + n > data_.size())
    throw FormatError(source_ + ": need " + std::to_string(n) + " bytes at offset " +
                      std::to_string(pos_) + ", only " +
                      std::to_string(data_.size() - pos_) + " left");
}

uint8_t ByteReader::u8() {
  need(1);
  return static_cast<uint8_t>(data_[pos_++]);
}
uint16_t ByteReader::u16() {
  uint16_t v = 0;
  for (int i = 0; i < 2; ++i) v |= static_cast<uint16_t>(u8()) << (8 * i);
  return v;
}
uint32_t ByteReader::u32() {
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(u8()) << (8 * i);
  return v;
}
uint64_t ByteReader::u64() {
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(u8()) << (8 * i);
  return v;
}
double ByteReader::f64() { return std::bit_cast<double>(u64()); }

void ByteReader::bytes(void* p, size_t n) {
  need(n);
  std::memcpy(p, data_.data() + pos_, n);
  pos_ += n;
}

void ByteReader::expect_magic(const char tag[4]) {
  const size_t at = pos_;
  char got[5] = {0};
  need(4);
  std::memcpy(got, data_.data() + pos_, 4);
  pos_ += 4;
  if (std::memcmp(got, tag, 4) != 0)
    throw FormatError(source_ + ": bad magic at offset " + std::to_string(at) +
                      ", expected \"" + std::string(tag, 4) + "\" got \"" +
                      std::string(got, 4) + "\"");
}

void ByteReader::expect_exhausted() const {
  if (pos_ != data_.size())
    throw FormatError(source_ + ": " + std::to_string(data_.size() - pos_) +
                      " trailing bytes after offset " + std::to_string(pos_) +
                      " (expected " + std::to_string(pos_) + " total, file has " +
                      std::to_string(data_.size()) + ")");
}

// --- whole files -----------------------------------------------------------

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError(path + ": cannot open for reading");
  std::ostringstream ss;
  ss << f.rdbuf();
  if (!f.good() && !f.eof()) throw IoError(path + ": read failed");
  return ss.str();
}

void write_file(const std::string& path, const std::string& data) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError(path + ": cannot open for writing");
  f.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!f.good()) throw IoError(path + ": write failed");
}

std::string sibling_path(const std::string& anchor_file, const std::string& rel) {
  std::filesystem::path p(rel);
  if (p.is_absolute()) return rel;
  return (std::filesystem::path(anchor_file).parent_path() / p).string();
}

// --- clip files ------------------------------------------------------------

void write_clip(const std::string& path, const VideoClip& clip) {
  clip.validate();
  const Image& f0 = clip.frames[0];
  ByteWriter w;
  w.magic("GFV1");
  w.u32(static_cast<uint32_t>(clip.t()));
  w.u32(static_cast<uint32_t>(f0.h));
  w.u32(static_cast<uint32_t>(f0.w));
  w.u32(static_cast<uint32_t>(f0.ch));
  w.u32(static_cast<uint32_t>(clip.label));
  for (const Image& f : clip.frames) w.bytes(f.pix.data(), f.pix.size());
  w.save(path);
}

VideoClip read_clip(const std::string& path) {
  ByteReader r = ByteReader::from_file(path);
  r.expect_magic("GFV1");
  const uint32_t t = r.u32(), h = r.u32(), w = r.u32(), ch = r.u32(), label = r.u32();
  if (t == 0 || h == 0 || w == 0 || ch == 0)
    throw FormatError(path + ": zero dimension in header (T=" + std::to_string(t) +
                      " H=" + std::to_string(h) + " W=" + std::to_string(w) +
                      " Ch=" + std::to_string(ch) + ")");
  const size_t frame_bytes = static_cast<size_t>(h) * w * ch;
  VideoClip clip;
  clip.label = static_cast<int>(label);
  clip.frames.reserve(t);
  for (uint32_t i = 0; i < t; ++i) {
    Image f(static_cast<int>(h), static_cast<int>(w), static_cast<int>(ch));
    r.bytes(f.pix.data(), frame_bytes);
    clip.frames.push_back(std::move(f));
  }
  r.expect_exhausted();
  return clip;
}

// --- token files -----------------------------------------------------------

void write_tokens(const std::string& path, const TokenRecord& rec) {
  for (int id : rec.ids)
    if (id < 0 || id >= rec.vocab)
      throw IndexError(path + ": token id " + std::to_string(id) + " outside [0," +
                       std::to_string(rec.vocab) + ")");
  ByteWriter w;
  w.magic("TOK1");
  w.u32(static_cast<uint32_t>(rec.ids.size()));
  w.u32(static_cast<uint32_t>(rec.vocab));
  w.u32(static_cast<uint32_t>(rec.label));
  for (int id : rec.ids) w.u32(static_cast<uint32_t>(id));
  w.save(path);
}

TokenRecord read_tokens(const std::string& path) {
  ByteReader r = ByteReader::from_file(path);
  r.expect_magic("TOK1");
  const uint32_t n = r.u32(), vocab = r.u32(), label = r.u32();
  TokenRecord rec;
  rec.vocab = static_cast<int>(vocab);
  rec.label = static_cast<int>(label);
  rec.ids.reserve(n);
  for (uint32_t i = 0; i < n; ++i) {
    const uint32_t id = r.u32();
    if (id >= vocab)
      throw FormatError(path + ": token id " + std::to_string(id) + " at offset " +
                        std::to_string(r.offset() - 4) + " outside vocab " +
                        std::to_string(vocab));
    rec.ids.push_back(static_cast<int>(id));
  }
  r.expect_exhausted();
  return rec;
}

// --- manifests -------------------------------------------------------------

void write_manifest(const std::string& path, const Manifest& m) {
  std::ostringstream ss;
  for (const auto& [k, v] : m.meta) ss << "# " << k << " = " << v << "\n";
  for (const ManifestRow& r : m.rows)
    ss << r.path << "\t" << r.label << "\t" << r.seed << "\n";
  write_file(path, ss.str());
}

Manifest read_manifest(const std::string& path) {
  Manifest m;
  std::istringstream ss(read_file(path));
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (t[0] == '#') {
      const size_t eq = t.find('=');
      if (eq != std::string::npos) {
        const std::string key = trim(t.substr(1, eq - 1));
        if (!key.empty()) m.meta[key] = trim(t.substr(eq + 1));
      }
      continue;
    }
    std::istringstream ls(t);
    ManifestRow row;
    std::string label_s, seed_s;
    if (!std::getline(ls, row.path, '\t') || !std::getline(ls, label_s, '\t') ||
        !std::getline(ls, seed_s))
      throw FormatError(path + ": line " + std::to_string(lineno) +
                        ": expected path<TAB>label<TAB>seed");
    try {
      row.label = std::stoi(label_s);
      row.seed = std::stoull(trim(seed_s));
    } catch (const std::exception&) {
      throw FormatError(path + ": line " + std::to_string(lineno) +
                        ": non-numeric label or seed");
    }
    m.rows.push_back(std::move(row));
  }
  return m;
}

// --- flat config text ------------------------------------------------------

std::map<std::string, std::string> parse_config(const std::string& text,
                                                const std::string& source) {
  std::map<std::string, std::string> cfg;
  std::istringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError(source + ": line " + std::to_string(lineno) +
                        ": expected \"key = value\", got \"" + t + "\"");
    const std::string key = trim(t.substr(0, eq));
    if (key.empty())
      throw ConfigError(source + ": line " + std::to_string(lineno) + ": empty key");
    cfg[key] = trim(t.substr(eq + 1));  // later keys override earlier ones
  }
  return cfg;
}

std::map<std::string, std::string> read_config(const std::string& path) {
  return parse_config(read_file(path), path);
}

}  // namespace gfv::io
