#include "deco/serialize.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

#include "deco/errors.hpp"

namespace deco {

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (auto b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t fnv1a64(std::string_view bytes) {
  return fnv1a64(std::span(reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()));
}

std::uint64_t checksum_doubles(std::span<const double> values, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (double v : values) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) {
      h ^= (bits >> (8 * i)) & 0xffU;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

void BinaryWriter::u32(std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xffU));
}

void BinaryWriter::u64(std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xffU));
}

void BinaryWriter::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void BinaryWriter::str(std::string_view s) {
  u64(s.size());
  buf_.append(s);
}

void BinaryWriter::f64s(std::span<const double> v) {
  u64(v.size());
  for (double d : v) f64(d);
}

std::string_view BinaryReader::raw(std::size_t n) {
  if (n > remaining()) throw FormatError("truncated binary data");
  auto out = bytes_.substr(pos_, n);
  pos_ += n;
  return out;
}

std::uint8_t BinaryReader::u8() { return static_cast<std::uint8_t>(raw(1)[0]); }

std::uint32_t BinaryReader::u32() {
  auto b = raw(4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t{static_cast<std::uint8_t>(b[i])} << (8 * i);
  return v;
}

std::uint64_t BinaryReader::u64() {
  auto b = raw(8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t{static_cast<std::uint8_t>(b[i])} << (8 * i);
  return v;
}

double BinaryReader::f64() { return std::bit_cast<double>(u64()); }

std::string BinaryReader::str() {
  auto n = u64();
  return std::string(raw(n));
}

std::vector<double> BinaryReader::f64s() {
  auto n = u64();
  if (n > remaining() / 8) throw FormatError("truncated double array");
  std::vector<double> out(n);
  for (auto& d : out) d = f64();
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + path.string());
}

std::string seal(std::string_view magic, std::uint32_t version, std::string_view payload) {
  BinaryWriter w;
  w.raw(magic);
  w.u32(version);
  w.u64(payload.size());
  w.raw(payload);
  w.u64(fnv1a64(w.bytes()));
  return w.bytes();
}

std::string unseal(std::string_view magic, std::uint32_t version, std::string_view sealed) {
  if (sealed.size() < magic.size() + 4 + 8 + 8) throw FormatError("file too short");
  const std::string_view body = sealed.substr(0, sealed.size() - 8);
  BinaryReader tail(sealed.substr(sealed.size() - 8));
  if (tail.u64() != fnv1a64(body)) throw FormatError("checksum mismatch (corrupted file)");
  BinaryReader r(body);
  if (r.raw(magic.size()) != magic) throw FormatError("bad magic");
  const auto v = r.u32();
  if (v != version) {
    throw FormatError("unsupported version " + std::to_string(v) + " (expected " +
                      std::to_string(version) + ")");
  }
  const auto n = r.u64();
  if (n != r.remaining()) throw FormatError("payload length mismatch");
  return std::string(r.raw(n));
}

std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace deco
