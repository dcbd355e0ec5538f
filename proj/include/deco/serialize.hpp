#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace deco {

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes,
                      std::uint64_t seed = 0xcbf29ce484222325ULL);
std::uint64_t fnv1a64(std::string_view bytes);
// Checksum over the raw IEEE-754 bits of the values.
std::uint64_t checksum_doubles(std::span<const double> values,
                               std::uint64_t seed = 0xcbf29ce484222325ULL);

// Little-endian binary encoder. Doubles are stored as their exact bit pattern.
class BinaryWriter {
 public:
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
  void f64(double v);
  void str(std::string_view s);
  void f64s(std::span<const double> v);
  void raw(std::string_view bytes) { buf_.append(bytes); }

  const std::string& bytes() const noexcept { return buf_; }

 private:
  std::string buf_;
};

// Bounds-checked decoder; any overrun throws FormatError.
class BinaryReader {
 public:
  explicit BinaryReader(std::string_view bytes) : bytes_(bytes) {}

  std::uint8_t u8();
  std::uint32_t u32();
  std::uint64_t u64();
  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
  double f64();
  std::string str();
  std::vector<double> f64s();
  std::string_view raw(std::size_t n);

  std::size_t position() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

// Shortest text that parses back to the same double.
std::string format_double(double v);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

// Writes `payload` followed by magic-tagged trailer with an FNV-1a checksum,
// and the inverse that validates it.
std::string seal(std::string_view magic, std::uint32_t version, std::string_view payload);
// Returns the payload; throws FormatError on bad magic, version or checksum.
std::string unseal(std::string_view magic, std::uint32_t version, std::string_view sealed);

}  // namespace deco
