#pragma once

// CSV rendering with deterministic number formatting (shortest round-trip,
// so identical values always print identically) and the FNV-1a hash used to
// fingerprint artifacts in the run manifest.

#include <charconv>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace fjlab {

inline std::string format_double(double x) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

class CsvBuilder {
 public:
  explicit CsvBuilder(const std::vector<std::string>& header) { row(header); }

  void row(const std::vector<std::string>& cells) {
    for (std::size_t n = 0; n < cells.size(); ++n) {
      if (n > 0) text_ += ',';
      text_ += escape(cells[n]);
    }
    text_ += '\n';
  }

  const std::string& text() const { return text_; }

 private:
  static std::string escape(const std::string& cell) {
    if (cell.find_first_of(",\"\n") == std::string::npos) return cell;
    std::string out = "\"";
    for (char ch : cell) {
      if (ch == '"') out += '"';
      out += ch;
    }
    out += '"';
    return out;
  }

  std::string text_;
};

inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    hash ^= ch;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

inline std::string fnv1a64_hex(std::string_view bytes) {
  static const char digits[] = "0123456789abcdef";
  std::uint64_t hash = fnv1a64(bytes);
  std::string out(16, '0');
  for (int n = 15; n >= 0; --n) {
    out[n] = digits[hash & 0xf];
    hash >>= 4;
  }
  return out;
}

}  // namespace fjlab
