#pragma once

// Little-endian binary primitives for the trace, memory and model files.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace ltm::io {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Writer {
 public:
  explicit Writer(std::ostream& os) : os_(os) {}

  void magic(const char (&tag)[4]) { os_.write(tag, 4); }
  void u8(std::uint8_t v) { put(v, 1); }
  void u16(std::uint16_t v) { put(v, 2); }
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f64(double v) { put(std::bit_cast<std::uint64_t>(v), 8); }
  void bytes(const std::vector<std::uint8_t>& b) {
    os_.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
  }
  void f64s(const std::vector<double>& v) {
    u64(v.size());
    for (double x : v) f64(x);
  }
  void string(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    os_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  void finish() {
    os_.flush();
    if (!os_) throw std::runtime_error("write failed");
  }

 private:
  void put(std::uint64_t v, int n) {
    char buf[8];
    for (int i = 0; i < n; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    os_.write(buf, n);
  }

  std::ostream& os_;
};

class Reader {
 public:
  explicit Reader(std::istream& is) : is_(is) {
    const auto here = is_.tellg();
    is_.seekg(0, std::ios::end);
    end_ = static_cast<std::uint64_t>(is_.tellg());
    is_.seekg(here);
    pos_ = static_cast<std::uint64_t>(here);
  }

  void expect_magic(const char (&tag)[4], const char* what) {
    require_remaining(4, what);
    char buf[4];
    is_.read(buf, 4);
    pos_ += 4;
    if (std::memcmp(buf, tag, 4) != 0) {
      throw FormatError(std::string(what) + ": bad magic, expected '" + std::string(tag, 4) + "'");
    }
  }

  std::uint8_t u8() { return static_cast<std::uint8_t>(get(1, "u8")); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(get(2, "u16")); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4, "u32")); }
  std::uint64_t u64() { return get(8, "u64"); }
  double f64() { return std::bit_cast<double>(get(8, "f64")); }

  std::vector<std::uint8_t> bytes(std::size_t n) {
    require_remaining(n, "bytes");
    std::vector<std::uint8_t> out(n);
    is_.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(n));
    pos_ += n;
    return out;
  }
  std::vector<double> f64s() {
    const std::uint64_t n = u64();
    require_remaining(n * 8, "f64 array");
    std::vector<double> v(n);
    for (double& x : v) x = f64();
    return v;
  }
  std::string string() {
    const std::uint32_t n = u32();
    require_remaining(n, "string");
    std::string s(n, '\0');
    is_.read(s.data(), n);
    pos_ += n;
    return s;
  }

  std::uint64_t remaining() const { return end_ - pos_; }

  void require_remaining(std::uint64_t n, const std::string& what) const {
    if (remaining() < n) {
      throw FormatError("truncated " + what + ": expected " + std::to_string(n) + " more bytes, file has " +
                        std::to_string(remaining()));
    }
  }

 private:
  std::uint64_t get(int n, const char* what) {
    require_remaining(static_cast<std::uint64_t>(n), what);
    unsigned char buf[8];
    is_.read(reinterpret_cast<char*>(buf), n);
    pos_ += static_cast<std::uint64_t>(n);
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return v;
  }

  std::istream& is_;
  std::uint64_t pos_ = 0;
  std::uint64_t end_ = 0;
};

}  // namespace ltm::io
