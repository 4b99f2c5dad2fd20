#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "bbs/errors.hpp"

namespace bbs {

// Periodic sequence of box occupancies (0/1). Stored as packed bits,
// site x lives in word x/64, bit x%64 (bit 0 of byte 0 is site 0).
class Configuration {
 public:
  Configuration() = default;

  explicit Configuration(std::size_t length)
      : length_(length), words_((length + 63) / 64, 0) {
    if (length == 0) throw DomainError("Configuration: length must be >= 1");
  }

  static Configuration from_string(const std::string& s) {
    Configuration c(s.size());
    for (std::size_t x = 0; x < s.size(); ++x) {
      if (s[x] == '1') {
        c.set(x, true);
      } else if (s[x] != '0') {
        throw DomainError("Configuration: text format is a line of '0'/'1'");
      }
    }
    return c;
  }

  std::size_t size() const { return length_; }

  bool get(std::size_t x) const {
    return (words_[x >> 6] >> (x & 63)) & 1u;
  }

  void set(std::size_t x, bool v) {
    const std::uint64_t m = std::uint64_t{1} << (x & 63);
    if (v)
      words_[x >> 6] |= m;
    else
      words_[x >> 6] &= ~m;
  }

  void flip(std::size_t x) { words_[x >> 6] ^= std::uint64_t{1} << (x & 63); }

  // Ball count Q.
  std::size_t ball_count() const {
    std::size_t q = 0;
    for (auto w : words_) q += static_cast<std::size_t>(std::popcount(w));
    return q;
  }

  std::string to_string() const {
    std::string s(length_, '0');
    for (std::size_t x = 0; x < length_; ++x)
      if (get(x)) s[x] = '1';
    return s;
  }

  const std::vector<std::uint64_t>& words() const { return words_; }
  std::vector<std::uint64_t>& words() { return words_; }

  std::size_t byte_count() const { return (length_ + 7) / 8; }

  std::uint8_t byte(std::size_t b) const {
    return static_cast<std::uint8_t>(words_[b >> 3] >> ((b & 7) * 8));
  }

  void set_byte(std::size_t b, std::uint8_t v) {
    const int sh = static_cast<int>(b & 7) * 8;
    words_[b >> 3] =
        (words_[b >> 3] & ~(std::uint64_t{0xff} << sh)) | (std::uint64_t{v} << sh);
  }

  // Clears bits beyond the lattice length (the sweep kernels rely on this).
  void mask_tail() {
    if (length_ & 63) {
      words_.back() &= (std::uint64_t{1} << (length_ & 63)) - 1;
    }
  }

  bool operator==(const Configuration& o) const {
    return length_ == o.length_ && words_ == o.words_;
  }

  // Binary format: u64 little-endian length, then ceil(L/8) bytes of packed
  // occupancies, little-endian bit order within bytes.
  void write_binary(std::ostream& os) const {
    std::uint64_t len = length_;
    unsigned char hdr[8];
    for (int i = 0; i < 8; ++i) hdr[i] = static_cast<unsigned char>(len >> (8 * i));
    os.write(reinterpret_cast<const char*>(hdr), 8);
    for (std::size_t b = 0; b < byte_count(); ++b) {
      const char c = static_cast<char>(byte(b));
      os.write(&c, 1);
    }
  }

  static Configuration read_binary(std::istream& is) {
    unsigned char hdr[8];
    is.read(reinterpret_cast<char*>(hdr), 8);
    if (!is) throw DomainError("Configuration: truncated binary header");
    std::uint64_t len = 0;
    for (int i = 0; i < 8; ++i) len |= std::uint64_t{hdr[i]} << (8 * i);
    if (len == 0) throw DomainError("Configuration: length must be >= 1");
    Configuration c(static_cast<std::size_t>(len));
    for (std::size_t b = 0; b < c.byte_count(); ++b) {
      char v;
      is.read(&v, 1);
      if (!is) throw DomainError("Configuration: truncated binary payload");
      c.set_byte(b, static_cast<std::uint8_t>(v));
    }
    c.mask_tail();
    return c;
  }

 private:
  std::size_t length_ = 0;
  std::vector<std::uint64_t> words_;
};

}  // namespace bbs
