#ifndef STRATEGEM_HASH_HPP
#define STRATEGEM_HASH_HPP

#include <cstdint>
#include <string>
#include <string_view>

namespace strategem {

/// 64-bit FNV-1a. Used for content-addressed ids and fingerprints, not security.
class Fnv1a {
 public:
  Fnv1a& update(std::string_view bytes) noexcept {
    for (unsigned char c : bytes) {
      state_ ^= c;
      state_ *= 0x100000001b3ULL;
    }
    return *this;
  }

  /// Field separator so that ("ab","c") and ("a","bc") hash differently.
  Fnv1a& field(std::string_view bytes) noexcept {
    update(bytes);
    return update(std::string_view("\x1f", 1));
  }

  Fnv1a& field(std::uint64_t value) noexcept {
    char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((value >> (8 * i)) & 0xff);
    update(std::string_view(buf, 8));
    return update(std::string_view("\x1f", 1));
  }

  std::uint64_t digest() const noexcept { return state_; }

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

inline std::uint64_t fnv1a64(std::string_view bytes) noexcept {
  return Fnv1a{}.update(bytes).digest();
}

/// Fixed-width lowercase hex.
inline std::string to_hex(std::uint64_t value) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[value & 0xf];
    value >>= 4;
  }
  return out;
}

}  // namespace strategem

#endif  // STRATEGEM_HASH_HPP
