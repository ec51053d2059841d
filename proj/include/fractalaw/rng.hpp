#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace fractalaw {

// Word over the branch alphabet; letters are 0-based (letter i selects the
// subtree fed into branch i+1). The empty word is the root.
class TreeAddress {
public:
  TreeAddress() = default;
  TreeAddress(std::initializer_list<std::uint32_t> letters) : letters_(letters) {}

  std::size_t depth() const { return letters_.size(); }
  const std::vector<std::uint32_t>& letters() const { return letters_; }

  TreeAddress child(std::uint32_t letter) const {
    TreeAddress c = *this;
    c.letters_.push_back(letter);
    return c;
  }

  // 1-based rendering, e.g. "1.2.2"; the root renders as "()".
  std::string to_string() const {
    if (letters_.empty()) return "()";
    std::string s;
    for (std::size_t i = 0; i < letters_.size(); ++i) {
      if (i) s += '.';
      s += std::to_string(letters_[i] + 1);
    }
    return s;
  }

  friend bool operator==(const TreeAddress&, const TreeAddress&) = default;

private:
  std::vector<std::uint32_t> letters_;
};

// SplitMix64 finalizer (Stafford variant 13).
constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Counter-based generator: the i-th output is mix64(key + i * golden), so a
// stream is fully described by its 64-bit key.
class RngStream {
public:
  explicit RngStream(std::uint64_t key = 0) : state_(key) {}

  std::uint64_t next_u64() {
    state_ += kGolden;
    return mix64(state_);
  }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform on (0, 1]; never returns 0.
  double uniform_open_closed() { return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  std::uint64_t key() const { return state_; }

private:
  static constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;
  std::uint64_t state_;
};

// Stream for the law at address sigma of tree `tree` under master seed `seed`:
// key = mix(...mix(mix(mix(seed ^ c) ^ tree) ^ depth) ^ letter_1 ...) with one
// mixing round per letter.
inline RngStream derive_stream(std::uint64_t seed, std::uint64_t tree, const TreeAddress& sigma) {
  std::uint64_t h = mix64(seed ^ 0x6a09e667f3bcc909ULL);
  h = mix64(h ^ tree);
  h = mix64(h ^ static_cast<std::uint64_t>(sigma.depth()));
  for (std::uint32_t letter : sigma.letters()) h = mix64(h ^ (static_cast<std::uint64_t>(letter) + 1));
  return RngStream(h);
}

// Independent seed namespace for auxiliary draws (e.g. a second ensemble
// built from the same user seed).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
  return mix64(mix64(seed ^ 0xbb67ae8584caa73bULL) ^ tag);
}

} // namespace fractalaw
