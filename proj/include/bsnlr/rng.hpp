#pragma once

#include <cstdint>
#include <initializer_list>
#include <limits>

namespace bsnlr {

// Counter-based random stream. The i-th output is a pure function of
// (key, i), so a stream can be re-created anywhere from its key alone and
// independent streams are obtained by keying on (seed, id, id, ...).
// Satisfies UniformRandomBitGenerator.
class Stream {
 public:
  using result_type = std::uint64_t;

  explicit Stream(std::uint64_t seed) : key_(mix(seed)) {}
  Stream(std::uint64_t seed, std::initializer_list<std::uint64_t> ids);

  // Child stream keyed on this stream's key and `id`; does not advance *this.
  Stream split(std::uint64_t id) const;

  result_type operator()() { return mix(key_ + kGolden * ++counter_); }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  // Uniform on the open interval (0, 1).
  double uniform();
  double normal();

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

  static std::uint64_t mix(std::uint64_t z);

 private:
  static constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;
  struct KeyTag {};
  Stream(std::uint64_t key, KeyTag) : key_(key) {}

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace bsnlr
