#include "bsnlr/rng.hpp"

#include <cmath>
#include <numbers>

namespace bsnlr {

std::uint64_t Stream::mix(std::uint64_t z) {
  // SplitMix64 finalizer.
  z += kGolden;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Stream::Stream(std::uint64_t seed, std::initializer_list<std::uint64_t> ids) : key_(mix(seed)) {
  for (auto id : ids) key_ = mix(key_ ^ mix(id + 0x632be59bd9b4e019ULL));
}

Stream Stream::split(std::uint64_t id) const {
  return Stream(mix(key_ ^ mix(id + 0x632be59bd9b4e019ULL)), KeyTag{});
}

double Stream::uniform() {
  // 53 random bits, shifted off zero.
  return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
}

double Stream::normal() {
  // Box-Muller, one variate per call so the draw count per value is fixed.
  const double u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace bsnlr
