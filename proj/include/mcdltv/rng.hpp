#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace mcdltv {

/// Philox4x32-10 block function (Salmon et al., "Parallel random numbers: as easy as 1, 2, 3").
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

/// Counter-based random stream keyed by (master seed, label).
///
/// The Philox key is a hash of the seed and the label, so two streams with the same
/// pair replay the same sequence and streams with different labels never share state.
/// Each scalar draw consumes exactly one counter value. A stream is single-owner; hand
/// concurrent consumers their own stream via derive().
class RngStream {
 public:
  RngStream(std::uint64_t master_seed, std::string label);

  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 bits of resolution.
  double uniform();
  /// Standard normal (Box-Muller, two draws per value).
  double normal();
  /// Uniform integer in [0, bound), rejection-sampled so it is unbiased.
  std::uint64_t below(std::uint64_t bound);

  /// Independent child stream labelled "<label>/<sub>".
  RngStream derive(std::string_view sub) const;

  std::uint64_t master_seed() const { return master_seed_; }
  const std::string& label() const { return label_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t master_seed_;
  std::string label_;
  std::array<std::uint32_t, 2> key_;
  std::uint64_t counter_ = 0;
};

/// n uniform draws; advances the stream counter by n.
std::vector<double> draw_uniform(RngStream& stream, std::size_t n);

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace mcdltv
