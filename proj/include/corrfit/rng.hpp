// rng.hpp — Counter-based random number generation (Philox4x32-10)

#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace corrfit::rng {

// Philox4x32-10 block cipher (Salmon et al., SC'11). Stateless: every draw is
// addressed by a 64-bit key plus a 128-bit counter, so the same (key, counter)
// always yields the same bits regardless of execution order.
inline std::array<std::uint32_t, 4> philox4x32(std::uint64_t key,
                                               std::array<std::uint32_t, 4> ctr) {
    constexpr std::uint32_t M0 = 0xD2511F53u, M1 = 0xCD9E8D57u;
    constexpr std::uint32_t W0 = 0x9E3779B9u, W1 = 0xBB67AE85u;
    std::uint32_t k0 = static_cast<std::uint32_t>(key);
    std::uint32_t k1 = static_cast<std::uint32_t>(key >> 32);
    for (int round = 0; round < 10; ++round) {
        const std::uint64_t p0 = static_cast<std::uint64_t>(M0) * ctr[0];
        const std::uint64_t p1 = static_cast<std::uint64_t>(M1) * ctr[2];
        ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ k0,
               static_cast<std::uint32_t>(p1),
               static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ k1,
               static_cast<std::uint32_t>(p0)};
        k0 += W0;
        k1 += W1;
    }
    return ctr;
}

// One keyed stream per trajectory. Each substep/slot pair addresses an
// independent draw, so trajectories can be simulated in any order (or in
// parallel) with identical results.
class CounterRng {
  public:
    CounterRng(std::uint64_t seed, std::uint64_t trajectory)
        : seed_(seed), traj_(trajectory) {}

    // uniform on (0, 1]
    double uniform(std::uint64_t substep, std::uint32_t slot) const {
        const auto r = block(substep, slot);
        const std::uint64_t bits =
            (static_cast<std::uint64_t>(r[0]) << 32 | r[1]) >> 11;
        return (static_cast<double>(bits) + 1.0) * 0x1p-53;
    }

    // standard normal via Box-Muller
    double gaussian(std::uint64_t substep, std::uint32_t slot) const {
        const auto r = block(substep, slot);
        const std::uint64_t b1 =
            (static_cast<std::uint64_t>(r[0]) << 32 | r[1]) >> 11;
        const std::uint64_t b2 =
            (static_cast<std::uint64_t>(r[2]) << 32 | r[3]) >> 11;
        const double u1 = (static_cast<double>(b1) + 1.0) * 0x1p-53;
        const double u2 = static_cast<double>(b2) * 0x1p-53;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
    }

  private:
    // counter layout: (traj:64, substep:48, slot:16)
    std::array<std::uint32_t, 4> block(std::uint64_t substep, std::uint32_t slot) const {
        return philox4x32(seed_, {static_cast<std::uint32_t>(traj_),
                                  static_cast<std::uint32_t>(traj_ >> 32),
                                  static_cast<std::uint32_t>(substep),
                                  static_cast<std::uint32_t>((substep >> 32) & 0xFFFFu) |
                                      (slot << 16)});
    }

    std::uint64_t seed_;
    std::uint64_t traj_;
};

} // namespace corrfit::rng
