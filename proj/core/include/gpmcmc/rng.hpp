#pragma once

#include <cstdint>
#include <random>

namespace gpmcmc {

using Rng = std::mt19937_64;

/// Independent stream for (master seed, stream id, purpose tag). Streams do not
/// depend on the order in which they are created.
inline Rng make_stream(std::uint64_t master_seed, std::uint64_t stream_id, std::uint64_t tag = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(master_seed), static_cast<std::uint32_t>(master_seed >> 32),
                      static_cast<std::uint32_t>(stream_id), static_cast<std::uint32_t>(stream_id >> 32),
                      static_cast<std::uint32_t>(tag), static_cast<std::uint32_t>(tag >> 32)};
    return Rng(seq);
}

inline double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

inline double standard_normal(Rng& rng) { return std::normal_distribution<double>(0.0, 1.0)(rng); }

}  // namespace gpmcmc
