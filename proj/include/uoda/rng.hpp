#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace uoda {

// All randomness in a run flows from one seed through named substreams, so
// adding a consumer never perturbs the draws of an existing one.
std::uint64_t substream_seed(std::uint64_t seed, std::string_view name);

inline std::mt19937_64 substream(std::uint64_t seed, std::string_view name) {
    return std::mt19937_64(substream_seed(seed, name));
}

}  // namespace uoda
