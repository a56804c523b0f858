// SPDX-License-Identifier: Apache-2.0
#include "coopsim/random.hpp"

#include <cmath>

namespace coopsim {

namespace {

// Uniform in (0, 1], 53-bit resolution.
double uniform_open0(Rng& rng) {
    return (static_cast<double>(rng() >> 11) + 1.0) * 0x1.0p-53;
}

}  // namespace

std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::initializer_list<std::uint64_t> words) noexcept {
    std::uint64_t h = 0x6a09e667f3bcc909ULL;
    for (auto w : words) h = mix64(h ^ mix64(w));
    return h;
}

Rng make_stream(std::uint64_t master_seed, std::uint64_t frame_id, std::uint64_t agent_id,
                StreamPurpose purpose) {
    return Rng(derive_seed({master_seed, frame_id, agent_id, static_cast<std::uint64_t>(purpose)}));
}

// Box-Muller, one output per call; no cached state so streams stay position-exact.
double standard_normal(Rng& rng) {
    const double u1 = uniform_open0(rng);
    const double u2 = uniform_open0(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

std::complex<double> complex_normal(Rng& rng, double variance) {
    const double u1 = uniform_open0(rng);
    const double u2 = uniform_open0(rng);
    const double r = std::sqrt(-variance * std::log(u1));
    const double t = 2.0 * 3.14159265358979323846 * u2;
    return {r * std::cos(t), r * std::sin(t)};
}

}  // namespace coopsim
