// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <complex>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace coopsim {

using Rng = std::mt19937_64;

/// Purpose tags keep the streams of one (frame, agent) pair independent.
enum class StreamPurpose : std::uint64_t {
    Scenario = 1,
    Lidar = 2,
    Link = 3,
    CodecInit = 4,
    CodecTrain = 5,
};

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Order-sensitive hash of a sequence of words.
std::uint64_t derive_seed(std::initializer_list<std::uint64_t> words) noexcept;

/// Stream id = hash(master seed, frame id, agent id, purpose).
Rng make_stream(std::uint64_t master_seed, std::uint64_t frame_id, std::uint64_t agent_id,
                StreamPurpose purpose);

double standard_normal(Rng& rng);

/// Circularly-symmetric complex Gaussian with total variance `variance`.
std::complex<double> complex_normal(Rng& rng, double variance);

}  // namespace coopsim
