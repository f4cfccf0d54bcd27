#pragma once

#include <cstdint>

namespace ovepg {

/// Mixes (master, salt) into a fresh 64-bit seed for nested stream hierarchies
/// (per-repeat, per-episode, ...). Avalanche mixing keeps derived streams
/// statistically independent of each other and of the parent.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t salt);

/// A splittable random stream identified by (master_seed, stream_index).
/// Two streams with distinct identifiers are statistically independent,
/// and a stream replays the same sequence no matter when or where it is
/// consumed. Streams are single-owner objects: move them between workers,
/// never share one concurrently.
class RngStream {
public:
    RngStream(std::uint64_t master_seed, std::uint64_t stream_index);

    std::uint64_t next_u64();

    /// Uniform on the open interval (0, 1).
    double uniform();

    /// Standard normal via Box-Muller (two uniforms per draw).
    double normal();

    /// Exponential with rate 1.
    double exponential();

    /// Gamma(shape, 1) via Marsaglia-Tsang, boosted for shape < 1.
    double gamma(double shape);

    std::uint64_t master_seed() const { return master_seed_; }
    std::uint64_t stream_index() const { return stream_index_; }

private:
    std::uint64_t master_seed_;
    std::uint64_t stream_index_;
    std::uint64_t state_[4];  // xoshiro256**
};

}  // namespace ovepg
