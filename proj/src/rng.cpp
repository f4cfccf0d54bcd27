#include "ovepg/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace ovepg {

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t salt) {
    std::uint64_t s = master ^ (0x9E3779B97F4A7C15ull * (salt + 1));
    return splitmix64(s);
}

RngStream::RngStream(std::uint64_t master_seed, std::uint64_t stream_index)
    : master_seed_(master_seed), stream_index_(stream_index) {
    std::uint64_t s = derive_seed(master_seed, stream_index);
    for (auto& w : state_) w = splitmix64(s);
}

std::uint64_t RngStream::next_u64() {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
}

double RngStream::uniform() {
    double u;
    do {
        u = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    } while (u <= 0.0);
    return u;
}

double RngStream::normal() {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
}

double RngStream::exponential() {
    return -std::log(uniform());
}

double RngStream::gamma(double shape) {
    if (!(shape > 0.0)) throw std::invalid_argument("gamma shape must be positive");
    if (shape < 1.0) {
        const double u = uniform();
        return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x;
        double v;
        do {
            x = normal();
            v = 1.0 + c * x;
        } while (v <= 0.0);
        v = v * v * v;
        const double u = uniform();
        if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
        if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
}

}  // namespace ovepg
