#pragma once

#include <cstdint>

namespace sit {

// Counter-based random stream: draw k of stream (seed) is a pure function of
// (seed, k). Streams can be forked into independent children, snapshotted by
// saving the counter, and replayed by rewinding it. Draws use only integer
// mixing plus exact double arithmetic, so sequences are identical on every
// platform.
class RngStream {
public:
    RngStream() = default;
    explicit RngStream(std::uint64_t seed, std::uint64_t counter = 0)
        : seed_(seed), counter_(counter) {}

    std::uint64_t next_u64();

    // Uniform in [0, 1) with 53 random bits.
    double next_unit();

    double next_uniform(double lo, double hi);

    // Independent child stream; label selects the child deterministically.
    RngStream fork(std::uint64_t label) const;

    std::uint64_t seed() const { return seed_; }
    std::uint64_t counter() const { return counter_; }
    void rewind(std::uint64_t counter) { counter_ = counter; }

private:
    std::uint64_t seed_ = 0;
    std::uint64_t counter_ = 0;
};

} // namespace sit
