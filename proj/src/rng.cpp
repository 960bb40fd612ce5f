#include "sit/rng.hpp"

namespace sit {
namespace {

std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

} // namespace

std::uint64_t RngStream::next_u64() {
    return splitmix64(seed_ ^ splitmix64(counter_++));
}

double RngStream::next_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::next_uniform(double lo, double hi) {
    return lo + (hi - lo) * next_unit();
}

RngStream RngStream::fork(std::uint64_t label) const {
    return RngStream(splitmix64(seed_ + 0x9e3779b97f4a7c15ULL * (label + 1)));
}

} // namespace sit
