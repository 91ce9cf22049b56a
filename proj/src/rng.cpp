#include "styleflow/rng.hpp"

#include <sstream>

#include "styleflow/error.hpp"

namespace styleflow {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream_a, std::uint64_t stream_b) {
    auto mix = [](std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    };
    return mix(mix(mix(seed) ^ stream_a) ^ stream_b);
}

Tensor normal_tensor(const Shape& shape, double stddev, Rng& rng) {
    Tensor out(shape);
    std::normal_distribution<double> dist(0.0, 1.0);
    for (double& x : out.data()) x = stddev * dist(rng);
    return out;
}

Tensor uniform_tensor(const Shape& shape, double lo, double hi, Rng& rng) {
    Tensor out(shape);
    std::uniform_real_distribution<double> dist(lo, hi);
    for (double& x : out.data()) x = dist(rng);
    return out;
}

std::string rng_state(const Rng& rng) {
    std::ostringstream os;
    os << rng;
    return os.str();
}

void set_rng_state(Rng& rng, const std::string& state) {
    std::istringstream is(state);
    is >> rng;
    if (!is) throw DataError("malformed RNG state");
}

}  // namespace styleflow
