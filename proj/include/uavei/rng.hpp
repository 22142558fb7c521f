// Deterministic seed derivation: every consumer owns an independent RNG
// stream derived from (master seed, stream tag, index) so that e.g. task
// sampling is unaffected by how much exploration noise a policy draws.
#pragma once

#include <cstdint>
#include <random>

namespace uavei {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Stream tags; fixed values keep checkpoints/metrics reproducible.
enum class Stream : std::uint64_t {
    EnvTask = 1,      // task sample draws inside the environment
    NetInit = 2,      // network weight initialization
    Explore = 3,      // exploration noise (heading, Gumbel)
    Batch = 4,        // replay batch index sampling
    EvalEnv = 5,      // evaluation episode environments
    EvalPolicy = 6,   // evaluation-time stochastic policies (RANDOM)
    Episode = 7,      // per-training-episode environment seeds
    ActorRelax = 8,   // fresh Gumbel draws for the actor update's rebuilt actions
};

inline std::uint64_t derive_seed(std::uint64_t master, Stream stream, std::uint64_t index) {
    std::uint64_t h = splitmix64(master ^ 0x5bf03635d1d4f9c1ULL);
    h = splitmix64(h ^ static_cast<std::uint64_t>(stream) * 0x9e3779b97f4a7c15ULL);
    h = splitmix64(h ^ index);
    return h;
}

inline Rng make_rng(std::uint64_t master, Stream stream, std::uint64_t index) {
    return Rng(derive_seed(master, stream, index));
}

} // namespace uavei
