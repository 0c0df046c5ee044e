#include "mtgan/common.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cstdlib>
#include <mutex>
#include <thread>

namespace mtgan {

std::uint64_t mix_seed(std::uint64_t seed, std::string_view tag) {
    // FNV-1a over the tag bytes, then fold in the seed via splitmix64.
    std::uint64_t h = 14695981039346656037ULL;
    for (char c : tag) {
        h ^= static_cast<std::uint64_t>(static_cast<unsigned char>(c));
        h *= 1099511628211ULL;
    }
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL + h;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::uint64_t mix_seed(std::uint64_t seed, std::string_view tag, std::uint64_t index) {
    return mix_seed(mix_seed(seed, tag), std::to_string(index));
}

Rng make_rng(std::uint64_t seed) { return Rng(seed); }
Rng make_rng(std::uint64_t seed, std::string_view tag) { return Rng(mix_seed(seed, tag)); }
Rng make_rng(std::uint64_t seed, std::string_view tag, std::uint64_t index) {
    return Rng(mix_seed(seed, tag, index));
}

int compute_threads() {
    static int n = [] {
        if (const char* env = std::getenv("MTGAN_THREADS")) {
            int v = std::atoi(env);
            if (v >= 1) return v;
        }
        unsigned hc = std::thread::hardware_concurrency();
        return static_cast<int>(std::clamp(hc, 1u, 8u));
    }();
    return n;
}

void init_threading() {
    static std::once_flag flag;
    std::call_once(flag, [] { Eigen::setNbThreads(compute_threads()); });
}

}  // namespace mtgan
