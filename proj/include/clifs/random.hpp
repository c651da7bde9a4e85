#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace clifs {

inline constexpr std::uint64_t kDefaultSeed = 42;

// mt19937_64 with portable draw helpers. std::uniform_*_distribution is
// implementation-defined, so draws go through fixed arithmetic instead and
// results are identical across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed = kDefaultSeed) : engine_(seed) {}

    // Seeds from a (seed, stream...) tuple so parallel workers get
    // independent, reproducible streams.
    Rng(std::uint64_t seed, std::initializer_list<std::uint64_t> stream);

    std::uint64_t next() { return engine_(); }

    // Uniform in [0, n). n must be > 0.
    std::size_t index(std::size_t n);

    // Uniform in [0, 1) with 53 bits of mantissa.
    double uniform01();

    double normal(double mean = 0.0, double sd = 1.0);

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = index(i);
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 engine_;
};

std::vector<std::size_t> iota_indices(std::size_t n);

}  // namespace clifs
