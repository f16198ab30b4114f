#pragma once

#include <cstdint>
#include <cmath>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace trajgraph {

// Malformed or contradictory input data (files, manifests, argument values).
struct InputError : std::runtime_error {
    explicit InputError(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid configuration detected before any work is done.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Deterministic PRNG with hand-rolled draws. The standard distributions are
// implementation-defined, so everything that must reproduce across platforms
// goes through this.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {
        // warm up so nearby seeds decorrelate
        splitmix64(state_);
        splitmix64(state_);
    }

    static Rng derive(std::uint64_t seed, std::uint64_t stream) {
        std::uint64_t s = seed;
        std::uint64_t a = splitmix64(s);
        return Rng(a ^ (stream * 0xd1342543de82ef95ULL + 0x2545f4914f6cdd1dULL));
    }

    std::uint64_t next_u64() { return splitmix64(state_); }

    // uniform in [0, n)
    std::uint64_t next_below(std::uint64_t n) {
        // multiply-shift; bias is negligible for n << 2^64
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    // uniform in [0, 1)
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    int uniform_int(int lo, int hi) {  // inclusive bounds
        return lo + static_cast<int>(next_below(static_cast<std::uint64_t>(hi - lo + 1)));
    }

    bool bernoulli(double p) { return uniform() < p; }

    double normal() {
        // Box-Muller; avoids log(0)
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(next_below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::uint64_t state_;
};

inline std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ULL) {
    std::uint64_t h = seed;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string to_hex(std::uint64_t v);
std::string lowercase(std::string_view s);
std::string trim(std::string_view s);
std::vector<std::string> split_words(std::string_view s);

}  // namespace trajgraph
