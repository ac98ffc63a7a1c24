#include "gtnp/random.hpp"

#include <cmath>

namespace gtnp {

// splitmix64, used for seeding and stream derivation
static uint64_t splitmix64(uint64_t& x) {
  x += 0x9e3779b97f4a7c15ull;
  uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

RandomStream::RandomStream(uint64_t seed) {
  uint64_t x = seed;
  for (auto& s : s_) s = splitmix64(x);
}

static inline uint64_t rotl(uint64_t v, int k) { return (v << k) | (v >> (64 - k)); }

// xoshiro256**
uint64_t RandomStream::next_u64() {
  uint64_t result = rotl(s_[1] * 5, 7) * 9;
  uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double RandomStream::uniform() {
  return static_cast<double>(next_u64() >> 11) * (1.0 / 9007199254740992.0);
}

double RandomStream::normal() {
  double u1 = 1.0 - uniform();  // (0, 1]
  double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

int RandomStream::uniform_int(int n) {
  uint64_t bound = static_cast<uint64_t>(n);
  uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  uint64_t v;
  do {
    v = next_u64();
  } while (v >= limit);
  return static_cast<int>(v % bound);
}

std::vector<double> RandomStream::normal_vec(int n) {
  std::vector<double> v(static_cast<size_t>(n));
  for (double& x : v) x = normal();
  return v;
}

Tensor RandomStream::normal_tensor(std::vector<int> shape, double stddev) {
  Tensor t(std::move(shape));
  for (double& x : t.data) x = normal() * stddev;
  return t;
}

Tensor RandomStream::uniform_tensor(std::vector<int> shape, double lo, double hi) {
  Tensor t(std::move(shape));
  for (double& x : t.data) x = lo + (hi - lo) * uniform();
  return t;
}

uint64_t hash64(const std::string& s) {
  uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  return h;
}

uint64_t mix64(uint64_t a, uint64_t b) {
  uint64_t x = a ^ rotl(b, 32);
  return splitmix64(x);
}

RandomStream derive_stream(uint64_t seed, const std::string& tag) {
  return RandomStream(mix64(seed, hash64(tag)));
}

RandomStream derive_stream(uint64_t seed, const std::string& tag, uint64_t index) {
  return RandomStream(mix64(mix64(seed, hash64(tag)), index));
}

}  // namespace gtnp
