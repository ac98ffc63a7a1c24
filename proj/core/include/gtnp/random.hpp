#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "gtnp/tensor.hpp"

namespace gtnp {

// Deterministic random stream. Normal draws use Box-Muller on two fresh
// uniforms (no cached spare), so a stream's output depends only on its seed
// and the sequence of calls, never on the standard library implementation.
class RandomStream {
 public:
  explicit RandomStream(uint64_t seed);

  uint64_t next_u64();
  double uniform();                 // [0, 1)
  double normal();                  // standard normal
  int uniform_int(int n);           // [0, n), unbiased
  std::vector<double> normal_vec(int n);
  Tensor normal_tensor(std::vector<int> shape, double stddev = 1.0);
  Tensor uniform_tensor(std::vector<int> shape, double lo, double hi);
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
      int j = uniform_int(i + 1);
      std::swap(v[static_cast<size_t>(i)], v[static_cast<size_t>(j)]);
    }
  }

  std::array<uint64_t, 4> state() const { return {s_[0], s_[1], s_[2], s_[3]}; }
  void set_state(const std::array<uint64_t, 4>& s) {
    for (int i = 0; i < 4; ++i) s_[i] = s[static_cast<size_t>(i)];
  }

 private:
  uint64_t s_[4];
};

uint64_t hash64(const std::string& s);
uint64_t mix64(uint64_t a, uint64_t b);

// Independent substream identified by (seed, tag[, index]).
RandomStream derive_stream(uint64_t seed, const std::string& tag);
RandomStream derive_stream(uint64_t seed, const std::string& tag, uint64_t index);

}  // namespace gtnp
