#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Dense>

namespace vbsl {

// SplitMix64 finalizer, used to turn structured stream ids into
// well-separated engine seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// A seeded random stream.  Child streams are derived purely from
// (master seed, ids), so work can be farmed out across threads while
// keeping every stream's draws independent of execution order.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : engine_(splitmix64(seed)) {}

  static RngStream child(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0) {
    std::uint64_t h = splitmix64(master ^ 0x6a09e667f3bcc909ULL);
    h = splitmix64(h + a);
    h = splitmix64(h ^ splitmix64(b + 0xbb67ae8584caa73bULL));
    return RngStream(h);
  }

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }          // [0, 1)
  double exponential() { return exponential_(engine_); }  // rate 1

  Eigen::VectorXd normal_vector(int n) {
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v[i] = normal();
    return v;
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{};
  std::uniform_real_distribution<double> uniform_{};
  std::exponential_distribution<double> exponential_{};
};

}  // namespace vbsl
