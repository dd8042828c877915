// SPDX-License-Identifier: Apache-2.0
//
// Deterministic numerical primitives shared by every other module:
// dense vectors, a seeded RNG with documented bit-exact semantics,
// stable softmax over negative squared distances, L_p (quasi-)norms
// and summary statistics. Everything is 64-bit float.

#ifndef NGRPO_MATHCORE_HPP_
#define NGRPO_MATHCORE_HPP_

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

namespace ngrpo {

using Vec = std::vector<double>;

// ---------------------------------------------------------------------------
// RNG.
//
// Stream generator: xoshiro256++ seeded through splitmix64, so that two
// implementations agree bit-for-bit given the same seed. Gaussian draws use
// Box-Muller with both outputs consumed, cosine first. Forking derives a
// child seed from (seed, stream_id) without touching the parent state;
// parallel code must fork, never share, a stream.
// ---------------------------------------------------------------------------
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed);

  std::uint64_t next_u64();

  // 53-bit uniform in [0, 1).
  double uniform01();
  // Uniform in (0, 1]; safe as a log() argument.
  double uniform_open01();

  // Standard normal via Box-Muller. Outputs are consumed in pairs:
  // r*cos(2*pi*u2) first, r*sin(2*pi*u2) cached for the next call.
  double gaussian();

  RngStream fork(std::uint64_t stream_id) const;

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::array<std::uint64_t, 4> state_;
  bool has_cached_ = false;
  double cached_ = 0.0;
};

// Derives the child seed used by RngStream::fork. Exposed so that the
// derivation is testable and documented: splitmix64 mix of
// seed + (stream_id + 1) * golden-ratio increment.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream_id);

// dim i.i.d. standard-normal draws. Throws std::invalid_argument if dim < 1.
Vec gaussian_sample(RngStream& rng, int dim);

// ---------------------------------------------------------------------------
// Elementwise vector helpers.
// ---------------------------------------------------------------------------
double dot(const Vec& a, const Vec& b);
double squared_distance(const Vec& a, const Vec& b);
double norm2(const Vec& v);
// y += alpha * x
void axpy(double alpha, const Vec& x, Vec& y);
Vec scaled(const Vec& v, double alpha);
bool all_finite(const Vec& v);

// ---------------------------------------------------------------------------
// p_i = exp(-d_i) / sum_k exp(-d_k), max-shift stabilized. The inputs are
// squared distances (nonnegative), but any finite values work; the result
// sums to 1 within 1e-12. Throws on empty input.
// ---------------------------------------------------------------------------
Vec softmax_neg_sqdist(const Vec& dists_sq);

// Log-probabilities of the same distribution: -d_i - logsumexp(-d).
Vec log_softmax_neg_sqdist(const Vec& dists_sq);

// (sum_k |v_k|^p)^(1/p) for p in (0, 2]. For p < 1 this is a quasi-norm;
// no triangle inequality is implied. Throws if p <= 0.
double lp_norm(const Vec& v, double p);

// Mean and population standard deviation (divide by N, not N-1).
// A single element gives std 0. Throws on empty input.
std::pair<double, double> mean_std(const Vec& v);

}  // namespace ngrpo

#endif  // NGRPO_MATHCORE_HPP_
