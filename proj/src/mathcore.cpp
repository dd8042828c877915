// SPDX-License-Identifier: Apache-2.0

#include "ngrpo/mathcore.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace ngrpo {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

std::uint64_t splitmix64(std::uint64_t& x) {
  x += kGolden;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

std::uint64_t rotl(std::uint64_t x, int k) {
  return (x << k) | (x >> (64 - k));
}

}  // namespace

RngStream::RngStream(std::uint64_t seed) : seed_(seed) {
  std::uint64_t sm = seed;
  for (auto& s : state_) s = splitmix64(sm);
}

std::uint64_t RngStream::next_u64() {
  // xoshiro256++ step.
  const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
  const std::uint64_t t = state_[1] << 17;
  state_[2] ^= state_[0];
  state_[3] ^= state_[1];
  state_[1] ^= state_[2];
  state_[0] ^= state_[3];
  state_[2] ^= t;
  state_[3] = rotl(state_[3], 45);
  return result;
}

double RngStream::uniform01() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::uniform_open01() {
  return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
}

double RngStream::gaussian() {
  if (has_cached_) {
    has_cached_ = false;
    return cached_;
  }
  const double u1 = uniform_open01();
  const double u2 = uniform01();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double a = 2.0 * std::numbers::pi * u2;
  cached_ = r * std::sin(a);
  has_cached_ = true;
  return r * std::cos(a);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream_id) {
  std::uint64_t x = seed + (stream_id + 1) * kGolden;
  return splitmix64(x);
}

RngStream RngStream::fork(std::uint64_t stream_id) const {
  return RngStream(derive_seed(seed_, stream_id));
}

Vec gaussian_sample(RngStream& rng, int dim) {
  if (dim < 1) throw std::invalid_argument("gaussian_sample: dim must be >= 1");
  Vec out(static_cast<std::size_t>(dim));
  for (auto& v : out) v = rng.gaussian();
  return out;
}

double dot(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) throw std::invalid_argument("dot: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double squared_distance(const Vec& a, const Vec& b) {
  if (a.size() != b.size())
    throw std::invalid_argument("squared_distance: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

double norm2(const Vec& v) { return std::sqrt(dot(v, v)); }

void axpy(double alpha, const Vec& x, Vec& y) {
  if (x.size() != y.size()) throw std::invalid_argument("axpy: size mismatch");
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

Vec scaled(const Vec& v, double alpha) {
  Vec out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = alpha * v[i];
  return out;
}

bool all_finite(const Vec& v) {
  return std::all_of(v.begin(), v.end(),
                     [](double x) { return std::isfinite(x); });
}

Vec log_softmax_neg_sqdist(const Vec& dists_sq) {
  if (dists_sq.empty())
    throw std::invalid_argument("softmax_neg_sqdist: empty input");
  // logits l_i = -d_i; max-shift so the largest logit is 0.
  const double dmin = *std::min_element(dists_sq.begin(), dists_sq.end());
  double sum = 0.0;
  for (double d : dists_sq) sum += std::exp(dmin - d);
  const double lse = std::log(sum);
  Vec out(dists_sq.size());
  for (std::size_t i = 0; i < dists_sq.size(); ++i)
    out[i] = (dmin - dists_sq[i]) - lse;
  return out;
}

Vec softmax_neg_sqdist(const Vec& dists_sq) {
  Vec out = log_softmax_neg_sqdist(dists_sq);
  for (auto& v : out) v = std::exp(v);
  return out;
}

double lp_norm(const Vec& v, double p) {
  if (!(p > 0.0)) throw std::invalid_argument("lp_norm: p must be > 0");
  double s = 0.0;
  for (double x : v) s += std::pow(std::abs(x), p);
  return std::pow(s, 1.0 / p);
}

std::pair<double, double> mean_std(const Vec& v) {
  if (v.empty()) throw std::invalid_argument("mean_std: empty input");
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  var /= static_cast<double>(v.size());
  return {mean, std::sqrt(var)};
}

}  // namespace ngrpo
