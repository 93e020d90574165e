#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "secfl/model.hpp"

namespace secfl::secagg {

// Fixed-point encoding into Z_{2^64}. The modulus is the native word so ring
// addition is plain wrap-around arithmetic.
struct RingParams {
  std::uint64_t scale = 1ULL << 16;  // power of two
  double clip = 8.0;

  // The true sum of n quantized values must not wrap.
  void check_no_overflow(std::size_t n_clients) const {
    const long double bound = static_cast<long double>(n_clients) *
                              static_cast<long double>(scale) *
                              static_cast<long double>(clip);
    if (!(bound < 0x1p63L)) {
      throw std::invalid_argument("ring: n_clients*scale*clip would overflow");
    }
  }
};

using RingVector = std::vector<std::uint64_t>;

// Clamp to [-clip, clip], scale, round; negatives become two's-complement
// residues. Exact zero maps to residue 0.
inline RingVector quantize(const WeightDelta& delta, const RingParams& params) {
  RingVector out(delta.values.size());
  const double clip = params.clip;
  const double scale = static_cast<double>(params.scale);
  for (std::size_t i = 0; i < out.size(); ++i) {
    double x = delta.values[i];
    if (x > clip) x = clip;
    if (x < -clip) x = -clip;
    out[i] = static_cast<std::uint64_t>(
        static_cast<std::int64_t>(std::llround(x * scale)));
  }
  return out;
}

// Interprets each residue as signed, undoes the scale, and divides by the
// client count (federated average).
inline std::vector<double> dequantize_sum(const RingVector& sum, std::size_t n_clients,
                                          const RingParams& params) {
  if (n_clients == 0) throw std::invalid_argument("ring: zero clients");
  std::vector<double> out(sum.size());
  const double denom = static_cast<double>(params.scale) * static_cast<double>(n_clients);
  for (std::size_t i = 0; i < sum.size(); ++i) {
    out[i] = static_cast<double>(static_cast<std::int64_t>(sum[i])) / denom;
  }
  return out;
}

inline void add_in_place(RingVector& acc, const RingVector& v) {
  if (acc.size() != v.size()) throw std::invalid_argument("ring: length mismatch");
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += v[i];
}

inline void sub_in_place(RingVector& acc, const RingVector& v) {
  if (acc.size() != v.size()) throw std::invalid_argument("ring: length mismatch");
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] -= v[i];
}

}  // namespace secfl::secagg
