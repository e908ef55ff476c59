#ifndef DESPECKLE_SPECIAL_HPP
#define DESPECKLE_SPECIAL_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>

#include "despeckle/image.hpp"

namespace despeckle {

/// Digamma (order 0) and trigamma (order 1) for z > 0.
/// Shifts z up by the recurrences until the asymptotic series applies;
/// absolute error below 1e-12 over [1, 1e6].
inline double polygamma(int order, double z) {
  if (z <= 0.0) throw std::domain_error("polygamma: requires z > 0");
  if (order != 0 && order != 1)
    throw std::invalid_argument("polygamma: order must be 0 or 1");

  double shift = 0.0;
  while (z < 10.0) {
    if (order == 0)
      shift -= 1.0 / z;
    else
      shift += 1.0 / (z * z);
    z += 1.0;
  }

  const double w = 1.0 / (z * z);
  if (order == 0) {
    // psi0(z) ~ ln z - 1/(2z) - sum B_2k / (2k z^2k)
    double series = w * (1.0 / 12 -
                    w * (1.0 / 120 -
                    w * (1.0 / 252 -
                    w * (1.0 / 240 -
                    w * (1.0 / 132 -
                    w * (691.0 / 32760 -
                    w * (1.0 / 12)))))));
    return shift + std::log(z) - 0.5 / z - series;
  }
  // psi1(z) ~ 1/z + 1/(2z^2) + sum B_2k / z^(2k+1)
  double series = 1.0 / 6 -
                  w * (1.0 / 30 -
                  w * (1.0 / 42 -
                  w * (1.0 / 30 -
                  w * (5.0 / 66 -
                  w * (691.0 / 2730 -
                  w * (7.0 / 6))))));
  return shift + 1.0 / z + 0.5 * w + w / z * series;
}

/// Gamma speckle law: the average of K unit-mean measurements, each with
/// mean mu, follows Gamma with shape K and mean mu.
struct NoiseModel {
  int looks = 1;     // K
  double mean = 1.0; // mu

  NoiseModel() = default;
  NoiseModel(int k, double mu) : looks(k), mean(mu) {
    if (k < 1) throw std::invalid_argument("NoiseModel: looks must be >= 1");
    if (!(mu > 0.0)) throw std::invalid_argument("NoiseModel: mean must be > 0");
  }
};

/// First two moments of log(eta) when eta is K-look Gamma speckle.
struct LogNoiseStats {
  double mean;     // psi0(K) - log K
  double variance; // psi1(K)
  double sigma;    // sqrt(variance)
};

inline LogNoiseStats log_noise_stats(const NoiseModel& model) {
  const double k = static_cast<double>(model.looks);
  LogNoiseStats s{};
  s.mean = polygamma(0, k) - std::log(k);
  s.variance = polygamma(1, k);
  s.sigma = std::sqrt(s.variance);
  return s;
}

/// Seedable generator with fully specified output. The engine (mt19937_64)
/// is pinned by the C++ standard and the uniform/normal/gamma mappings are
/// written out here, so a seed reproduces the same stream on any platform.
class Rng {
public:
  static constexpr const char* algorithm_id =
      "mt19937_64/u53/polar-normal/marsaglia-tsang";

  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  /// Uniform on (0,1), 53-bit resolution, never exactly 0 or 1.
  double uniform() {
    return (static_cast<double>(gen_() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Standard normal via the polar method (second deviate discarded).
  double normal() {
    for (;;) {
      const double v1 = 2.0 * uniform() - 1.0;
      const double v2 = 2.0 * uniform() - 1.0;
      const double s = v1 * v1 + v2 * v2;
      if (s > 0.0 && s < 1.0)
        return v1 * std::sqrt(-2.0 * std::log(s) / s);
    }
  }

  /// Gamma deviate, shape >= 1, unit scale (Marsaglia-Tsang squeeze).
  double gamma(double shape) {
    if (shape < 1.0) throw std::invalid_argument("Rng::gamma: shape must be >= 1");
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = uniform();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
  }

private:
  std::mt19937_64 gen_;
};

/// Field of i.i.d. K-look Gamma speckle with mean mu, in row-major pixel
/// order from a single generator, so a seed fixes the whole field.
inline Image sample_speckle(const NoiseModel& model, std::size_t rows,
                            std::size_t cols, std::uint64_t seed) {
  Rng rng(seed);
  const double k = static_cast<double>(model.looks);
  const double scale = model.mean / k;
  Image eta(rows, cols);
  for (double& v : eta.pixels()) v = scale * rng.gamma(k);
  return eta;
}

/// S = S0 * eta. The clean image must be strictly positive.
inline Image apply_multiplicative_noise(const Image& s0, const NoiseModel& model,
                                        std::uint64_t seed) {
  for (double v : s0.pixels())
    if (!(v > 0.0))
      throw std::domain_error("apply_multiplicative_noise: input must be strictly positive");
  Image s = sample_speckle(model, s0.rows(), s0.cols(), seed);
  for (std::size_t k = 0; k < s.size(); ++k) s.pixels()[k] *= s0.pixels()[k];
  return s;
}

}  // namespace despeckle

#endif  // DESPECKLE_SPECIAL_HPP
