#pragma once

// Hyperconditioning: an affine map from user controls in [0, 1] to the raw
// parameters of one stage. The bias is the stage's quiescent state.

#include <cmath>
#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "dbq/error.hpp"
#include "dbq/representation.hpp"

namespace dbq {

struct ConditioningVector {
  std::vector<double> values;
};

inline void validate(const ConditioningVector& c) {
  for (std::size_t i = 0; i < c.values.size(); ++i)
    if (!(c.values[i] >= 0.0 && c.values[i] <= 1.0))
      throw DomainError("conditioning value " + std::to_string(c.values[i]) + " at index " +
                        std::to_string(i) + " outside [0, 1]");
}

// weights is (1 + K P) x C, row-major. Row 0 drives the stage gain.
struct HyperMap {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> weights;
  std::vector<double> bias;

  double& weight(std::size_t r, std::size_t c) { return weights[r * cols + c]; }
  double weight(std::size_t r, std::size_t c) const { return weights[r * cols + c]; }

  static HyperMap zeros(std::size_t rows, std::size_t cols) {
    return {rows, cols, std::vector<double>(rows * cols, 0.0), std::vector<double>(rows, 0.0)};
  }
};

struct FixedStageParams {
  std::vector<double> params;
};

inline std::vector<double> affine(const HyperMap& map, std::span<const double> c) {
  std::vector<double> out = map.bias;
  for (std::size_t r = 0; r < map.rows; ++r) {
    double acc = 0.0;
    for (std::size_t j = 0; j < map.cols; ++j) acc += map.weights[r * map.cols + j] * c[j];
    out[r] += acc;
  }
  return out;
}

inline RawStageParams map_conditioning(const HyperMap& map, const ConditioningVector& c) {
  if (c.values.size() != map.cols)
    throw DomainError("conditioning vector has " + std::to_string(c.values.size()) + " values, map expects " +
                      std::to_string(map.cols));
  validate(c);
  return RawStageParams::from_flat(affine(map, c.values));
}

inline RawStageParams quiescent_params(const HyperMap& map) { return RawStageParams::from_flat(map.bias); }

inline HyperMap edit_bias(HyperMap map, std::size_t row, double delta) {
  if (row >= map.bias.size())
    throw DomainError("bias row " + std::to_string(row) + " out of range (" + std::to_string(map.bias.size()) +
                      " rows)");
  map.bias[row] += delta;
  return map;
}

// Near-identity raw stage vector: 0 dB gain and sections that pass the signal
// unchanged (coefficient and pole/zero) or flat cookbook sections whose
// frequencies tile (0, fs/2) evenly (parametric EQ).
inline std::vector<double> quiescent_raw(Representation rep, std::size_t sections) {
  const std::size_t p = params_per_biquad(rep);
  std::vector<double> raw(1 + sections * p, 0.0);
  if (rep == Representation::ParametricEq) {
    const double step = static_cast<double>(sections) / (2.0 * static_cast<double>(sections + 1));
    for (std::size_t k = 0; k < sections; ++k) raw[1 + k * p] = step;
  }
  return raw;
}

template <typename Rng>
HyperMap init_hypermap(Representation rep, std::size_t sections, std::size_t controls, Rng& rng) {
  const auto bias = quiescent_raw(rep, sections);
  HyperMap map = HyperMap::zeros(bias.size(), controls);
  map.bias = bias;
  std::normal_distribution<double> noise(0.0, 0.01);
  for (auto& w : map.weights) w = noise(rng);
  return map;
}

}  // namespace dbq
