#pragma once

// The full effect model: a two-parameter delay layer followed by S filtering
// stages. Each stage is a cascade of K biquads, a gain and a tanh (omitted on
// the last stage). Conditioned stages take their raw parameters from a
// HyperMap, the others from trainable constants.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <map>
#include <random>
#include <set>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "dbq/biquad.hpp"
#include "dbq/error.hpp"
#include "dbq/fft.hpp"
#include "dbq/hypernet.hpp"
#include "dbq/representation.hpp"

namespace dbq {

struct ConditioningSite {
  std::size_t stage = 0;
  std::vector<std::string> names;  // C_s = names.size()

  std::size_t width() const noexcept { return names.size(); }
};

struct ModelSpec {
  std::size_t stages = 1;
  std::size_t sections = 1;
  Representation representation = Representation::ParametricEq;
  double sample_rate = 44100.0;
  std::vector<ConditioningSite> sites;  // sorted by stage

  std::size_t p() const noexcept { return params_per_biquad(representation); }
  std::size_t stage_width() const noexcept { return 1 + sections * p(); }

  // Index into `sites` for stage s, or -1 when the stage is fixed.
  std::ptrdiff_t site_index(std::size_t s) const {
    for (std::size_t i = 0; i < sites.size(); ++i)
      if (sites[i].stage == s) return static_cast<std::ptrdiff_t>(i);
    return -1;
  }
  std::size_t controls(std::size_t s) const {
    const auto i = site_index(s);
    return i < 0 ? 0 : sites[static_cast<std::size_t>(i)].width();
  }
  std::vector<std::string> control_names() const {
    std::vector<std::string> out;
    for (const auto& site : sites) out.insert(out.end(), site.names.begin(), site.names.end());
    return out;
  }
};

inline void validate(const ModelSpec& spec) {
  if (spec.stages < 1) throw ValidationError("S", "model needs at least one stage");
  if (spec.sections < 1) throw ValidationError("K", "stages need at least one biquad");
  if (spec.representation == Representation::ParametricEq && spec.sections < 2)
    throw ValidationError("K", "parametric EQ stages need K >= 2");
  if (!(spec.sample_rate > 0.0)) throw ValidationError("f_SR", "sample rate must be positive");
  std::set<std::size_t> seen;
  std::set<std::string> names;
  std::size_t prev = 0;
  for (std::size_t i = 0; i < spec.sites.size(); ++i) {
    const auto& site = spec.sites[i];
    if (site.stage >= spec.stages) throw ValidationError("sites", "stage index out of range");
    if (!seen.insert(site.stage).second) throw ValidationError("sites", "duplicate conditioning stage");
    if (i > 0 && site.stage < prev) throw ValidationError("sites", "sites must be sorted by stage");
    prev = site.stage;
    if (site.names.empty()) throw ValidationError("sites", "conditioned stage needs C_s >= 1");
    for (const auto& n : site.names)
      if (!names.insert(n).second) throw ValidationError("sites", "duplicate control name '" + n + "'");
  }
}

// 2 + sum_s (1 + K P)(1 + C_s)
inline std::size_t count_params(const ModelSpec& spec) {
  std::size_t total = 2;
  for (std::size_t s = 0; s < spec.stages; ++s) total += spec.stage_width() * (1 + spec.controls(s));
  return total;
}

// Conditioning sites of the BOSS MT-2 topology: S = 10, K = 4.
inline ModelSpec mt2_spec(Representation rep) {
  ModelSpec spec;
  spec.stages = 10;
  spec.sections = 4;
  spec.representation = rep;
  spec.sample_rate = 44100.0;
  spec.sites = {{2, {"DIST"}}, {6, {"LOW", "HIGH"}}, {7, {"MID", "MID FREQ"}}, {8, {"LEVEL"}}};
  return spec;
}

using StageState = std::variant<FixedStageParams, HyperMap>;

struct ModelState {
  double delay_raw = -10.0;
  double delay_gain = 1.0;
  std::vector<StageState> stages;
};

inline constexpr double kInitDelayRaw = -10.0;

inline double delay_samples(double delay_raw) { return kMaxDelaySamples * sigmoid(delay_raw); }

// One conditioning vector per site, in site order.
using Conditioning = std::vector<ConditioningVector>;

inline Conditioning quiescent_conditioning(const ModelSpec& spec) {
  Conditioning c;
  for (const auto& site : spec.sites) c.push_back({std::vector<double>(site.width(), 0.0)});
  return c;
}

// Named settings to per-site vectors. Unknown names are rejected; missing names
// default to 0 unless `require_all` is set.
inline Conditioning conditioning_from_settings(const ModelSpec& spec, const std::map<std::string, double>& settings,
                                               bool require_all = false) {
  const auto valid = spec.control_names();
  for (const auto& [name, value] : settings) {
    if (std::find(valid.begin(), valid.end(), name) == valid.end()) {
      std::string list;
      for (const auto& v : valid) list += (list.empty() ? "" : ", ") + v;
      throw ValidationError("settings", "unknown control '" + name + "' (valid: " + list + ")");
    }
    if (!(value >= 0.0 && value <= 1.0))
      throw ValidationError("settings", "control '" + name + "' value outside [0, 1]");
  }
  Conditioning c;
  for (const auto& site : spec.sites) {
    ConditioningVector v;
    for (const auto& name : site.names) {
      const auto it = settings.find(name);
      if (it == settings.end() && require_all) throw ValidationError("settings", "missing control '" + name + "'");
      v.values.push_back(it == settings.end() ? 0.0 : it->second);
    }
    c.push_back(std::move(v));
  }
  return c;
}

inline void check_state(const ModelSpec& spec, const ModelState& state) {
  if (state.stages.size() != spec.stages) throw ValidationError("stages", "stage count does not match S");
  for (std::size_t s = 0; s < spec.stages; ++s) {
    const std::size_t c = spec.controls(s);
    const auto field = "stages[" + std::to_string(s) + "]";
    if (c == 0) {
      const auto* fixed = std::get_if<FixedStageParams>(&state.stages[s]);
      if (!fixed) throw ValidationError(field, "expected a fixed stage");
      if (fixed->params.size() != spec.stage_width()) throw ValidationError(field, "wrong parameter count");
    } else {
      const auto* map = std::get_if<HyperMap>(&state.stages[s]);
      if (!map) throw ValidationError(field, "expected a hyperconditioned stage");
      if (map->rows != spec.stage_width() || map->cols != c || map->bias.size() != map->rows ||
          map->weights.size() != map->rows * map->cols)
        throw ValidationError(field, "hypermap shape does not match (1 + K P) x C_s");
    }
  }
}

inline void check_conditioning(const ModelSpec& spec, const Conditioning& cond) {
  if (cond.size() != spec.sites.size())
    throw ValidationError("conditioning", "expected " + std::to_string(spec.sites.size()) +
                                              " conditioning vectors, got " + std::to_string(cond.size()));
  for (std::size_t i = 0; i < cond.size(); ++i) {
    if (cond[i].values.size() != spec.sites[i].width())
      throw ValidationError("conditioning", "site " + std::to_string(i) + " expects " +
                                                std::to_string(spec.sites[i].width()) + " values");
    validate(cond[i]);
  }
}

template <std::uniform_random_bit_generator Rng>
ModelState init_state(const ModelSpec& spec, Rng& rng) {
  validate(spec);
  ModelState state;
  state.delay_raw = kInitDelayRaw;
  state.delay_gain = 1.0;
  for (std::size_t s = 0; s < spec.stages; ++s) {
    const std::size_t c = spec.controls(s);
    if (c == 0)
      state.stages.emplace_back(FixedStageParams{quiescent_raw(spec.representation, spec.sections)});
    else
      state.stages.emplace_back(init_hypermap(spec.representation, spec.sections, c, rng));
  }
  return state;
}

inline ModelState init_state(const ModelSpec& spec, unsigned long long seed) {
  std::mt19937_64 rng(seed);
  return init_state(spec, rng);
}

inline RawStageParams stage_raw(const ModelSpec& spec, const ModelState& state, std::size_t s,
                                const Conditioning& cond) {
  const auto site = spec.site_index(s);
  if (site < 0) return RawStageParams::from_flat(std::get<FixedStageParams>(state.stages[s]).params);
  return map_conditioning(std::get<HyperMap>(state.stages[s]), cond[static_cast<std::size_t>(site)]);
}

// Trainable scalars in serialization order: delay_raw, delay_gain, then per
// stage either the fixed vector or the bias followed by row-major weights.
inline std::vector<double> flatten(const ModelSpec& spec, const ModelState& state) {
  std::vector<double> out{state.delay_raw, state.delay_gain};
  for (std::size_t s = 0; s < spec.stages; ++s) {
    if (const auto* fixed = std::get_if<FixedStageParams>(&state.stages[s])) {
      out.insert(out.end(), fixed->params.begin(), fixed->params.end());
    } else {
      const auto& map = std::get<HyperMap>(state.stages[s]);
      out.insert(out.end(), map.bias.begin(), map.bias.end());
      out.insert(out.end(), map.weights.begin(), map.weights.end());
    }
  }
  return out;
}

inline ModelState unflatten(const ModelSpec& spec, std::span<const double> flat) {
  if (flat.size() != count_params(spec))
    throw ValidationError("parameters", "expected " + std::to_string(count_params(spec)) + " values, got " +
                                            std::to_string(flat.size()));
  ModelState state;
  state.delay_raw = flat[0];
  state.delay_gain = flat[1];
  std::size_t pos = 2;
  const std::size_t width = spec.stage_width();
  for (std::size_t s = 0; s < spec.stages; ++s) {
    const std::size_t c = spec.controls(s);
    if (c == 0) {
      state.stages.emplace_back(FixedStageParams{{flat.begin() + pos, flat.begin() + pos + width}});
      pos += width;
    } else {
      HyperMap map = HyperMap::zeros(width, c);
      std::copy_n(flat.begin() + pos, width, map.bias.begin());
      pos += width;
      std::copy_n(flat.begin() + pos, width * c, map.weights.begin());
      pos += width * c;
      state.stages.emplace_back(std::move(map));
    }
  }
  return state;
}

inline std::vector<std::string> parameter_names(const ModelSpec& spec) {
  std::vector<std::string> out{"delay_raw", "delay_gain"};
  const std::size_t width = spec.stage_width();
  for (std::size_t s = 0; s < spec.stages; ++s) {
    const std::string prefix = "stage" + std::to_string(s);
    const std::size_t c = spec.controls(s);
    const char* kind = c == 0 ? ".param[" : ".bias[";
    for (std::size_t r = 0; r < width; ++r) out.push_back(prefix + kind + std::to_string(r) + "]");
    for (std::size_t r = 0; r < width; ++r)
      for (std::size_t j = 0; j < c; ++j)
        out.push_back(prefix + ".weight[" + std::to_string(r) + "][" + std::to_string(j) + "]");
  }
  return out;
}

// Everything a forward pass needs once conditioning has been applied.
struct ForwardPlan {
  DelayTaps taps;
  double delay_gain = 1.0;
  std::vector<RealizedStage> stages;
};

inline ForwardPlan plan_forward(const ModelSpec& spec, const ModelState& state, const Conditioning& cond) {
  check_state(spec, state);
  check_conditioning(spec, cond);
  ForwardPlan plan;
  plan.taps = delay_taps(delay_samples(state.delay_raw));
  plan.delay_gain = state.delay_gain;
  for (std::size_t s = 0; s < spec.stages; ++s)
    plan.stages.push_back(p2c(spec.representation, stage_raw(spec, state, s, cond), spec.sample_rate));
  return plan;
}

inline std::vector<double> delay_layer(const ForwardPlan& plan, std::span<const double> x) {
  auto u = apply_delay(plan.taps, x);
  for (double& v : u) v *= plan.delay_gain;
  return u;
}

// Exact recursive inference path.
inline std::vector<double> run_time(const ForwardPlan& plan, std::span<const double> x) {
  auto u = delay_layer(plan, x);
  for (std::size_t s = 0; s < plan.stages.size(); ++s) {
    const auto& stage = plan.stages[s];
    cascade_filter_inplace(stage.sections, u);
    const bool last = s + 1 == plan.stages.size();
    for (double& v : u) v = last ? stage.linear_gain * v : std::tanh(stage.linear_gain * v);
  }
  return u;
}

inline AudioClip forward_time(const ModelSpec& spec, const ModelState& state, const AudioClip& x,
                              const Conditioning& cond) {
  return {run_time(plan_forward(spec, state, cond), x.samples), x.sample_rate};
}

// Linear filtering by frequency sampling: frames of `frame` samples are
// zero-padded to n, multiplied by `response` (n/2 + 1 bins) and overlap-added
// at hop `frame`. Output has the input's length.
inline std::vector<double> ola_filter(std::span<const Complex> response, std::span<const double> x, std::size_t n,
                                      std::size_t frame) {
  const auto& fft = RealFft::get(n);
  std::vector<double> out(x.size(), 0.0);
  std::vector<double> buf(n);
  std::vector<Complex> spec(fft.bins());
  for (std::size_t start = 0; start < x.size(); start += frame) {
    const std::size_t len = std::min(frame, x.size() - start);
    std::fill(buf.begin(), buf.end(), 0.0);
    std::copy_n(x.begin() + start, len, buf.begin());
    fft.forward(buf, spec);
    for (std::size_t k = 0; k < spec.size(); ++k) spec[k] *= response[k];
    fft.inverse(spec, buf);
    const std::size_t span = std::min(n, x.size() - start);
    for (std::size_t m = 0; m < span; ++m) out[start + m] += buf[m];
  }
  return out;
}

inline void check_fft_framing(std::size_t n, std::size_t frame) {
  if (!is_power_of_two(n) || n < 4) throw DomainError("FFT size must be a power of two >= 4");
  if (frame == 0 || 2 * frame > n) throw DomainError("FFT size must be at least twice the frame length");
}

// Intermediate signals of a frequency-sampled forward pass, kept for the
// reverse pass.
struct FreqTrace {
  std::vector<double> delayed;                // delay layer output before the gain
  std::vector<ComplexResponse> responses;     // cascade response per stage
  std::vector<std::vector<double>> filtered;  // stage filter output before the gain
  std::vector<std::vector<double>> outputs;   // stage outputs; outputs.back() is the model output
};

inline FreqTrace run_freq(const ForwardPlan& plan, std::span<const double> x, std::size_t n, std::size_t frame) {
  check_fft_framing(n, frame);
  const FrequencyGrid grid(n);
  FreqTrace trace;
  trace.delayed = apply_delay(plan.taps, x);
  std::vector<double> u = trace.delayed;
  for (double& v : u) v *= plan.delay_gain;
  for (std::size_t s = 0; s < plan.stages.size(); ++s) {
    const auto& stage = plan.stages[s];
    trace.responses.push_back(cascade_response(stage.sections, grid));
    trace.filtered.push_back(ola_filter(trace.responses.back(), u, n, frame));
    const bool last = s + 1 == plan.stages.size();
    for (std::size_t i = 0; i < u.size(); ++i) {
      const double w = stage.linear_gain * trace.filtered.back()[i];
      u[i] = last ? w : std::tanh(w);
    }
    trace.outputs.push_back(u);
  }
  return trace;
}

// Frequency-sampled forward pass used for training; frame defaults to n / 2.
inline AudioClip forward_freq(const ModelSpec& spec, const ModelState& state, const AudioClip& x,
                              const Conditioning& cond, std::size_t n, std::size_t frame = 0) {
  if (frame == 0) frame = n / 2;
  auto trace = run_freq(plan_forward(spec, state, cond), x.samples, n, frame);
  return {std::move(trace.outputs.back()), x.sample_rate};
}

}  // namespace dbq
