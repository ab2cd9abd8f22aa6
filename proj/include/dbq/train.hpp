#pragma once

// Training through the frequency-sampled forward pass: batch MSE, exact
// reverse-mode gradients via hand-written adjoints of the fixed pipeline,
// ADAM, the fit loop and a central-difference gradient checker.

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "dbq/biquad.hpp"
#include "dbq/error.hpp"
#include "dbq/fft.hpp"
#include "dbq/model.hpp"
#include "dbq/representation.hpp"

namespace dbq {

struct TrainConfig {
  std::size_t epochs = 100;
  std::size_t batch_size = 16;
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t fft_size = 4096;
  std::size_t frame = 0;  // 0 selects fft_size / 2
  double clip_seconds = 1.0;
  std::uint64_t seed = 0;
  double validation_fraction = 0.1;
  std::size_t threads = 0;  // 0 selects hardware concurrency

  std::size_t frame_length() const { return frame == 0 ? fft_size / 2 : frame; }
};

inline void validate(const TrainConfig& c) {
  if (c.batch_size == 0) throw ValidationError("batch_size", "must be positive");
  if (!(c.learning_rate > 0.0)) throw ValidationError("learning_rate", "must be positive");
  if (!(c.adam_beta1 >= 0.0 && c.adam_beta1 < 1.0)) throw ValidationError("adam_beta1", "must lie in [0, 1)");
  if (!(c.adam_beta2 >= 0.0 && c.adam_beta2 < 1.0)) throw ValidationError("adam_beta2", "must lie in [0, 1)");
  if (!(c.adam_eps > 0.0)) throw ValidationError("adam_eps", "must be positive");
  if (!is_power_of_two(c.fft_size) || c.fft_size < 4) throw ValidationError("fft_size", "must be a power of two");
  if (2 * c.frame_length() > c.fft_size) throw ValidationError("frame", "must be at most fft_size / 2");
  if (!(c.clip_seconds > 0.0)) throw ValidationError("clip_seconds", "must be positive");
  if (!(c.validation_fraction >= 0.0 && c.validation_fraction < 1.0))
    throw ValidationError("validation_fraction", "must lie in [0, 1)");
}

// One training pair with its conditioning already resolved.
struct Example {
  std::vector<double> input;
  std::vector<double> target;
  Conditioning conditioning;
};

inline double mse_loss(std::span<const double> y_hat, std::span<const double> y) {
  if (y_hat.size() != y.size()) throw DomainError("mse_loss: length mismatch");
  if (y.empty()) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double e = y_hat[i] - y[i];
    acc += e * e;
  }
  return acc / static_cast<double>(y.size());
}

// d mse / d y_hat = 2 (y_hat - y) / M
inline std::vector<double> mse_loss_grad(std::span<const double> y_hat, std::span<const double> y) {
  if (y_hat.size() != y.size()) throw DomainError("mse_loss: length mismatch");
  std::vector<double> g(y.size());
  const double scale = 2.0 / static_cast<double>(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) g[i] = scale * (y_hat[i] - y[i]);
  return g;
}

// Mean of per-clip MSEs.
inline double batch_mse(std::span<const std::vector<double>> y_hat, std::span<const std::vector<double>> y) {
  if (y_hat.size() != y.size()) throw DomainError("batch_mse: batch size mismatch");
  if (y.empty()) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) acc += mse_loss(y_hat[i], y[i]);
  return acc / static_cast<double>(y.size());
}

struct LossAndGradient {
  double loss = 0.0;
  std::vector<double> gradient;  // serialization order, see flatten()
};

namespace detail {

// Offsets of each stage's block inside the flat parameter vector.
inline std::vector<std::size_t> stage_offsets(const ModelSpec& spec) {
  std::vector<std::size_t> out;
  std::size_t pos = 2;
  for (std::size_t s = 0; s < spec.stages; ++s) {
    out.push_back(pos);
    pos += spec.stage_width() * (1 + spec.controls(s));
  }
  return out;
}

// Gradient of the section coefficients given the adjoint of the cascade
// response. Section k receives H_bar * conj(prod_{i != k} H_i), built from
// prefix and suffix products so no division by a section response is needed.
inline std::vector<std::array<double, 5>> section_coefficient_grads(std::span<const BiquadCoeffs> sections,
                                                                    std::span<const Complex> h_bar,
                                                                    const FrequencyGrid& grid) {
  const std::size_t count = sections.size();
  const std::size_t bins = grid.bin_count();
  std::vector<std::vector<Complex>> num(count, std::vector<Complex>(bins));
  std::vector<std::vector<Complex>> den(count, std::vector<Complex>(bins));
  std::vector<BinPhasors> phasors;
  phasors.reserve(bins);
  for (std::size_t i = 0; i < bins; ++i) phasors.emplace_back(grid.omega(i));
  for (std::size_t k = 0; k < count; ++k) {
    const auto& c = sections[k];
    for (std::size_t i = 0; i < bins; ++i) {
      num[k][i] = c.b0 + c.b1 * phasors[i].z1 + c.b2 * phasors[i].z2;
      den[k][i] = 1.0 + c.a1 * phasors[i].z1 + c.a2 * phasors[i].z2;
    }
  }
  std::vector<std::array<double, 5>> grads(count, {0, 0, 0, 0, 0});
  std::vector<Complex> prefix(bins, Complex(1.0));
  std::vector<std::vector<Complex>> suffixes(count + 1, std::vector<Complex>(bins, Complex(1.0)));
  for (std::size_t k = count; k-- > 0;)
    for (std::size_t i = 0; i < bins; ++i) suffixes[k][i] = suffixes[k + 1][i] * (num[k][i] / den[k][i]);
  for (std::size_t k = 0; k < count; ++k) {
    auto& g = grads[k];
    for (std::size_t i = 0; i < bins; ++i) {
      const Complex others = prefix[i] * suffixes[k + 1][i];
      const Complex hk_bar = h_bar[i] * std::conj(others);
      const Complex inv_den = 1.0 / den[k][i];
      const Complex hk = num[k][i] * inv_den;
      // dH/db_m = z^m / A, dH/da_m = -H z^m / A
      const Complex w = std::conj(hk_bar) * inv_den;
      g[0] += w.real();
      g[1] += (w * phasors[i].z1).real();
      g[2] += (w * phasors[i].z2).real();
      g[3] -= (w * hk * phasors[i].z1).real();
      g[4] -= (w * hk * phasors[i].z2).real();
      prefix[i] *= hk;
    }
  }
  return grads;
}

// Loss and gradient of a single example's MSE.
inline LossAndGradient example_backward(const ModelSpec& spec, const ModelState& state, const Example& ex,
                                        std::size_t n, std::size_t frame) {
  check_conditioning(spec, ex.conditioning);
  if (ex.input.size() != ex.target.size()) throw DomainError("example input and target lengths differ");

  std::vector<StageJacobian> jacs;
  std::vector<RawStageParams> raws;
  ForwardPlan plan;
  plan.taps = delay_taps(delay_samples(state.delay_raw));
  plan.delay_gain = state.delay_gain;
  for (std::size_t s = 0; s < spec.stages; ++s) {
    raws.push_back(stage_raw(spec, state, s, ex.conditioning));
    jacs.push_back(p2c_with_jacobian(spec.representation, raws.back(), spec.sample_rate));
    plan.stages.push_back(jacs.back().stage);
  }
  const FreqTrace trace = run_freq(plan, ex.input, n, frame);
  const auto& y = trace.outputs.back();

  LossAndGradient out;
  out.loss = mse_loss(y, ex.target);
  out.gradient.assign(count_params(spec), 0.0);
  const auto offsets = stage_offsets(spec);

  const auto& fft = RealFft::get(n);
  const FrequencyGrid grid(n);
  const std::size_t bins = fft.bins();
  const std::size_t len = y.size();

  std::vector<double> u_bar = mse_loss_grad(y, ex.target);
  std::vector<double> w_bar(len), buf(n), input_frame(n);
  std::vector<Complex> v_spec(bins), x_spec(bins), tmp(bins);
  std::vector<Complex> h_bar(bins);
  std::vector<double> scaled_input;

  for (std::size_t s = spec.stages; s-- > 0;) {
    const auto& jac = jacs[s];
    const double gain = jac.stage.linear_gain;
    const bool last = s + 1 == spec.stages;
    const auto& u = trace.outputs[s];
    const auto& filtered = trace.filtered[s];

    double gain_bar = 0.0;
    for (std::size_t i = 0; i < len; ++i) {
      const double wb = last ? u_bar[i] : u_bar[i] * (1.0 - u[i] * u[i]);
      gain_bar += wb * filtered[i];
      w_bar[i] = gain * wb;  // adjoint of the filter output
    }

    // Input of this stage.
    const std::vector<double>* input = nullptr;
    if (s > 0) {
      input = &trace.outputs[s - 1];
    } else {
      scaled_input = trace.delayed;
      for (double& v : scaled_input) v *= plan.delay_gain;
      input = &scaled_input;
    }

    // Adjoint of overlap-add frequency-sampled filtering.
    const auto& response = trace.responses[s];
    std::fill(h_bar.begin(), h_bar.end(), Complex(0.0));
    std::vector<double> in_bar(len, 0.0);
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t start = 0; start < len; start += frame) {
      const std::size_t flen = std::min(frame, len - start);
      const std::size_t span = std::min(n, len - start);
      std::fill(buf.begin(), buf.end(), 0.0);
      std::copy_n(w_bar.begin() + start, span, buf.begin());
      fft.forward(buf, v_spec);
      std::fill(input_frame.begin(), input_frame.end(), 0.0);
      std::copy_n(input->begin() + start, flen, input_frame.begin());
      fft.forward(input_frame, x_spec);
      for (std::size_t k = 0; k < bins; ++k) {
        const double weight = (k == 0 || k + 1 == bins) ? inv_n : 2.0 * inv_n;
        h_bar[k] += std::conj(x_spec[k]) * v_spec[k] * weight;
        tmp[k] = std::conj(response[k]) * v_spec[k];
      }
      fft.inverse(tmp, buf);
      for (std::size_t m = 0; m < flen; ++m) in_bar[start + m] += buf[m];
    }

    // Response adjoint -> section coefficients -> raw stage vector.
    const auto coef_bar = section_coefficient_grads(jac.stage.sections, h_bar, grid);
    std::vector<double> raw_bar(jac.width, 0.0);
    raw_bar[0] += gain_bar * jac.gain;
    for (std::size_t k = 0; k < coef_bar.size(); ++k)
      for (std::size_t c = 0; c < 5; ++c) {
        const double cb = coef_bar[k][c];
        if (cb == 0.0) continue;
        for (std::size_t j = 0; j < jac.width; ++j) raw_bar[j] += cb * jac.at(k, c, j);
      }

    const std::size_t off = offsets[s];
    for (std::size_t r = 0; r < jac.width; ++r) out.gradient[off + r] += raw_bar[r];
    const auto site = spec.site_index(s);
    if (site >= 0) {
      const auto& c = ex.conditioning[static_cast<std::size_t>(site)].values;
      const std::size_t cols = c.size();
      for (std::size_t r = 0; r < jac.width; ++r)
        for (std::size_t j = 0; j < cols; ++j) out.gradient[off + jac.width + r * cols + j] += raw_bar[r] * c[j];
    }
    u_bar = std::move(in_bar);
  }

  // Delay layer: u = g * ((1 - frac) x[n - w] + frac x[n - w - 1]).
  double gain_bar = 0.0, frac_bar = 0.0;
  const std::size_t whole = plan.taps.whole;
  for (std::size_t i = 0; i < len; ++i) {
    gain_bar += u_bar[i] * trace.delayed[i];
    if (i < whole) continue;
    const double cur = ex.input[i - whole];
    const double prev = i > whole ? ex.input[i - whole - 1] : 0.0;
    frac_bar += plan.delay_gain * u_bar[i] * (prev - cur);
  }
  const double sig = sigmoid(state.delay_raw);
  out.gradient[0] = frac_bar * kMaxDelaySamples * sig * (1.0 - sig);
  out.gradient[1] = gain_bar;
  return out;
}

inline std::size_t resolve_threads(std::size_t requested, std::size_t work) {
  std::size_t t = requested == 0 ? std::max<std::size_t>(1, std::thread::hardware_concurrency()) : requested;
  return std::max<std::size_t>(1, std::min(t, work));
}

// Runs fn(i) for i in [0, count) on a small worker pool. Results must be
// written to per-index slots by the callee.
template <typename Fn>
void parallel_for(std::size_t count, std::size_t threads, Fn&& fn) {
  threads = resolve_threads(threads, count);
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = next++; i < count; i = next++) fn(i);
      } catch (...) {
        errors[t] = std::current_exception();
        next = count;
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace detail

// Loss (mean of per-clip MSEs) and its exact gradient through the
// frequency-sampled forward pass. Per-example work may run in parallel; the
// reduction order is fixed.
inline LossAndGradient backward(const ModelSpec& spec, const ModelState& state, std::span<const Example> batch,
                                const TrainConfig& config) {
  if (batch.empty()) throw DomainError("backward: empty batch");
  check_state(spec, state);
  const std::size_t n = config.fft_size;
  const std::size_t frame = config.frame_length();
  check_fft_framing(n, frame);
  std::vector<LossAndGradient> parts(batch.size());
  detail::parallel_for(batch.size(), config.threads,
                       [&](std::size_t i) { parts[i] = detail::example_backward(spec, state, batch[i], n, frame); });
  LossAndGradient out;
  out.gradient.assign(count_params(spec), 0.0);
  const double scale = 1.0 / static_cast<double>(batch.size());
  for (const auto& p : parts) {
    out.loss += p.loss * scale;
    for (std::size_t j = 0; j < p.gradient.size(); ++j) out.gradient[j] += p.gradient[j] * scale;
  }
  for (std::size_t j = 0; j < out.gradient.size(); ++j)
    if (!std::isfinite(out.gradient[j])) throw NonFiniteGradient(parameter_names(spec)[j], j);
  return out;
}

// Loss only, through the same frequency-sampled path.
inline double freq_loss(const ModelSpec& spec, const ModelState& state, std::span<const Example> batch,
                        const TrainConfig& config) {
  std::vector<double> parts(batch.size());
  detail::parallel_for(batch.size(), config.threads, [&](std::size_t i) {
    const auto plan = plan_forward(spec, state, batch[i].conditioning);
    const auto trace = run_freq(plan, batch[i].input, config.fft_size, config.frame_length());
    parts[i] = mse_loss(trace.outputs.back(), batch[i].target);
  });
  double acc = 0.0;
  for (double p : parts) acc += p;
  return batch.empty() ? 0.0 : acc / static_cast<double>(batch.size());
}

// Mean per-clip MSE of the exact recursive inference path.
inline double time_loss(const ModelSpec& spec, const ModelState& state, std::span<const Example> batch,
                        std::size_t threads = 0) {
  std::vector<double> parts(batch.size());
  detail::parallel_for(batch.size(), threads, [&](std::size_t i) {
    const auto plan = plan_forward(spec, state, batch[i].conditioning);
    parts[i] = mse_loss(run_time(plan, batch[i].input), batch[i].target);
  });
  double acc = 0.0;
  for (double p : parts) acc += p;
  return batch.empty() ? 0.0 : acc / static_cast<double>(batch.size());
}

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::size_t step = 0;
};

// Bias-corrected ADAM update of the flat parameter vector.
inline void adam_step(std::vector<double>& params, std::span<const double> grads, AdamState& opt,
                      const TrainConfig& config) {
  if (grads.size() != params.size()) throw DomainError("adam_step: gradient size mismatch");
  if (opt.m.size() != params.size()) {
    opt.m.assign(params.size(), 0.0);
    opt.v.assign(params.size(), 0.0);
    opt.step = 0;
  }
  ++opt.step;
  const double b1 = config.adam_beta1, b2 = config.adam_beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(opt.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(opt.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    opt.m[i] = b1 * opt.m[i] + (1.0 - b1) * grads[i];
    opt.v[i] = b2 * opt.v[i] + (1.0 - b2) * grads[i] * grads[i];
    params[i] -= config.learning_rate * (opt.m[i] / c1) / (std::sqrt(opt.v[i] / c2) + config.adam_eps);
  }
}

inline ModelState adam_step(const ModelSpec& spec, const ModelState& state, std::span<const double> grads,
                            AdamState& opt, const TrainConfig& config) {
  auto flat = flatten(spec, state);
  adam_step(flat, grads, opt, config);
  return unflatten(spec, flat);
}

struct EpochRecord {
  std::size_t epoch = 0;
  double train_mse = 0.0;
  double val_mse = 0.0;  // NaN without a held-out split
};

struct FitResult {
  ModelState state;
  AdamState optimizer;
  std::vector<EpochRecord> history;
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> val_indices;
  bool diverged = false;
  std::string divergence_reason;
};

// Seeded split by clip: floor(fraction * n) held-out examples.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t count, double fraction,
                                                                                 std::uint64_t seed) {
  std::vector<std::size_t> idx(count);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed ^ 0x5eedULL);
  std::shuffle(idx.begin(), idx.end(), rng);
  std::size_t val = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(count)));
  if (val >= count) val = count - 1;
  std::vector<std::size_t> held(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(val));
  std::vector<std::size_t> train(idx.begin() + static_cast<std::ptrdiff_t>(val), idx.end());
  std::sort(held.begin(), held.end());
  std::sort(train.begin(), train.end());
  return {train, held};
}

using EpochCallback = std::function<void(const EpochRecord&, const ModelState&, const AdamState&)>;

// Mini-batch ADAM over the training split starting from `initial`. Validation
// uses the exact recursive path. A non-finite loss or gradient stops training
// and returns the last good state.
inline FitResult fit(const ModelSpec& spec, ModelState initial, std::span<const Example> dataset,
                     const TrainConfig& config, const EpochCallback& on_epoch = {}, AdamState optimizer = {}) {
  validate(spec);
  validate(config);
  if (dataset.empty()) throw DomainError("fit: dataset is empty");
  check_state(spec, initial);

  FitResult result;
  std::tie(result.train_indices, result.val_indices) =
      split_indices(dataset.size(), config.validation_fraction, config.seed);
  std::vector<Example> val;
  for (auto i : result.val_indices) val.push_back(dataset[i]);

  result.state = std::move(initial);
  result.optimizer = std::move(optimizer);
  auto params = flatten(spec, result.state);
  std::mt19937_64 rng(config.seed);
  auto order = result.train_indices;
  std::vector<Example> batch;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double weighted = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(dataset[order[i]]);
      LossAndGradient lg;
      try {
        lg = backward(spec, result.state, batch, config);
      } catch (const Error& e) {
        result.diverged = true;
        result.divergence_reason = e.what();
        return result;
      }
      if (!std::isfinite(lg.loss)) {
        result.diverged = true;
        result.divergence_reason = "non-finite training loss";
        return result;
      }
      weighted += lg.loss * static_cast<double>(end - start);
      auto next = params;
      adam_step(next, lg.gradient, result.optimizer, config);
      try {
        auto candidate = unflatten(spec, next);
        plan_forward(spec, candidate, batch.front().conditioning);
        result.state = std::move(candidate);
        params = std::move(next);
      } catch (const Error& e) {
        result.diverged = true;
        result.divergence_reason = e.what();
        return result;
      }
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_mse = weighted / static_cast<double>(order.size());
    rec.val_mse = val.empty() ? std::numeric_limits<double>::quiet_NaN()
                              : time_loss(spec, result.state, val, config.threads);
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec, result.state, result.optimizer);
  }
  return result;
}

inline FitResult fit(const ModelSpec& spec, std::span<const Example> dataset, const TrainConfig& config,
                     const EpochCallback& on_epoch = {}) {
  return fit(spec, init_state(spec, config.seed), dataset, config, on_epoch);
}

struct GradCheckEntry {
  std::string name;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
  bool smooth = true;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_error = 0.0;   // over smooth parameters
  std::size_t excluded = 0;     // parameters at a kink
  bool passed = true;
  double tolerance = 1e-3;
};

inline constexpr double kGradCheckStep = 1e-4;
inline constexpr double kGradCheckTolerance = 1e-3;
// Entries are compared relative to max(|analytic|, |numeric|, floor), with the
// floor a fixed fraction of the largest gradient magnitude.
inline constexpr double kGradCheckFloor = 1e-6;

// Branch indicators of every piecewise operation in the model for the given
// conditioning. A parameter whose +/- step changes the signature sits on a kink.
inline std::vector<long> model_kink_signature(const ModelSpec& spec, const ModelState& state,
                                              std::span<const Example> batch) {
  std::vector<long> sig;
  const double d = delay_samples(state.delay_raw);
  sig.push_back(static_cast<long>(std::floor(d)));
  sig.push_back(d == std::floor(d) ? 1 : 0);
  for (const auto& ex : batch)
    for (std::size_t s = 0; s < spec.stages; ++s) {
      const auto k = kink_signature(spec.representation, stage_raw(spec, state, s, ex.conditioning), spec.sample_rate);
      sig.insert(sig.end(), k.begin(), k.end());
    }
  return sig;
}

// Compares backward() against central differences of the same loss with a
// relative step of 1e-4. Parameters at a kink are reported and excluded.
inline GradCheckReport grad_check(const ModelSpec& spec, const ModelState& state, std::span<const Example> batch,
                                  const TrainConfig& config) {
  GradCheckReport report;
  report.tolerance = kGradCheckTolerance;
  const auto analytic = backward(spec, state, batch, config).gradient;
  const auto base = flatten(spec, state);
  const auto names = parameter_names(spec);
  const auto base_sig = model_kink_signature(spec, state, batch);

  TrainConfig serial = config;
  std::vector<double> numeric(base.size());
  std::vector<char> smooth(base.size(), 1);
  for (std::size_t j = 0; j < base.size(); ++j) {
    const double h = kGradCheckStep * std::max(1.0, std::abs(base[j]));
    auto plus = base, minus = base;
    plus[j] += h;
    minus[j] -= h;
    const auto sp = unflatten(spec, plus), sm = unflatten(spec, minus);
    if (model_kink_signature(spec, sp, batch) != base_sig || model_kink_signature(spec, sm, batch) != base_sig)
      smooth[j] = 0;
    numeric[j] = (freq_loss(spec, sp, batch, serial) - freq_loss(spec, sm, batch, serial)) / (2.0 * h);
  }

  double scale = 0.0;
  for (std::size_t j = 0; j < base.size(); ++j)
    if (smooth[j]) scale = std::max({scale, std::abs(analytic[j]), std::abs(numeric[j])});
  const double floor = std::max(kGradCheckFloor * scale, std::numeric_limits<double>::min());

  for (std::size_t j = 0; j < base.size(); ++j) {
    GradCheckEntry e;
    e.name = names[j];
    e.analytic = analytic[j];
    e.numeric = numeric[j];
    e.smooth = smooth[j] != 0;
    e.rel_error = std::abs(e.analytic - e.numeric) / std::max({std::abs(e.analytic), std::abs(e.numeric), floor});
    if (e.smooth) {
      report.max_rel_error = std::max(report.max_rel_error, e.rel_error);
      if (e.rel_error > report.tolerance) report.passed = false;
    } else {
      ++report.excluded;
    }
    report.entries.push_back(std::move(e));
  }
  return report;
}

}  // namespace dbq
