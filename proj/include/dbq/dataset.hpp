#pragma once

// Dataset creation and ingestion: the reference "teacher" effect, synthetic
// guitar-like source clips, rendering of random control settings, and the
// manifest format for externally measured WAV pairs.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "dbq/biquad.hpp"
#include "dbq/error.hpp"
#include "dbq/model.hpp"
#include "dbq/train.hpp"
#include "dbq/wav.hpp"

namespace dbq {

using Settings = std::map<std::string, double>;

struct DatasetRecord {
  AudioClip input;
  AudioClip target;
  Settings settings;
  std::size_t segment = 0;  // index of the source segment the input came from
};

struct Teacher {
  ModelSpec spec;
  ModelState state;
};

namespace detail {

struct EqBand {
  double freq_hz;
  double gain_db;
  double q;
};

inline double logit(double p) { return std::log(p / (1.0 - p)); }

// Raw parametric-EQ stage vector realizing the given bands exactly.
inline std::vector<double> eq_stage_raw(double gain_db, const std::vector<EqBand>& bands, double sample_rate) {
  const std::size_t count = bands.size();
  std::vector<double> raw{gain_db};
  double prev = 0.0;
  for (std::size_t k = 0; k < count; ++k) {
    const double step = (bands[k].freq_hz - prev) * static_cast<double>(count) / sample_rate;
    if (step < 0.0 || step > 0.5) throw DomainError("teacher bands violate the frequency ordering");
    prev = bands[k].freq_hz;
    const double q_max = eq_q_max(k, count);
    raw.push_back(step);
    raw.push_back(bands[k].gain_db);
    raw.push_back(logit((bands[k].q - kMinQ) / (q_max - kMinQ)));
  }
  return raw;
}

}  // namespace detail

// Reference effect standing in for a circuit simulation of a distortion pedal.
// Parametric EQ, S = 5, K = 4, 44.1 kHz:
//   stage 0  input buffer        fixed, +6 dB
//   stage 1  DIST                gain 10 + 24 DIST dB into the main clipper
//   stage 2  post-clip voicing   fixed, 0 dB
//   stage 3  LOW / HIGH tone     shelf gains -9 + 18 LOW and -9 + 18 HIGH dB
//   stage 4  LEVEL               flat filters, gain -20 + 20 LEVEL dB, no tanh
inline Teacher make_teacher() {
  const double fs = 44100.0;
  Teacher t;
  t.spec.stages = 5;
  t.spec.sections = 4;
  t.spec.representation = Representation::ParametricEq;
  t.spec.sample_rate = fs;
  t.spec.sites = {{1, {"DIST"}}, {3, {"LOW", "HIGH"}}, {4, {"LEVEL"}}};

  using detail::EqBand;
  const auto raw0 = detail::eq_stage_raw(
      6.0, {{120.0, -4.0, 0.7}, {700.0, 3.0, 0.8}, {2500.0, 4.0, 1.0}, {7000.0, -6.0, 0.7}}, fs);
  const auto raw1 = detail::eq_stage_raw(
      10.0, {{200.0, -8.0, 0.7}, {720.0, 6.0, 1.2}, {1800.0, 2.0, 0.9}, {5000.0, -4.0, 0.7}}, fs);
  const auto raw2 = detail::eq_stage_raw(
      0.0, {{100.0, 3.0, 0.7}, {1200.0, -4.0, 1.5}, {4000.0, -5.0, 0.8}, {8000.0, -10.0, 0.7}}, fs);
  const auto raw3 = detail::eq_stage_raw(
      2.0, {{150.0, -9.0, 0.7}, {500.0, -2.0, 1.0}, {2800.0, 2.0, 1.0}, {4200.0, -9.0, 0.7}}, fs);
  auto raw4 = quiescent_raw(Representation::ParametricEq, 4);
  raw4[0] = -20.0;

  const auto hyper = [](const std::vector<double>& bias, std::size_t cols) {
    HyperMap m = HyperMap::zeros(bias.size(), cols);
    m.bias = bias;
    return m;
  };
  HyperMap dist = hyper(raw1, 1);
  dist.weight(0, 0) = 24.0;
  HyperMap tone = hyper(raw3, 2);
  tone.weight(1 + 0 * 3 + 1, 0) = 18.0;  // low shelf gain <- LOW
  tone.weight(1 + 3 * 3 + 1, 1) = 18.0;  // high shelf gain <- HIGH
  HyperMap level = hyper(raw4, 1);
  level.weight(0, 0) = 20.0;

  t.state.delay_raw = -1000.0;  // zero latency
  t.state.delay_gain = 1.0;
  t.state.stages = {FixedStageParams{raw0}, dist, FixedStageParams{raw2}, tone, level};
  validate(t.spec);
  check_state(t.spec, t.state);
  return t;
}

inline AudioClip render_teacher(const Teacher& teacher, const AudioClip& x, const Settings& settings) {
  return forward_time(teacher.spec, teacher.state, x, conditioning_from_settings(teacher.spec, settings, true));
}

// Deterministic pseudo-guitar clips: one to three plucked notes, each a sum of
// exponentially decaying harmonics with a fundamental in [80, 400] Hz, plus
// low-level noise. Every clip is peak-normalized to 0.5.
inline std::vector<AudioClip> synth_source_clips(std::size_t count, std::uint64_t seed, double seconds = 1.0,
                                                 double sample_rate = 44100.0) {
  std::vector<AudioClip> clips;
  const auto length = static_cast<std::size_t>(std::llround(seconds * sample_rate));
  for (std::size_t c = 0; c < count; ++c) {
    std::mt19937_64 rng(seed * 0x9E3779B97F4A7C15ULL + c);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<double> x(length, 0.0);
    const int notes = 1 + static_cast<int>(unit(rng) * 3.0) % 3;
    for (int note = 0; note < notes; ++note) {
      const double f0 = 80.0 * std::pow(5.0, unit(rng));
      const auto onset = static_cast<std::size_t>(unit(rng) * 0.6 * static_cast<double>(length)) * (note > 0);
      const double tau = 0.2 + 1.0 * unit(rng);
      const double brightness = 0.6 + 0.8 * unit(rng);
      const double velocity = 0.5 + 0.5 * unit(rng);
      for (int h = 1; h <= 40 && h * f0 < 0.45 * sample_rate; ++h) {
        const double amp = velocity * (0.5 + 0.5 * unit(rng)) / std::pow(h, brightness);
        const double decay = tau / (1.0 + 0.25 * h);
        const double phase = 2.0 * std::numbers::pi * unit(rng);
        const double inharm = 1.0 + 1e-4 * h * h;
        const double w = 2.0 * std::numbers::pi * f0 * h * inharm / sample_rate;
        for (std::size_t n = onset; n < length; ++n) {
          const double t = static_cast<double>(n - onset) / sample_rate;
          const double attack = std::min(1.0, t / 0.002);
          x[n] += attack * amp * std::exp(-t / decay) * std::sin(w * static_cast<double>(n - onset) + phase);
        }
      }
    }
    for (double& v : x) v += 1e-3 * gauss(rng);
    double peak = 0.0;
    for (double v : x) peak = std::max(peak, std::abs(v));
    if (peak > 0.0)
      for (double& v : x) v *= 0.5 / peak;
    clips.push_back({std::move(x), sample_rate});
  }
  return clips;
}

// Segments every source clip into clip_seconds pieces and renders each piece
// through the teacher at `settings_per_clip` uniformly drawn control settings.
// Inputs are rounded to float32 so that WAV storage is lossless.
inline std::vector<DatasetRecord> generate_dataset(const Teacher& teacher, const std::vector<AudioClip>& sources,
                                                   std::size_t settings_per_clip, std::uint64_t seed,
                                                   double clip_seconds = 1.0, std::size_t threads = 0) {
  if (sources.empty()) throw DomainError("generate_dataset: no source clips");
  const double fs = teacher.spec.sample_rate;
  const auto seg_len = static_cast<std::size_t>(std::llround(clip_seconds * fs));
  if (seg_len == 0) throw DomainError("generate_dataset: clip length is zero");

  std::vector<AudioClip> segments;
  for (const auto& src : sources) {
    if (src.sample_rate != fs)
      throw DomainError("generate_dataset: source sample rate " + std::to_string(src.sample_rate) +
                        " differs from teacher rate " + std::to_string(fs));
    for (std::size_t start = 0; start + seg_len <= src.samples.size(); start += seg_len) {
      AudioClip seg{{src.samples.begin() + static_cast<std::ptrdiff_t>(start),
                     src.samples.begin() + static_cast<std::ptrdiff_t>(start + seg_len)},
                    fs};
      for (double& v : seg.samples) v = static_cast<float>(v);
      segments.push_back(std::move(seg));
    }
  }

  const auto names = teacher.spec.control_names();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<DatasetRecord> records;
  for (std::size_t s = 0; s < segments.size(); ++s)
    for (std::size_t k = 0; k < settings_per_clip; ++k) {
      DatasetRecord rec;
      rec.input = segments[s];
      rec.segment = s;
      for (const auto& name : names) rec.settings[name] = unit(rng);
      records.push_back(std::move(rec));
    }
  detail::parallel_for(records.size(), threads, [&](std::size_t i) {
    records[i].target = render_teacher(teacher, records[i].input, records[i].settings);
  });
  return records;
}

inline std::vector<Example> to_examples(const ModelSpec& spec, const std::vector<DatasetRecord>& records) {
  std::vector<Example> out;
  out.reserve(records.size());
  for (const auto& r : records)
    out.push_back({r.input.samples, r.target.samples, conditioning_from_settings(spec, r.settings, true)});
  return out;
}

inline constexpr const char* kManifestHeader = "dbq-manifest 1";

namespace detail {

inline std::string format_settings(const Settings& settings) {
  std::ostringstream ss;
  ss.precision(17);
  bool first = true;
  for (const auto& [name, value] : settings) {
    ss << (first ? "" : ",") << name << '=' << value;
    first = false;
  }
  return ss.str();
}

}  // namespace detail

// Writes inputs (one file per segment), targets and manifest.txt into `dir`.
// Returns the manifest path.
inline std::string write_dataset(const std::string& dir, const std::vector<DatasetRecord>& records) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::ofstream manifest(fs::path(dir) / "manifest.txt");
  if (!manifest) throw Error("cannot write manifest in " + dir);
  manifest << kManifestHeader << '\n';
  std::map<std::size_t, std::string> written;
  char name[64];
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    auto it = written.find(r.segment);
    if (it == written.end()) {
      std::snprintf(name, sizeof name, "input_%05zu.wav", r.segment);
      write_wav((fs::path(dir) / name).string(), r.input, WavFormat::Float32);
      it = written.emplace(r.segment, name).first;
    }
    std::snprintf(name, sizeof name, "target_%05zu.wav", i);
    write_wav((fs::path(dir) / name).string(), r.target, WavFormat::Float32);
    manifest << it->second << '\t' << name << '\t' << detail::format_settings(r.settings) << '\n';
  }
  if (!manifest) throw Error("manifest write failed in " + dir);
  return (fs::path(dir) / "manifest.txt").string();
}

// Reads a manifest of (input wav, target wav, settings) lines. Paths are
// relative to the manifest. Pairs whose lengths differ by one sample are
// trimmed to the shorter length; larger mismatches are rejected.
inline std::vector<DatasetRecord> ingest_wav_pairs(const std::string& manifest_path) {
  namespace fs = std::filesystem;
  std::ifstream in(manifest_path);
  if (!in) throw ValidationError("manifest", "cannot open " + manifest_path);
  const fs::path base = fs::path(manifest_path).parent_path();
  std::string line;
  if (!std::getline(in, line) || line != kManifestHeader)
    throw ValidationError("manifest", "missing header '" + std::string(kManifestHeader) + "'");

  std::vector<DatasetRecord> records;
  std::map<std::string, std::pair<std::size_t, AudioClip>> inputs;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = "record at line " + std::to_string(line_no);
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, '\t')) fields.push_back(f);
    if (fields.size() == 2) fields.emplace_back();
    if (fields.size() != 3) throw ValidationError(where, "expected input<TAB>target<TAB>settings");

    DatasetRecord rec;
    std::stringstream st(fields[2]);
    std::string item;
    while (std::getline(st, item, ',')) {
      const auto eq = item.find('=');
      if (eq == std::string::npos) throw ValidationError(where, "malformed setting '" + item + "'");
      const std::string key = item.substr(0, eq);
      double value = 0.0;
      try {
        value = std::stod(item.substr(eq + 1));
      } catch (const std::exception&) {
        throw ValidationError(where, "setting '" + key + "' is not a number");
      }
      if (!(value >= 0.0 && value <= 1.0))
        throw ValidationError(where, "setting '" + key + "' = " + item.substr(eq + 1) + " outside [0, 1]");
      rec.settings[key] = value;
    }

    const auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base / p; };
    const auto in_path = resolve(fields[0]).string();
    const auto tgt_path = resolve(fields[1]).string();
    if (!fs::exists(in_path)) throw ValidationError(where, "missing file " + in_path);
    if (!fs::exists(tgt_path)) throw ValidationError(where, "missing file " + tgt_path);
    auto it = inputs.find(in_path);
    if (it == inputs.end()) it = inputs.emplace(in_path, std::pair(inputs.size(), read_wav(in_path))).first;
    rec.input = it->second.second;
    rec.target = read_wav(tgt_path);
    rec.segment = it->second.first;
    if (rec.input.sample_rate != rec.target.sample_rate) throw ValidationError(where, "sample rate mismatch");
    if (!records.empty() && rec.input.sample_rate != records.front().input.sample_rate)
      throw ValidationError(where, "sample rate differs from earlier records");
    const std::size_t a = rec.input.size(), b = rec.target.size();
    if ((a > b ? a - b : b - a) > 1)
      throw ValidationError(where, "input/target lengths differ by more than one sample (" + std::to_string(a) +
                                       " vs " + std::to_string(b) + ")");
    const std::size_t len = std::min(a, b);
    rec.input.samples.resize(len);
    rec.target.samples.resize(len);
    records.push_back(std::move(rec));
  }
  return records;
}

}  // namespace dbq
