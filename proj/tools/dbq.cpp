// dbq: dataset generation, training, evaluation, rendering and inspection of
// cascaded-biquad effect models.
//
// Exit codes: 0 success, 2 usage or validation error, 1 runtime failure.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dbq/dbq.hpp"

namespace {

using namespace dbq;

constexpr std::uint64_t kDefaultSeed = 1;

Settings parse_settings(const std::vector<std::string>& items) {
  Settings out;
  for (const auto& item : items) {
    const auto eq = item.rfind('=');
    if (eq == std::string::npos || eq == 0) throw ValidationError("--set", "expected NAME=VALUE, got '" + item + "'");
    const std::string name = item.substr(0, eq), text = item.substr(eq + 1);
    std::size_t used = 0;
    double value = 0.0;
    try {
      value = std::stod(text, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != text.size()) throw ValidationError("--set", "'" + text + "' is not a number");
    out[name] = value;
  }
  return out;
}

ModelSpec load_spec(const std::string& name) {
  if (name == "teacher") return make_teacher().spec;
  if (name == "mt2-peq") return mt2_spec(Representation::ParametricEq);
  if (name == "mt2-coefficient") return mt2_spec(Representation::Coefficient);
  if (name == "mt2-polezero") return mt2_spec(Representation::PoleZero);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_text_file(name));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("--spec", std::string("malformed JSON: ") + e.what());
  }
  return spec_from_json(doc);
}

void print_seed(std::uint64_t seed) { std::cout << "seed: " << seed << '\n'; }

std::string join(const std::vector<std::string>& names) {
  std::string out;
  for (const auto& n : names) out += (out.empty() ? "" : ", ") + n;
  return out;
}

// ---------------------------------------------------------------- gen-data

struct GenDataArgs {
  std::string out;
  std::size_t clips = 64;
  std::size_t settings = 8;
  double seconds = 1.0;
  std::uint64_t seed = kDefaultSeed;
  std::size_t threads = 0;
};

int cmd_gen_data(const GenDataArgs& a) {
  if (a.seconds <= 0.0) throw ValidationError("--seconds", "must be positive");
  print_seed(a.seed);
  const auto teacher = make_teacher();
  const auto sources = synth_source_clips(a.clips, a.seed, a.seconds, teacher.spec.sample_rate);
  const auto records = generate_dataset(teacher, sources, a.settings, a.seed + 1, a.seconds, a.threads);
  const auto manifest = write_dataset(a.out, records);
  save_model((std::filesystem::path(a.out) / "teacher.json").string(), teacher.spec, teacher.state);
  std::cout << "records: " << records.size() << "\nmanifest: " << manifest << '\n';
  return 0;
}

// ------------------------------------------------------------------- train

struct TrainArgs {
  std::string data;
  std::string spec = "teacher";
  std::string out;
  std::string loss_csv;
  std::string checkpoint;
  TrainConfig config;
};

int cmd_train(TrainArgs a) {
  print_seed(a.config.seed);
  const auto spec = load_spec(a.spec);
  validate(a.config);
  const auto records = ingest_wav_pairs(a.data);
  if (records.empty()) throw ValidationError("--data", "manifest holds no records");
  if (records.front().input.sample_rate != spec.sample_rate)
    throw ValidationError("--data", "dataset sample rate differs from the model's f_SR");
  const auto examples = to_examples(spec, records);

  std::ofstream csv;
  if (!a.loss_csv.empty()) {
    csv.open(a.loss_csv);
    if (!csv) throw Error("cannot write " + a.loss_csv);
    csv << "epoch,train_mse,val_mse\n";
    csv.precision(10);
  }
  auto on_epoch = [&](const EpochRecord& r, const ModelState& state, const AdamState& opt) {
    std::printf("epoch %zu train_mse %.6e val_mse %.6e\n", r.epoch, r.train_mse, r.val_mse);
    std::fflush(stdout);
    if (csv.is_open()) csv << r.epoch << ',' << r.train_mse << ',' << r.val_mse << '\n' << std::flush;
    if (!a.checkpoint.empty())
      write_text_file(a.checkpoint, serialize_checkpoint({spec, state, r.epoch, opt.step, opt.m, opt.v}));
  };
  const auto result = fit(spec, examples, a.config, on_epoch);
  if (result.diverged) std::cerr << "warning: training stopped early: " << result.divergence_reason << '\n';

  save_model(a.out, spec, result.state);
  std::vector<Example> val;
  for (auto i : result.val_indices) val.push_back(examples[i]);
  const double val_mse =
      val.empty() ? std::numeric_limits<double>::quiet_NaN() : time_loss(spec, result.state, val, a.config.threads);
  std::printf("val_mse: %.6e\ncount_params: %zu\nmodel: %s\n", val_mse, count_params(spec), a.out.c_str());
  return result.diverged ? 1 : 0;
}

// -------------------------------------------------------------------- eval

int cmd_eval(const std::string& model, const std::string& data, std::size_t threads) {
  const auto [spec, state] = load_model(model);
  const auto records = ingest_wav_pairs(data);
  if (records.empty()) throw ValidationError("--data", "manifest holds no records");
  const auto examples = to_examples(spec, records);
  std::printf("records: %zu\nmse: %.6e\n", examples.size(), time_loss(spec, state, examples, threads));
  return 0;
}

// ------------------------------------------------------------------ render

int cmd_render(const std::string& model, const std::string& in, const std::string& out,
               const std::vector<std::string>& sets, bool pcm16) {
  const auto [spec, state] = load_model(model);
  const auto cond = conditioning_from_settings(spec, parse_settings(sets));
  const auto x = read_wav(in);
  if (x.sample_rate != spec.sample_rate)
    throw ValidationError("--in", "sample rate " + std::to_string(x.sample_rate) + " differs from the model's f_SR");
  write_wav(out, forward_time(spec, state, x, cond), pcm16 ? WavFormat::Pcm16 : WavFormat::Float32);
  return 0;
}

// ----------------------------------------------------------------- inspect

void print_stage(const ModelSpec& spec, const ModelState& state, std::size_t s, const Conditioning& cond) {
  const auto raw = stage_raw(spec, state, s, cond);
  const auto st = p2c(spec.representation, raw, spec.sample_rate);
  const auto site = spec.site_index(s);
  std::printf("stage %zu (%s", s, site < 0 ? "fixed" : "hyper: ");
  if (site >= 0) std::printf("%s", join(spec.sites[static_cast<std::size_t>(site)].names).c_str());
  std::printf(")%s\n  gain: %.6f dB\n", s + 1 == spec.stages ? " no tanh" : "", st.gain_db);
  if (spec.representation == Representation::ParametricEq) {
    const auto eq = eq_sections(raw, spec.sample_rate);
    for (std::size_t k = 0; k < eq.size(); ++k)
      std::printf("  section %zu: %-10s f=%.3f Hz g=%.4f dB Q=%.4f\n", k, to_string(eq[k].kind), eq[k].freq_hz,
                  eq[k].gain_db, eq[k].q);
  } else {
    for (std::size_t k = 0; k < st.sections.size(); ++k) {
      const auto& c = st.sections[k];
      std::printf("  section %zu: b=[%.9g, %.9g, %.9g] a=[1, %.9g, %.9g]\n", k, c.b0, c.b1, c.b2, c.a1, c.a2);
    }
  }
}

int cmd_inspect(const std::string& model, long stage, const std::vector<std::string>& sets) {
  const auto [spec, state] = load_model(model);
  if (stage >= 0 && static_cast<std::size_t>(stage) >= spec.stages)
    throw ValidationError("--stage", "stage " + std::to_string(stage) + " out of range (S = " +
                                         std::to_string(spec.stages) + ")");
  const auto cond = conditioning_from_settings(spec, parse_settings(sets));
  std::printf("representation: %s\nS: %zu\nK: %zu\nf_SR: %g\ncount_params: %zu\n",
              std::string(to_string(spec.representation)).c_str(), spec.stages, spec.sections, spec.sample_rate,
              count_params(spec));
  std::printf("delay: %.6f samples, gain %.6f\n", delay_samples(state.delay_raw), state.delay_gain);
  for (std::size_t s = 0; s < spec.stages; ++s)
    if (stage < 0 || static_cast<std::size_t>(stage) == s) print_stage(spec, state, s, cond);
  return 0;
}

// --------------------------------------------------------- export-response

int cmd_export_response(const std::string& model, std::size_t stage, const std::string& sweep, std::size_t steps,
                        std::size_t fft_size, const std::string& out, const std::vector<std::string>& sets) {
  const auto [spec, state] = load_model(model);
  if (stage >= spec.stages)
    throw ValidationError("--stage", "stage " + std::to_string(stage) + " out of range (S = " +
                                         std::to_string(spec.stages) + ")");
  if (steps < 2) throw ValidationError("--steps", "need at least 2 sweep values");
  if (!is_power_of_two(fft_size) || fft_size < 4) throw ValidationError("--fft-size", "must be a power of two");
  const auto site = spec.site_index(stage);
  const auto& names = site < 0 ? std::vector<std::string>{} : spec.sites[static_cast<std::size_t>(site)].names;
  if (std::find(names.begin(), names.end(), sweep) == names.end())
    throw ValidationError("--sweep", "stage " + std::to_string(stage) + " is not conditioned on '" + sweep + "'" +
                                         (names.empty() ? " (stage is fixed)" : " (controls: " + join(names) + ")"));
  auto settings = parse_settings(sets);
  const FrequencyGrid grid(fft_size);

  std::ofstream csv(out);
  if (!csv) throw Error("cannot write " + out);
  csv << "setting_value,freq_hz,mag_db,phase_rad\n";
  char line[128];
  for (std::size_t i = 0; i < steps; ++i) {
    const double value = static_cast<double>(i) / static_cast<double>(steps - 1);
    settings[sweep] = value;
    const auto cond = conditioning_from_settings(spec, settings);
    const auto st = p2c(spec.representation, stage_raw(spec, state, stage, cond), spec.sample_rate);
    const auto h = cascade_response(st.sections, grid);
    for (std::size_t k = 0; k < h.size(); ++k) {
      std::snprintf(line, sizeof line, "%.6f,%.6f,%.9g,%.9g\n", value, grid.hz(k, spec.sample_rate),
                    20.0 * std::log10(std::abs(h[k])), std::arg(h[k]));
      csv << line;
    }
  }
  if (!csv) throw Error("write failed for " + out);
  std::printf("rows: %zu\ncsv: %s\n", steps * grid.bin_count(), out.c_str());
  return 0;
}

// -------------------------------------------------------------- grad-check

struct GradCheckArgs {
  std::string model;
  std::string spec = "teacher";
  std::string data;
  std::size_t clips = 2;
  double seconds = 0.1;
  std::size_t fft_size = 1024;
  std::uint64_t seed = kDefaultSeed;
  bool verbose = false;
};

int cmd_grad_check(const GradCheckArgs& a) {
  print_seed(a.seed);
  ModelSpec spec;
  ModelState state;
  if (!a.model.empty()) {
    std::tie(spec, state) = load_model(a.model);
  } else {
    spec = load_spec(a.spec);
    state = init_state(spec, a.seed);
  }
  std::vector<Example> batch;
  if (!a.data.empty()) {
    auto records = ingest_wav_pairs(a.data);
    if (records.size() > a.clips) records.resize(a.clips);
    batch = to_examples(spec, records);
  } else {
    std::mt19937_64 rng(a.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (const auto& clip : synth_source_clips(a.clips, a.seed, a.seconds, spec.sample_rate)) {
      Example ex{clip.samples, {}, quiescent_conditioning(spec)};
      for (auto& c : ex.conditioning)
        for (auto& v : c.values) v = unit(rng);
      ex.target.resize(clip.size());
      for (std::size_t i = 0; i < clip.size(); ++i) ex.target[i] = std::tanh(2.0 * clip.samples[i]);
      batch.push_back(std::move(ex));
    }
  }
  if (batch.empty()) throw ValidationError("--data", "no examples to check");
  TrainConfig config;
  config.fft_size = a.fft_size;
  validate(config);
  const auto report = grad_check(spec, state, batch, config);
  if (a.verbose)
    for (const auto& e : report.entries)
      std::printf("%-28s analytic %+.6e numeric %+.6e rel %.2e%s\n", e.name.c_str(), e.analytic, e.numeric,
                  e.rel_error, e.smooth ? "" : " (kink, excluded)");
  std::printf("parameters: %zu\nexcluded: %zu\nmax_rel_error: %.3e\ntolerance: %.0e\nresult: %s\n",
              report.entries.size(), report.excluded, report.max_rel_error, report.tolerance,
              report.passed ? "PASS" : "FAIL");
  return report.passed ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Differentiable cascaded-biquad effect modeling"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  GenDataArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Render a synthetic teacher dataset");
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();
  gen_cmd->add_option("--clips", gen.clips, "Number of synthetic source clips")->capture_default_str();
  gen_cmd->add_option("--settings", gen.settings, "Random settings per clip")->capture_default_str();
  gen_cmd->add_option("--seconds", gen.seconds, "Clip length in seconds")->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed, "Random seed")->capture_default_str();
  gen_cmd->add_option("--threads", gen.threads, "Worker threads (0: all cores)");

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Fit a model to a dataset manifest");
  train_cmd->add_option("--data", train.data, "Dataset manifest")->required();
  train_cmd->add_option("--spec", train.spec,
                        "Topology: teacher, mt2-peq, mt2-coefficient, mt2-polezero or a JSON spec file")
      ->capture_default_str();
  train_cmd->add_option("--out", train.out, "Output model document")->required();
  train_cmd->add_option("--loss-csv", train.loss_csv, "Per-epoch loss history CSV");
  train_cmd->add_option("--checkpoint", train.checkpoint, "Checkpoint written after every epoch");
  train_cmd->add_option("--epochs", train.config.epochs)->capture_default_str();
  train_cmd->add_option("--batch-size", train.config.batch_size)->capture_default_str();
  train_cmd->add_option("--lr", train.config.learning_rate)->capture_default_str();
  train_cmd->add_option("--fft-size", train.config.fft_size)->capture_default_str();
  train_cmd->add_option("--val-fraction", train.config.validation_fraction)->capture_default_str();
  train_cmd->add_option("--threads", train.config.threads, "Worker threads (0: all cores)");
  train.config.seed = kDefaultSeed;
  train_cmd->add_option("--seed", train.config.seed)->capture_default_str();

  std::string eval_model, eval_data;
  std::size_t eval_threads = 0;
  auto* eval_cmd = app.add_subcommand("eval", "Time-domain MSE of a model on a dataset");
  eval_cmd->add_option("--model", eval_model)->required();
  eval_cmd->add_option("--data", eval_data, "Dataset manifest")->required();
  eval_cmd->add_option("--threads", eval_threads);

  std::string render_model, render_in, render_out;
  std::vector<std::string> render_sets;
  bool render_pcm16 = false;
  auto* render_cmd = app.add_subcommand("render", "Process a WAV file through a model");
  render_cmd->add_option("--model", render_model)->required();
  render_cmd->add_option("--in", render_in)->required();
  render_cmd->add_option("--out", render_out)->required();
  render_cmd->add_option("--set", render_sets, "Control setting NAME=VALUE (repeatable)");
  render_cmd->add_flag("--pcm16", render_pcm16, "Write 16-bit PCM instead of float32");

  std::string inspect_model;
  long inspect_stage = -1;
  std::vector<std::string> inspect_sets;
  auto* inspect_cmd = app.add_subcommand("inspect", "Print realized stage parameters");
  inspect_cmd->add_option("--model", inspect_model)->required();
  inspect_cmd->add_option("--stage", inspect_stage, "Stage index (default: all)");
  inspect_cmd->add_option("--set", inspect_sets, "Control setting NAME=VALUE (repeatable)");

  std::string export_model, export_sweep, export_out;
  std::size_t export_stage = 0, export_steps = 5, export_fft = 4096;
  std::vector<std::string> export_sets;
  auto* export_cmd = app.add_subcommand("export-response", "Sweep one control and export a stage response");
  export_cmd->add_option("--model", export_model)->required();
  export_cmd->add_option("--stage", export_stage)->required();
  export_cmd->add_option("--sweep", export_sweep, "Control to sweep over [0, 1]")->required();
  export_cmd->add_option("--steps", export_steps)->capture_default_str();
  export_cmd->add_option("--fft-size", export_fft)->capture_default_str();
  export_cmd->add_option("--out", export_out, "Output CSV")->required();
  export_cmd->add_option("--set", export_sets, "Fixed value for another control (repeatable)");

  GradCheckArgs gc;
  auto* gc_cmd = app.add_subcommand("grad-check", "Compare gradients with central differences");
  gc_cmd->add_option("--model", gc.model, "Model document (default: random state of --spec)");
  gc_cmd->add_option("--spec", gc.spec)->capture_default_str();
  gc_cmd->add_option("--data", gc.data, "Dataset manifest (default: synthetic clips)");
  gc_cmd->add_option("--clips", gc.clips)->capture_default_str();
  gc_cmd->add_option("--seconds", gc.seconds)->capture_default_str();
  gc_cmd->add_option("--fft-size", gc.fft_size)->capture_default_str();
  gc_cmd->add_option("--seed", gc.seed)->capture_default_str();
  gc_cmd->add_flag("--verbose", gc.verbose, "Print every parameter");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*gen_cmd) return cmd_gen_data(gen);
    if (*train_cmd) return cmd_train(train);
    if (*eval_cmd) return cmd_eval(eval_model, eval_data, eval_threads);
    if (*render_cmd) return cmd_render(render_model, render_in, render_out, render_sets, render_pcm16);
    if (*inspect_cmd) return cmd_inspect(inspect_model, inspect_stage, inspect_sets);
    if (*export_cmd)
      return cmd_export_response(export_model, export_stage, export_sweep, export_steps, export_fft, export_out,
                                 export_sets);
    if (*gc_cmd) return cmd_grad_check(gc);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
