#pragma once

// Versioned JSON model documents. Doubles are written with 17 significant
// digits, so a round trip reproduces every parameter bit for bit.

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <tuple>
#include <utility>
#include <variant>
#include <vector>

#include "json.hpp"

#include "dbq/error.hpp"
#include "dbq/model.hpp"

namespace dbq {

inline constexpr int kModelFormatVersion = 1;

namespace detail {

inline void require_finite(double v, const std::string& field) {
  if (!std::isfinite(v)) throw ValidationError(field, "non-finite value");
}

template <typename T>
T get_field(const nlohmann::json& doc, const std::string& key, const std::string& path) {
  const auto field = path.empty() ? key : path + "." + key;
  if (!doc.is_object() || !doc.contains(key)) throw ValidationError(field, "missing field");
  try {
    return doc.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(field, std::string("wrong type: ") + e.what());
  }
}

}  // namespace detail

inline nlohmann::json spec_to_json(const ModelSpec& spec) {
  nlohmann::json sites = nlohmann::json::array();
  for (const auto& site : spec.sites) sites.push_back({{"stage", site.stage}, {"names", site.names}});
  return {{"S", spec.stages},
          {"K", spec.sections},
          {"representation", std::string(to_string(spec.representation))},
          {"f_SR", spec.sample_rate},
          {"sites", sites}};
}

inline ModelSpec spec_from_json(const nlohmann::json& doc) {
  ModelSpec spec;
  spec.stages = detail::get_field<std::size_t>(doc, "S", "");
  spec.sections = detail::get_field<std::size_t>(doc, "K", "");
  spec.representation = parse_representation(detail::get_field<std::string>(doc, "representation", ""));
  spec.sample_rate = doc.contains("f_SR") ? detail::get_field<double>(doc, "f_SR", "") : 44100.0;
  if (doc.contains("sites")) {
    for (const auto& s : doc.at("sites"))
      spec.sites.push_back({detail::get_field<std::size_t>(s, "stage", "sites"),
                            detail::get_field<std::vector<std::string>>(s, "names", "sites")});
  }
  validate(spec);
  return spec;
}

inline nlohmann::json to_json(const ModelSpec& spec, const ModelState& state) {
  check_state(spec, state);
  detail::require_finite(state.delay_raw, "delay_raw");
  detail::require_finite(state.delay_gain, "delay_gain");
  nlohmann::json stages = nlohmann::json::array();
  for (std::size_t s = 0; s < spec.stages; ++s) {
    nlohmann::json st;
    st["s"] = s;
    if (const auto* fixed = std::get_if<FixedStageParams>(&state.stages[s])) {
      for (double v : fixed->params) detail::require_finite(v, "stages[" + std::to_string(s) + "].bias");
      st["kind"] = "fixed";
      st["C_s"] = 0;
      st["names"] = nlohmann::json::array();
      st["bias"] = fixed->params;
      st["weights"] = nlohmann::json::array();
    } else {
      const auto& map = std::get<HyperMap>(state.stages[s]);
      const auto& site = spec.sites[static_cast<std::size_t>(spec.site_index(s))];
      st["kind"] = "hyper";
      st["C_s"] = map.cols;
      st["names"] = site.names;
      st["bias"] = map.bias;
      nlohmann::json rows = nlohmann::json::array();
      for (std::size_t r = 0; r < map.rows; ++r)
        rows.push_back(std::vector<double>(map.weights.begin() + r * map.cols,
                                           map.weights.begin() + (r + 1) * map.cols));
      st["weights"] = rows;
      for (double v : map.bias) detail::require_finite(v, "stages[" + std::to_string(s) + "].bias");
      for (double v : map.weights) detail::require_finite(v, "stages[" + std::to_string(s) + "].weights");
    }
    stages.push_back(st);
  }
  return {{"format_version", kModelFormatVersion},
          {"f_SR", spec.sample_rate},
          {"representation", std::string(to_string(spec.representation))},
          {"S", spec.stages},
          {"K", spec.sections},
          {"param_count", count_params(spec)},
          {"delay_raw", state.delay_raw},
          {"delay_gain", state.delay_gain},
          {"stages", stages}};
}

inline std::string serialize(const ModelSpec& spec, const ModelState& state) { return to_json(spec, state).dump(2); }

inline std::pair<ModelSpec, ModelState> from_json(const nlohmann::json& doc) {
  using detail::get_field;
  if (!doc.is_object()) throw ValidationError("document", "expected a JSON object");
  const int version = get_field<int>(doc, "format_version", "");
  if (version != kModelFormatVersion)
    throw ValidationError("format_version", "unsupported version " + std::to_string(version));

  ModelSpec spec;
  spec.sample_rate = get_field<double>(doc, "f_SR", "");
  spec.representation = parse_representation(get_field<std::string>(doc, "representation", ""));
  spec.stages = get_field<std::size_t>(doc, "S", "");
  spec.sections = get_field<std::size_t>(doc, "K", "");
  const auto stages = doc.contains("stages") ? doc.at("stages") : nlohmann::json();
  if (!stages.is_array()) throw ValidationError("stages", "expected an array");
  if (stages.size() != spec.stages)
    throw ValidationError("stages", "holds " + std::to_string(stages.size()) + " stages, S = " +
                                        std::to_string(spec.stages));

  for (std::size_t i = 0; i < stages.size(); ++i) {
    const auto path = "stages[" + std::to_string(i) + "]";
    const auto& st = stages[i];
    if (get_field<std::size_t>(st, "s", path) != i) throw ValidationError(path + ".s", "stages out of order");
    const auto kind = get_field<std::string>(st, "kind", path);
    const auto width = get_field<std::size_t>(st, "C_s", path);
    const auto names = get_field<std::vector<std::string>>(st, "names", path);
    if (kind == "hyper") {
      if (width == 0 || names.size() != width)
        throw ValidationError(path + ".names", "hyper stage needs C_s names");
      spec.sites.push_back({i, names});
    } else if (kind == "fixed") {
      if (width != 0) throw ValidationError(path + ".C_s", "fixed stage must have C_s = 0");
    } else {
      throw ValidationError(path + ".kind", "expected 'fixed' or 'hyper'");
    }
  }
  validate(spec);

  // Count every scalar in the document before checking individual shapes so a
  // missing or extra value is reported as a count mismatch.
  std::size_t present = 2;
  for (const auto& st : stages) {
    present += get_field<std::vector<double>>(st, "bias", "stages").size();
    const auto weights = get_field<nlohmann::json>(st, "weights", "stages");
    if (!weights.is_array()) throw ValidationError("stages.weights", "expected an array");
    for (const auto& row : weights) present += row.is_array() ? row.size() : 1;
  }
  const std::size_t expected = count_params(spec);
  if (doc.contains("param_count") && get_field<std::size_t>(doc, "param_count", "") != expected)
    throw ValidationError("param_count", "declared " + std::to_string(doc.at("param_count").get<std::size_t>()) +
                                             ", spec requires " + std::to_string(expected));
  if (present != expected)
    throw ValidationError("param_count", "document holds " + std::to_string(present) + " parameters, spec requires " +
                                             std::to_string(expected));

  ModelState state;
  state.delay_raw = get_field<double>(doc, "delay_raw", "");
  state.delay_gain = get_field<double>(doc, "delay_gain", "");
  const std::size_t rows = spec.stage_width();
  for (std::size_t i = 0; i < stages.size(); ++i) {
    const auto path = "stages[" + std::to_string(i) + "]";
    const auto& st = stages[i];
    auto bias = get_field<std::vector<double>>(st, "bias", path);
    if (bias.size() != rows) throw ValidationError(path + ".bias", "expected " + std::to_string(rows) + " values");
    const std::size_t cols = spec.controls(i);
    if (cols == 0) {
      state.stages.emplace_back(FixedStageParams{std::move(bias)});
      continue;
    }
    const auto weights = get_field<std::vector<std::vector<double>>>(st, "weights", path);
    if (weights.size() != rows) throw ValidationError(path + ".weights", "expected " + std::to_string(rows) + " rows");
    HyperMap map = HyperMap::zeros(rows, cols);
    map.bias = std::move(bias);
    for (std::size_t r = 0; r < rows; ++r) {
      if (weights[r].size() != cols)
        throw ValidationError(path + ".weights[" + std::to_string(r) + "]", "expected " + std::to_string(cols) +
                                                                                " columns");
      std::copy(weights[r].begin(), weights[r].end(), map.weights.begin() + r * cols);
    }
    state.stages.emplace_back(std::move(map));
  }
  return {spec, state};
}

inline std::pair<ModelSpec, ModelState> deserialize(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("document", std::string("malformed JSON: ") + e.what());
  }
  return from_json(doc);
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << text;
  if (!out) throw Error("write failed: " + path);
}

inline std::pair<ModelSpec, ModelState> load_model(const std::string& path) { return deserialize(read_text_file(path)); }

inline void save_model(const std::string& path, const ModelSpec& spec, const ModelState& state) {
  write_text_file(path, serialize(spec, state) + "\n");
}

struct Checkpoint {
  ModelSpec spec;
  ModelState state;
  std::size_t epoch = 0;
  std::size_t step = 0;
  std::vector<double> adam_m;
  std::vector<double> adam_v;
};

// Model document plus optimizer moments.
inline std::string serialize_checkpoint(const Checkpoint& ck) {
  auto doc = to_json(ck.spec, ck.state);
  doc["optimizer"] = {{"epoch", ck.epoch}, {"step", ck.step}, {"m", ck.adam_m}, {"v", ck.adam_v}};
  return doc.dump(2);
}

inline Checkpoint deserialize_checkpoint(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("document", std::string("malformed JSON: ") + e.what());
  }
  Checkpoint ck;
  std::tie(ck.spec, ck.state) = from_json(doc);
  if (!doc.contains("optimizer")) throw ValidationError("optimizer", "missing field");
  const auto& opt = doc.at("optimizer");
  ck.epoch = detail::get_field<std::size_t>(opt, "epoch", "optimizer");
  ck.step = detail::get_field<std::size_t>(opt, "step", "optimizer");
  ck.adam_m = detail::get_field<std::vector<double>>(opt, "m", "optimizer");
  ck.adam_v = detail::get_field<std::vector<double>>(opt, "v", "optimizer");
  const std::size_t n = count_params(ck.spec);
  if ((ck.adam_m.size() != n || ck.adam_v.size() != n) && !(ck.adam_m.empty() && ck.adam_v.empty()))
    throw ValidationError("optimizer", "moment vectors do not match the parameter count");
  return ck;
}

}  // namespace dbq
