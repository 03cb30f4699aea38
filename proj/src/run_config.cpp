// Copyright 2026 The SCDM Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "scdm/run_config.hpp"

#include "scdm/errors.hpp"
#include "scdm/io_util.hpp"

namespace scdm {

ToyDataSpec default_toy_spec(int num_classes, double sigma0) {
  if (num_classes < 1) throw ArgumentError("toy spec needs at least one class");
  ToyDataSpec spec;
  spec.class_means.resize(num_classes, 1);
  for (int c = 0; c < num_classes; ++c) {
    spec.class_means(c, 0) = num_classes == 1 ? 0.0 : -0.9 + 1.8 * c / (num_classes - 1);
  }
  spec.sigma0 = sigma0;
  spec.class_prior = Eigen::VectorXd::Constant(num_classes, 1.0 / num_classes);
  return spec;
}

RunConfig::RunConfig() : toy(default_toy_spec(4)) {}

nlohmann::ordered_json run_config_to_json(const RunConfig& c) {
  nlohmann::ordered_json j;
  j["seed"] = c.seed;
  j["T"] = c.T;
  j["eta"] = c.eta.is_infinite() ? nlohmann::ordered_json("inf") : nlohmann::ordered_json(c.eta.value());
  j["image_kind"] = to_string(c.image_kind);
  j["sampler"] = {{"steps", c.sampler.steps},
                  {"cfg_scale", c.sampler.cfg_scale},
                  {"extrapolation", c.sampler.extrapolation},
                  {"threshold_percentile", c.sampler.threshold_percentile},
                  {"variance", to_string(c.sampler.variance)},
                  {"coupling", to_string(c.sampler.coupling)},
                  {"force_full_mask_at_T", c.sampler.force_full_mask_at_T}};
  j["corruption"] = {{"mode", to_string(c.corruption.mode)},
                     {"ds_factor", c.corruption.ds_factor},
                     {"edge_distance", c.corruption.edge_distance},
                     {"random_rate", c.corruption.random_rate},
                     {"unlabeled_class", c.corruption.unlabeled_class},
                     {"metric", to_string(c.corruption.metric)},
                     {"ignore_unlabeled_edges", c.corruption.ignore_unlabeled_edges}};
  j["toy"] = nlohmann::ordered_json::parse(toy_spec_to_json(c.toy));
  j["out_dir"] = c.out_dir;
  j["ablate"] = {{"height", c.height},
                 {"width", c.width},
                 {"pairs", c.pairs},
                 {"corpus_size", c.corpus_size},
                 {"step_counts", c.step_counts},
                 {"eta", c.ablate_eta},
                 {"extrapolation", c.ablate_extrapolation},
                 {"modes", c.ablate_modes}};
  return j;
}

namespace {

template <typename T>
void take(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

RunConfig run_config_from_json(const nlohmann::json& j, RunConfig c) {
  if (!j.is_object()) throw FormatError("config must be a JSON object");
  try {
    take(j, "seed", c.seed);
    take(j, "T", c.T);
    if (j.contains("eta")) {
      const auto& e = j.at("eta");
      if (e.is_string()) {
        if (e.get<std::string>() != "inf") throw FormatError("eta must be a number or \"inf\"");
        c.eta = Eta::infinite();
      } else {
        c.eta = Eta::finite(e.get<double>());
      }
    }
    if (j.contains("image_kind")) c.image_kind = image_schedule_kind_from_string(j.at("image_kind").get<std::string>());
    if (j.contains("sampler")) {
      const auto& s = j.at("sampler");
      take(s, "steps", c.sampler.steps);
      take(s, "cfg_scale", c.sampler.cfg_scale);
      take(s, "extrapolation", c.sampler.extrapolation);
      take(s, "threshold_percentile", c.sampler.threshold_percentile);
      if (s.contains("variance")) c.sampler.variance = variance_mode_from_string(s.at("variance").get<std::string>());
      if (s.contains("coupling")) c.sampler.coupling = coupling_from_string(s.at("coupling").get<std::string>());
      take(s, "force_full_mask_at_T", c.sampler.force_full_mask_at_T);
    }
    if (j.contains("corruption")) {
      const auto& s = j.at("corruption");
      if (s.contains("mode")) c.corruption.mode = corruption_mode_from_string(s.at("mode").get<std::string>());
      take(s, "ds_factor", c.corruption.ds_factor);
      take(s, "edge_distance", c.corruption.edge_distance);
      take(s, "random_rate", c.corruption.random_rate);
      take(s, "unlabeled_class", c.corruption.unlabeled_class);
      if (s.contains("metric")) c.corruption.metric = distance_metric_from_string(s.at("metric").get<std::string>());
      take(s, "ignore_unlabeled_edges", c.corruption.ignore_unlabeled_edges);
    }
    if (j.contains("toy")) c.toy = toy_spec_from_json(j.at("toy").dump());
    take(j, "out_dir", c.out_dir);
    if (j.contains("ablate")) {
      const auto& s = j.at("ablate");
      take(s, "height", c.height);
      take(s, "width", c.width);
      take(s, "pairs", c.pairs);
      take(s, "corpus_size", c.corpus_size);
      take(s, "step_counts", c.step_counts);
      take(s, "eta", c.ablate_eta);
      take(s, "extrapolation", c.ablate_extrapolation);
      take(s, "modes", c.ablate_modes);
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("config field has the wrong type: ") + e.what());
  }
  c.sampler.seed = c.seed;
  c.corruption.seed = c.seed;
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path, RunConfig base) {
  std::string text = read_text(path);
  if (text.rfind("# ", 0) == 0) {
    const auto eol = text.find('\n');
    text = text.substr(2, eol == std::string::npos ? std::string::npos : eol - 2);
  }
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("config is not valid JSON: " + path.string() + ": " + e.what());
  }
  if (j.is_object() && j.contains("schema") && j.contains("config")) return run_config_from_json(j.at("config"), base);
  return run_config_from_json(j, base);
}

nlohmann::ordered_json artifact_header(const std::string& schema, const RunConfig& config) {
  nlohmann::ordered_json j;
  j["schema"] = schema;
  j["version"] = std::string(kVersion);
  j["config"] = run_config_to_json(config);
  return j;
}

}  // namespace scdm
