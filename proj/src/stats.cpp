// Copyright 2026 The SCDM Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <limits>

#include <json.hpp>

#include "scdm/errors.hpp"
#include "scdm/io_util.hpp"
#include "scdm/labelmap.hpp"

namespace scdm {

namespace {

// Neumaier summation over a sorted copy, so the result does not depend on
// corpus order.
double stable_sum(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  double sum = 0.0;
  double comp = 0.0;
  for (double v : values) {
    const double t = sum + v;
    if (std::abs(sum) >= std::abs(v)) {
      comp += (sum - t) + v;
    } else {
      comp += (v - t) + sum;
    }
    sum = t;
  }
  return sum + comp;
}

}  // namespace

std::vector<double> ClassStats::products() const {
  std::vector<double> out(psi.size());
  for (std::size_t c = 0; c < psi.size(); ++c) out[c] = psi[c] * phi[c];
  return out;
}

ClassStats estimate_stats(std::span<const SemanticMap> corpus, const StatsOptions& options) {
  if (corpus.empty()) throw ArgumentError("estimate_stats: empty corpus");
  const int num_classes = corpus.front().num_classes();
  if (options.unlabeled_class && (*options.unlabeled_class < 0 || *options.unlabeled_class >= num_classes)) {
    throw ArgumentError("estimate_stats: unlabeled class out of range");
  }
  const auto nc = static_cast<std::size_t>(num_classes);

  std::vector<std::vector<double>> fractions(nc);
  std::vector<long long> doc_freq(nc, 0);
  std::vector<long long> counts(nc);
  for (const auto& map : corpus) {
    if (map.num_classes() != num_classes) throw ArgumentError("estimate_stats: maps disagree on class count");
    if (map.has_mask()) throw ArgumentError("estimate_stats: corpus map contains MASK cells");
    std::fill(counts.begin(), counts.end(), 0);
    for (ClassId v : map.flat()) ++counts[v];
    const auto total = static_cast<double>(map.size());
    for (std::size_t c = 0; c < nc; ++c) {
      if (counts[c] == 0) continue;
      ++doc_freq[c];
      fractions[c].push_back(static_cast<double>(counts[c]) / total);
    }
  }

  ClassStats stats;
  stats.num_classes = num_classes;
  stats.psi.assign(nc, 0.0);
  stats.phi.assign(nc, 0.0);
  stats.present.assign(nc, false);
  stats.unlabeled_class = options.unlabeled_class;
  stats.phi_clamped = options.clamp_phi;

  const auto num_maps = static_cast<double>(corpus.size());
  double max_product = 0.0;
  for (std::size_t c = 0; c < nc; ++c) {
    if (doc_freq[c] == 0) continue;
    stats.present[c] = true;
    const double mean_fraction = stable_sum(fractions[c]) / static_cast<double>(doc_freq[c]);
    stats.psi[c] = 1.0 / mean_fraction;
    stats.phi[c] = std::log(num_maps / static_cast<double>(doc_freq[c]));
    if (options.clamp_phi) stats.phi[c] = std::max(stats.phi[c], 1.0);
    max_product = std::max(max_product, stats.psi[c] * stats.phi[c]);
  }
  for (std::size_t c = 0; c < nc; ++c) {
    if (stats.present[c]) continue;
    stats.psi[c] = max_product;
    stats.phi[c] = 1.0;
  }

  if (options.target_min_product) {
    const double target = *options.target_min_product;
    if (!(target > 0.0) || !std::isfinite(target)) throw ArgumentError("estimate_stats: target_min_product must be positive");
    double min_product = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < nc; ++c) min_product = std::min(min_product, stats.psi[c] * stats.phi[c]);
    if (!(min_product > 0.0)) throw ArgumentError("estimate_stats: cannot rescale a zero psi*phi product");
    const double lambda = target / min_product;
    for (auto& p : stats.psi) p *= lambda;
    stats.scale_factor = lambda;
  }
  return stats;
}

std::string stats_to_json(const ClassStats& stats) {
  nlohmann::ordered_json j;
  j["version"] = 1;
  j["num_classes"] = stats.num_classes;
  j["log_base"] = "e";
  j["psi"] = stats.psi;
  j["phi"] = stats.phi;
  j["phi_clamped"] = stats.phi_clamped;
  j["scale_factor"] = stats.scale_factor ? nlohmann::ordered_json(*stats.scale_factor) : nlohmann::ordered_json(nullptr);
  j["unlabeled_class"] =
      stats.unlabeled_class ? nlohmann::ordered_json(*stats.unlabeled_class) : nlohmann::ordered_json(nullptr);
  j["present"] = stats.present;
  return j.dump(2) + "\n";
}

ClassStats stats_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("stats file is not valid JSON: ") + e.what());
  }
  try {
    if (j.at("version").get<int>() != 1) throw FormatError("unsupported stats version");
    if (j.at("log_base").get<std::string>() != "e") throw FormatError("stats log_base must be \"e\"");
    ClassStats s;
    s.num_classes = j.at("num_classes").get<int>();
    s.psi = j.at("psi").get<std::vector<double>>();
    s.phi = j.at("phi").get<std::vector<double>>();
    s.phi_clamped = j.at("phi_clamped").get<bool>();
    if (!j.at("scale_factor").is_null()) s.scale_factor = j.at("scale_factor").get<double>();
    if (!j.at("unlabeled_class").is_null()) s.unlabeled_class = j.at("unlabeled_class").get<int>();
    if (j.contains("present")) {
      s.present = j.at("present").get<std::vector<bool>>();
    } else {
      s.present.assign(s.psi.size(), true);
    }
    const auto nc = static_cast<std::size_t>(s.num_classes);
    if (s.num_classes < 1 || s.psi.size() != nc || s.phi.size() != nc || s.present.size() != nc) {
      throw FormatError("stats arrays do not match num_classes");
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("stats file missing or mistyped field: ") + e.what());
  }
}

void save_stats(const ClassStats& stats, const std::filesystem::path& path) {
  write_atomic(path, stats_to_json(stats));
}

ClassStats load_stats(const std::filesystem::path& path) { return stats_from_json(read_text(path)); }

}  // namespace scdm
