// Copyright 2026 The SCDM Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "scdm/ablate.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "scdm/errors.hpp"
#include "scdm/metrics.hpp"

namespace scdm {

SemanticMap random_rect_map(int height, int width, int num_classes, CounterStream& rng) {
  if (num_classes < 2) throw ArgumentError("random_rect_map: need at least two classes");
  if (height < 2 || width < 2) throw ArgumentError("random_rect_map: map must be at least 2x2");
  // Class c >= 1 drawn with weight 1/c, so higher ids are rarer.
  std::vector<double> cdf;
  double total = 0.0;
  for (int c = 1; c < num_classes; ++c) {
    total += 1.0 / c;
    cdf.push_back(total);
  }
  auto draw_class = [&]() {
    const double u = rng.uniform() * total;
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    return static_cast<ClassId>(1 + std::min<std::ptrdiff_t>(it - cdf.begin(), num_classes - 2));
  };
  auto draw_rect = [&](int max_h, int max_w, ClassId value, SemanticMap& map) {
    const int h = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(std::max(1, max_h))));
    const int w = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(std::max(1, max_w))));
    const int i0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(height - h + 1)));
    const int j0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(width - w + 1)));
    for (int i = i0; i < i0 + h; ++i) {
      for (int j = j0; j < j0 + w; ++j) map.set(i, j, value);
    }
  };

  SemanticMap map(height, width, num_classes, draw_class());
  const int rects = 1 + static_cast<int>(rng.below(4));
  for (int r = 0; r < rects; ++r) draw_rect(height * 2 / 3, width * 2 / 3, draw_class(), map);
  if (rng.uniform() < 0.3) draw_rect(std::max(1, height / 4), std::max(1, width / 4), 0, map);
  return map;
}

std::vector<SemanticMap> random_rect_corpus(int count, int height, int width, int num_classes, std::uint64_t seed) {
  std::vector<SemanticMap> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    CounterStream rng(seed, "ablate.corpus", {static_cast<std::uint64_t>(i)});
    out.push_back(random_rect_map(height, width, num_classes, rng));
  }
  return out;
}

AblationSetup make_ablation_setup(const RunConfig& config) {
  const int C = config.toy.num_classes();
  const auto corpus = random_rect_corpus(config.corpus_size, config.height, config.width, C, config.seed);
  StatsOptions options;
  options.clamp_phi = true;
  options.unlabeled_class = config.corruption.unlabeled_class;
  ClassStats stats = estimate_stats(corpus, options);
  const std::set<int> uniform = {config.corruption.unlabeled_class};
  // psi >= 1 and clamped phi >= 1 can still leave a product of exactly 1
  // (a class filling every map it appears in); those fall back to uniform.
  std::set<int> fallback = uniform;
  for (int c = 0; c < C; ++c) {
    if (stats.product(c) <= 1.0) fallback.insert(c);
  }
  LabelSchedule ld = build_label_schedule(stats, config.T, Eta::finite(config.ablate_eta), fallback);
  LabelSchedule base = build_label_schedule(stats, config.T, Eta::infinite());
  ImageSchedule image = build_image_schedule(config.T, config.image_kind);
  return {std::move(stats), std::move(ld), std::move(base), std::move(image), config.toy};
}

PairedStats paired_robustness(const AblationSetup& setup, const LabelSchedule& schedule, const SamplerConfig& sampler,
                              const CorruptionConfig& corruption, int pairs, const RunConfig& config,
                              int identity_checks) {
  if (pairs < 1) throw ArgumentError("paired_robustness: need at least one pair");
  const OracleDenoiser oracle(setup.toy, setup.image);
  const int C = setup.toy.num_classes();
  PairedStats out;
  out.pairs = pairs;
  double sum = 0.0;
  double sum_sq = 0.0;
  bool identical = true;
  for (int p = 0; p < pairs; ++p) {
    const auto idx = static_cast<std::uint64_t>(p);
    CounterStream map_rng(config.seed, "ablate.map", {idx});
    const SemanticMap clean = random_rect_map(config.height, config.width, C, map_rng);
    const SemanticMap noisy = corrupt(clean, corruption, idx);

    const ToyImage a = sample(oracle, clean, schedule, setup.image, sampler, idx);
    const ToyImage b = sample(oracle, noisy, schedule, setup.image, sampler, idx);
    if (p < identity_checks) {
      identical = identical && a == sample_fixed_label(oracle, clean, setup.image, sampler, idx) &&
                  b == sample_fixed_label(oracle, noisy, setup.image, sampler, idx);
    }
    const double d = mean_squared_error(a, b);
    sum += d;
    sum_sq += d * d;
    out.mean_psnr += std::min(psnr(a, b, 2.0), kPsnrCapDb);
    out.fidelity_mse += mean_squared_error(a, class_mean_image(setup.toy, clean));
    out.label_miou += miou(noisy, clean);
  }
  const double n = pairs;
  out.mean_sq_distance = sum / n;
  out.stderr_sq_distance = pairs > 1 ? std::sqrt(std::max(0.0, (sum_sq - sum * sum / n) / (n - 1.0)) / n) : 0.0;
  out.mean_psnr /= n;
  out.fidelity_mse /= n;
  out.label_miou /= n;
  if (identity_checks > 0) out.baseline_identical = identical;
  return out;
}

std::vector<int> ablation_step_counts(const RunConfig& config) {
  std::vector<int> counts = config.step_counts;
  if (counts.empty()) counts = {25, 50, config.T};
  for (int& s : counts) {
    if (s < 1) throw ArgumentError("ablation step counts must be positive");
    s = std::min(s, config.T);
  }
  std::sort(counts.begin(), counts.end());
  counts.erase(std::unique(counts.begin(), counts.end()), counts.end());
  return counts;
}

std::vector<AblationRow> run_ablation(const RunConfig& config) {
  const AblationSetup setup = make_ablation_setup(config);
  const auto counts = ablation_step_counts(config);
  struct Method {
    std::string name;
    const LabelSchedule* schedule;
    double extrapolation;
  };
  std::ostringstream eta_text;
  eta_text << config.ablate_eta;
  const std::vector<Method> methods = {{"base", &setup.baseline, 0.0},
                                       {"label_diffusion", &setup.label_diffusion, 0.0},
                                       {"label_diffusion+extrapolation", &setup.label_diffusion,
                                        config.ablate_extrapolation}};
  std::vector<AblationRow> rows;
  for (const auto& mode_name : config.ablate_modes) {
    CorruptionConfig corruption = config.corruption;
    corruption.mode = corruption_mode_from_string(mode_name);
    corruption.seed = config.seed;
    for (const auto& method : methods) {
      for (int steps : counts) {
        SamplerConfig sampler = config.sampler;
        sampler.seed = config.seed;
        sampler.steps = steps;
        sampler.extrapolation = method.extrapolation;
        AblationRow row;
        row.mode = mode_name;
        row.method = method.name;
        row.eta = method.schedule == &setup.baseline ? "inf" : eta_text.str();
        row.extrapolation = method.extrapolation;
        row.steps = steps;
        const int checks = method.schedule == &setup.baseline ? std::min(config.pairs, 5) : 0;
        row.stats = paired_robustness(setup, *method.schedule, sampler, corruption, config.pairs, config, checks);
        rows.push_back(std::move(row));
      }
    }
  }
  return rows;
}

std::string ablation_csv(const std::vector<AblationRow>& rows, const RunConfig& config) {
  std::ostringstream out;
  out.precision(10);
  out << "# " << artifact_header("scdm.ablate.v1", config).dump() << "\n";
  out << "mode,method,eta,extrapolation,steps,pairs,mean_sq_distance,stderr,mean_psnr_db,fidelity_mse,label_miou,"
         "baseline_identity\n";
  for (const auto& r : rows) {
    std::string identity;
    if (r.stats.baseline_identical) identity = *r.stats.baseline_identical ? "bitwise" : "differs";
    out << r.mode << ',' << r.method << ',' << r.eta << ',' << r.extrapolation << ',' << r.steps << ',' << r.stats.pairs
        << ',' << r.stats.mean_sq_distance << ',' << r.stats.stderr_sq_distance << ',' << r.stats.mean_psnr << ','
        << r.stats.fidelity_mse << ',' << r.stats.label_miou << ',' << identity << "\n";
  }
  return out.str();
}

}  // namespace scdm
