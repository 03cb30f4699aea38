// Copyright 2026 The SCDM Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

// scdm: command-line front end. Exit status 0 on success, 1 when a
// verification check fails, 2 on usage errors, 3 on any other error.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "scdm/ablate.hpp"
#include "scdm/corrupt.hpp"
#include "scdm/denoiser.hpp"
#include "scdm/errors.hpp"
#include "scdm/image.hpp"
#include "scdm/io_util.hpp"
#include "scdm/labeldiff.hpp"
#include "scdm/labelmap.hpp"
#include "scdm/metrics.hpp"
#include "scdm/mlp.hpp"
#include "scdm/run_config.hpp"
#include "scdm/sampler.hpp"
#include "scdm/schedule.hpp"
#include "scdm/train.hpp"
#include "scdm/verify.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace scdm;

namespace {

constexpr int kExitCheckFailed = 1;
constexpr int kExitUsage = 2;
constexpr int kExitError = 3;

struct Common {
  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_given = false;
};

void add_common(CLI::App* sub, Common& common) {
  sub->add_option("--config", common.config_path, "RunConfig JSON, or any artifact with an embedded config");
  sub->add_option_function<std::uint64_t>(
      "--seed",
      [&common](const std::uint64_t& v) {
        common.seed = v;
        common.seed_given = true;
      },
      "global seed (overrides config and SCDM_SEED)");
}

// Seed precedence: --seed, then the config file, then SCDM_SEED, then 0.
RunConfig resolve_config(const Common& common) {
  RunConfig cfg;
  bool seed_from_config = false;
  if (!common.config_path.empty()) {
    cfg = load_run_config(common.config_path);
    const std::string text = read_text(common.config_path);
    seed_from_config = text.find("\"seed\"") != std::string::npos;
  }
  if (common.seed_given) {
    cfg.seed = common.seed;
  } else if (!seed_from_config) {
    if (const char* env = std::getenv("SCDM_SEED")) {
      try {
        cfg.seed = std::stoull(env);
      } catch (const std::exception&) {
        throw ArgumentError(std::string("SCDM_SEED is not an unsigned integer: ") + env);
      }
    }
  }
  cfg.sampler.seed = cfg.seed;
  cfg.corruption.seed = cfg.seed;
  return cfg;
}

template <typename T>
void override_if(const CLI::Option* opt, const T& value, T& target) {
  if (opt->count() > 0) target = value;
}

Eta parse_eta(const std::string& text) {
  if (text == "inf" || text == "+inf" || text == "infinity") return Eta::infinite();
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw ArgumentError("eta must be a number or 'inf'");
    return Eta::finite(v);
  } catch (const std::logic_error&) {
    throw ArgumentError("eta must be a number or 'inf': " + text);
  }
}

void write_json(const fs::path& path, const json& j) { write_atomic(path, j.dump(2) + "\n"); }

json header(const std::string& schema, const RunConfig& cfg, json inputs) {
  json h = artifact_header(schema, cfg);
  h["inputs"] = std::move(inputs);
  return h;
}

// Binary outputs carry their config echo in a sidecar next to them.
void write_sidecar(const fs::path& binary, const json& h) { write_json(fs::path(binary.string() + ".meta.json"), h); }

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

// ---------------------------------------------------------------- commands

struct StatsArgs {
  std::vector<std::string> maps;
  bool clamp_phi = false;
  int unlabeled = -1;
  double target = 0.0;
  CLI::Option* target_opt = nullptr;
  std::string out;
};

int cmd_estimate_stats(const StatsArgs& a, const RunConfig& cfg) {
  std::vector<SemanticMap> corpus;
  corpus.reserve(a.maps.size());
  for (const auto& p : a.maps) corpus.push_back(load_map(p));
  StatsOptions options;
  options.clamp_phi = a.clamp_phi;
  if (a.unlabeled >= 0) options.unlabeled_class = a.unlabeled;
  if (a.target_opt->count() > 0) options.target_min_product = a.target;
  const ClassStats stats = estimate_stats(corpus, options);
  json j = json::parse(stats_to_json(stats));
  j["generator"] = header("scdm.stats.v1", cfg, {{"maps", a.maps}});
  write_json(a.out, j);
  std::cout << "wrote " << a.out << " (" << stats.num_classes << " classes, " << corpus.size() << " maps)\n";
  return 0;
}

struct ScheduleArgs {
  std::string stats;
  int T = 50;
  std::string eta = "1.0";
  std::string kind = "linear_beta";
  std::vector<int> uniform_classes;
  CLI::Option* uniform_opt = nullptr;
  CLI::Option* T_opt = nullptr;
  CLI::Option* eta_opt = nullptr;
  CLI::Option* kind_opt = nullptr;
  std::string out;
};

int cmd_schedule(const ScheduleArgs& a, RunConfig cfg) {
  override_if(a.T_opt, a.T, cfg.T);
  if (a.eta_opt->count() > 0) cfg.eta = parse_eta(a.eta);
  if (a.kind_opt->count() > 0) cfg.image_kind = image_schedule_kind_from_string(a.kind);
  const ClassStats stats = load_stats(a.stats);
  std::set<int> uniform;
  if (a.uniform_opt->count() > 0) {
    uniform.insert(a.uniform_classes.begin(), a.uniform_classes.end());
  } else if (stats.unlabeled_class) {
    uniform.insert(*stats.unlabeled_class);
  }
  const LabelSchedule label = build_label_schedule(stats, cfg.T, cfg.eta, uniform);
  const ImageSchedule image = build_image_schedule(cfg.T, cfg.image_kind);
  json j = json::parse(schedule_to_json(label, image));
  j["generator"] = header("scdm.schedule.v1", cfg, {{"stats", a.stats}, {"uniform_classes", std::vector<int>(uniform.begin(), uniform.end())}});
  write_json(a.out, j);
  std::cout << "wrote " << a.out << " (T=" << cfg.T << ", C=" << label.num_classes() << ")\n";
  return 0;
}

struct DiffuseArgs {
  std::string map;
  std::string sched;
  std::vector<double> emit_steps = {0.0, 0.25, 0.5, 0.75, 1.0};
  std::string coupling = "coupled";
  CLI::Option* coupling_opt = nullptr;
  std::uint64_t map_id = 0;
  std::string out_dir;
};

int cmd_diffuse_labels(const DiffuseArgs& a, RunConfig cfg) {
  if (a.coupling_opt->count() > 0) cfg.sampler.coupling = coupling_from_string(a.coupling);
  const SemanticMap y0 = load_map(a.map);
  const ScheduleBundle bundle = load_schedule(a.sched);
  const LabelSchedule& sched = bundle.label;
  const int T = sched.steps();
  const RngKey key{cfg.seed, a.map_id};
  fs::create_directories(a.out_dir);

  std::optional<MaskTimeMatrix> times;
  if (cfg.sampler.coupling == Coupling::coupled) {
    times = sample_mask_times(y0, sched, key);
    save_mask_times(*times, fs::path(a.out_dir) / "mask_times.slm", fs::path(a.out_dir) / "mask_times.json");
  }
  json emitted = json::array();
  for (double f : a.emit_steps) {
    if (!(f >= 0.0 && f <= 1.0)) throw ArgumentError("--emit-steps fractions must lie in [0, 1]");
    const int t = static_cast<int>(std::lround(f * T));
    SemanticMap y = y0;
    if (t > 0) y = times ? reconstruct(*times, y0, t) : diffuse_to(y0, sched, t, key);
    const fs::path out = fs::path(a.out_dir) / ("step_" + std::to_string(t) + ".slm");
    save_map(y, out);
    emitted.push_back({{"fraction", f}, {"t", t}, {"file", out.filename().string()}, {"masked", y.count_masked()}});
  }
  json manifest = header("scdm.diffuse-labels.v1", cfg,
                         {{"map", a.map}, {"sched", a.sched}, {"map_id", a.map_id}, {"emit_steps", a.emit_steps}});
  manifest["T"] = T;
  manifest["emitted"] = emitted;
  write_json(fs::path(a.out_dir) / "manifest.json", manifest);
  std::cout << "wrote " << emitted.size() << " maps to " << a.out_dir << "\n";
  return 0;
}

struct CorruptArgs {
  std::string mode = "random";
  int factor = 4;
  int distance = 2;
  double rate = 0.10;
  int unlabeled = 0;
  std::string metric = "chebyshev";
  bool ignore_unlabeled_edges = false;
  std::uint64_t map_id = 0;
  CLI::Option *mode_opt, *factor_opt, *distance_opt, *rate_opt, *unlabeled_opt, *metric_opt, *ignore_opt;
  std::string in;
  std::string out;
};

int cmd_corrupt(const CorruptArgs& a, RunConfig cfg) {
  if (a.mode_opt->count() > 0) cfg.corruption.mode = corruption_mode_from_string(a.mode);
  override_if(a.factor_opt, a.factor, cfg.corruption.ds_factor);
  override_if(a.distance_opt, a.distance, cfg.corruption.edge_distance);
  override_if(a.rate_opt, a.rate, cfg.corruption.random_rate);
  override_if(a.unlabeled_opt, a.unlabeled, cfg.corruption.unlabeled_class);
  if (a.metric_opt->count() > 0) cfg.corruption.metric = distance_metric_from_string(a.metric);
  if (a.ignore_opt->count() > 0) cfg.corruption.ignore_unlabeled_edges = true;
  const SemanticMap y0 = load_map(a.in);
  const SemanticMap noisy = corrupt(y0, cfg.corruption, a.map_id);
  save_map(noisy, a.out);
  write_sidecar(a.out, header("scdm.corrupt.v1", cfg, {{"in", a.in}, {"map_id", a.map_id}}));
  Eigen::Index changed = 0;
  for (Eigen::Index k = 0; k < y0.size(); ++k) changed += y0[k] != noisy[k];
  std::cout << "wrote " << a.out << " (" << changed << " of " << y0.size() << " cells changed)\n";
  return 0;
}

struct TrainArgs {
  std::string spec;
  std::vector<std::string> maps;
  int T = 50;
  std::string eta = "1.0";
  double lambda_vlb = 0.001;
  double drop_rate = 0.2;
  double learning_rate = 0.05;
  int iters = 5000;
  int batch = 8;
  int hidden = 32;
  int embed = 4;
  int height = 8;
  int width = 8;
  int corpus = 64;
  int log_every = 100;
  CLI::Option *T_opt, *eta_opt;
  std::string out_dir;
};

int cmd_train_toy(const TrainArgs& a, RunConfig cfg) {
  override_if(a.T_opt, a.T, cfg.T);
  if (a.eta_opt->count() > 0) cfg.eta = parse_eta(a.eta);
  cfg.toy = toy_spec_from_json(read_text(a.spec));
  const int C = cfg.toy.num_classes();

  std::vector<SemanticMap> maps;
  if (!a.maps.empty()) {
    for (const auto& p : a.maps) maps.push_back(load_map(p));
  } else {
    maps = random_rect_corpus(a.corpus, a.height, a.width, C, cfg.seed);
  }
  std::vector<TrainExample> data;
  for (std::size_t i = 0; i < maps.size(); ++i) {
    if (maps[i].num_classes() != C) throw ArgumentError("training map class count does not match the toy spec");
    CounterStream rng(cfg.seed, "train.data", {static_cast<std::uint64_t>(i)});
    data.push_back({sample_toy_image(cfg.toy, maps[i], rng), maps[i]});
  }

  StatsOptions options;
  options.clamp_phi = true;
  options.unlabeled_class = cfg.corruption.unlabeled_class;
  const ClassStats stats = estimate_stats(maps, options);
  std::set<int> uniform = {cfg.corruption.unlabeled_class};
  for (int c = 0; c < C; ++c) {
    if (stats.product(c) <= 1.0) uniform.insert(c);
  }
  const LabelSchedule label = build_label_schedule(stats, cfg.T, cfg.eta, uniform);
  const ImageSchedule image = build_image_schedule(cfg.T, cfg.image_kind);

  MlpConfig mc;
  mc.num_classes = C;
  mc.channels = cfg.toy.channels();
  mc.embed_dim = a.embed;
  mc.hidden = a.hidden;
  mc.steps = cfg.T;
  mc.learn_variance = true;
  MlpDenoiser model(mc, cfg.seed);

  TrainConfig tc;
  tc.lambda_vlb = a.lambda_vlb;
  tc.drop_rate = a.drop_rate;
  tc.learning_rate = a.learning_rate;

  fs::create_directories(a.out_dir);
  const json h = header("scdm.train-toy.v1", cfg,
                        {{"spec", a.spec}, {"maps", a.maps}, {"iters", a.iters}, {"batch", a.batch},
                         {"lambda_vlb", a.lambda_vlb}, {"drop_rate", a.drop_rate}, {"learning_rate", a.learning_rate},
                         {"hidden", a.hidden}, {"embed", a.embed}, {"corpus", a.corpus}});
  std::ostringstream log;
  log << "# " << h.dump() << "\n";
  log << "iter,l_simple,l_vlb,hybrid,dropped\n";
  CounterStream rng(cfg.seed, "train.step");
  std::vector<TrainExample> batch;
  LossReport last;
  for (int it = 1; it <= a.iters; ++it) {
    batch.clear();
    for (int b = 0; b < a.batch; ++b) batch.push_back(data[rng.below(data.size())]);
    last = train_step(model, batch, label, image, tc, rng);
    if (it % a.log_every == 0 || it == a.iters) {
      log << it << ',' << last.l_simple << ',' << last.l_vlb << ',' << last.hybrid << ',' << last.dropped << "\n";
    }
  }
  save_checkpoint(model, fs::path(a.out_dir) / "checkpoint.bin");
  json den = {{"flavor", "mlp"}, {"checkpoint", "checkpoint.bin"}};
  den["generator"] = h;
  write_json(fs::path(a.out_dir) / "denoiser.json", den);
  json sched = json::parse(schedule_to_json(label, image));
  sched["generator"] = h;
  write_json(fs::path(a.out_dir) / "sched.json", sched);
  write_atomic(fs::path(a.out_dir) / "loss.csv", log.str());
  std::cout << "trained " << a.iters << " iterations; final l_simple=" << last.l_simple << " l_vlb=" << last.l_vlb
            << "; wrote " << a.out_dir << "\n";
  return 0;
}

struct SampleArgs {
  std::string map;
  std::string sched;
  std::string denoiser;
  int steps = 50;
  double cfg_scale = 0.5;
  double extrapolation = 0.0;
  double percentile = 0.95;
  std::string variance = "fixed_small";
  std::string coupling = "coupled";
  bool force = true;
  std::uint64_t index = 0;
  CLI::Option *steps_opt, *cfg_opt, *extra_opt, *pct_opt, *var_opt, *coupling_opt, *force_opt;
  std::string out;
};

int cmd_sample(const SampleArgs& a, RunConfig cfg) {
  SamplerConfig& sc = cfg.sampler;
  override_if(a.steps_opt, a.steps, sc.steps);
  override_if(a.cfg_opt, a.cfg_scale, sc.cfg_scale);
  override_if(a.extra_opt, a.extrapolation, sc.extrapolation);
  override_if(a.pct_opt, a.percentile, sc.threshold_percentile);
  if (a.var_opt->count() > 0) sc.variance = variance_mode_from_string(a.variance);
  if (a.coupling_opt->count() > 0) sc.coupling = coupling_from_string(a.coupling);
  override_if(a.force_opt, a.force, sc.force_full_mask_at_T);

  const SemanticMap y0 = load_map(a.map);
  const ScheduleBundle bundle = load_schedule(a.sched);
  cfg.T = bundle.label.steps();
  cfg.eta = bundle.label.eta();
  cfg.image_kind = bundle.image.kind();
  const auto den = load_denoiser(a.denoiser, bundle.image);
  const ToyImage x = sample(*den, y0, bundle.label, bundle.image, sc, a.index);
  save_image(x, a.out);
  write_sidecar(a.out, header("scdm.sample.v1", cfg,
                              {{"map", a.map}, {"sched", a.sched}, {"denoiser", a.denoiser}, {"index", a.index}}));
  std::cout << "wrote " << a.out << " (" << x.height() << "x" << x.width() << "x" << x.channels() << ", "
            << respace(bundle.image.steps(), sc.steps).size() << " steps)\n";
  return 0;
}

struct MetricsArgs {
  std::string task;
  std::vector<std::string> a;
  std::vector<std::string> b;
  int ignore = -1;
  std::string stats;
  double data_range = 2.0;
  int window = 7;
  bool gaussian = false;
  std::string report;
};

// Rows are feature vectors: a CSV file contributes its rows, a SIM1 image
// contributes one flattened row.
Eigen::MatrixXd load_features(const std::vector<std::string>& paths) {
  std::vector<std::vector<double>> rows;
  for (const auto& p : paths) {
    if (fs::path(p).extension() == ".csv") {
      std::istringstream in(read_text(p));
      std::string line;
      while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::vector<double> row;
        std::istringstream cells(line);
        std::string cell;
        while (std::getline(cells, cell, ',')) {
          try {
            row.push_back(std::stod(cell));
          } catch (const std::logic_error&) {
            throw FormatError("feature CSV has a non-numeric cell in " + p);
          }
        }
        rows.push_back(std::move(row));
      }
    } else {
      const ToyImage img = load_image(p);
      rows.emplace_back(img.values().data(), img.values().data() + img.size());
    }
  }
  if (rows.empty()) throw ArgumentError("no feature vectors given");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows.front().size()) throw ArgumentError("feature vectors differ in length");
    for (std::size_t k = 0; k < rows[i].size(); ++k) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
  }
  return m;
}

int cmd_metrics(const MetricsArgs& a, const RunConfig& cfg) {
  json records = json::array();
  std::optional<int> ignore;
  if (a.ignore >= 0) ignore = a.ignore;
  auto paired = [&](auto&& fn) {
    if (a.a.size() != a.b.size()) throw ArgumentError("--a and --b must list the same number of files");
    double sum = 0.0;
    for (std::size_t i = 0; i < a.a.size(); ++i) {
      const double v = fn(a.a[i], a.b[i]);
      records.push_back({{"a", a.a[i]}, {"b", a.b[i]}, {"value", std::isfinite(v) ? json(v) : json("inf")}});
      sum += v;
    }
    return sum / static_cast<double>(a.a.size());
  };

  json summary;
  if (a.task == "miou") {
    const double m = paired([&](const std::string& p, const std::string& q) { return miou(load_map(p), load_map(q), ignore); });
    summary["mean"] = m;
  } else if (a.task == "grouped-miou") {
    if (a.stats.empty()) throw ArgumentError("grouped-miou needs --stats for the psi*phi ranking");
    const auto products = load_stats(a.stats).products();
    const GroupAssignment groups = assign_groups(products);
    if (a.a.size() != a.b.size()) throw ArgumentError("--a and --b must list the same number of files");
    for (std::size_t i = 0; i < a.a.size(); ++i) {
      const GroupedMiou g = grouped_miou(load_map(a.a[i]), load_map(a.b[i]), groups, ignore);
      records.push_back({{"a", a.a[i]},
                         {"b", a.b[i]},
                         {"all", optional_number(g.all)},
                         {"frequent", optional_number(g.frequent)},
                         {"common", optional_number(g.common)},
                         {"rare", optional_number(g.rare)}});
    }
    json names = json::array();
    for (auto g : groups.group) names.push_back(to_string(g));
    summary["groups"] = names;
  } else if (a.task == "psnr") {
    std::vector<double> values;
    paired([&](const std::string& p, const std::string& q) {
      const double v = psnr(load_image(p), load_image(q), a.data_range);
      values.push_back(std::min(v, kPsnrCapDb));
      return v;
    });
    double s = 0.0;
    for (double v : values) s += v;
    summary["mean_capped_db"] = s / static_cast<double>(values.size());
    summary["cap_db"] = kPsnrCapDb;
  } else if (a.task == "ssim") {
    SsimOptions o;
    o.window = a.window;
    o.data_range = a.data_range;
    o.kind = a.gaussian ? SsimWindow::gaussian : SsimWindow::uniform;
    summary["mean"] = paired([&](const std::string& p, const std::string& q) { return ssim(load_image(p), load_image(q), o); });
  } else if (a.task == "frechet") {
    const Eigen::MatrixXd fa = load_features(a.a);
    const Eigen::MatrixXd fb = load_features(a.b);
    const double d = frechet_gaussian(fa, fb);
    records.push_back({{"a", a.a}, {"b", a.b}, {"value", d}, {"n_a", fa.rows()}, {"n_b", fb.rows()}, {"dim", fa.cols()}});
    summary["value"] = d;
  } else {
    throw ArgumentError("unknown metrics task: " + a.task);
  }

  json report = header("scdm.metrics.v1", cfg,
                       {{"task", a.task}, {"a", a.a}, {"b", a.b}, {"ignore", a.ignore >= 0 ? json(a.ignore) : json(nullptr)},
                        {"stats", a.stats}, {"data_range", a.data_range}, {"window", a.window}, {"gaussian", a.gaussian}});
  report["records"] = records;
  report["summary"] = summary;
  if (a.report.empty()) {
    std::cout << report.dump(2) << "\n";
  } else {
    write_json(a.report, report);
    std::cout << a.task << ": " << summary.dump() << "\n";
  }
  return 0;
}

struct VerifyArgs {
  std::vector<std::string> targets;
  VerifyConfig vc;
  std::string report;
};

int cmd_verify(VerifyArgs a, const RunConfig& cfg) {
  if (a.targets.size() == 1 && a.targets.front() == "all") a.targets = verify_targets();
  a.vc.seed = cfg.seed;
  const auto results = run_verify(a.targets, a.vc);
  json report = verify_report(results, a.vc);
  report["config"] = run_config_to_json(cfg);
  if (!a.report.empty()) write_json(a.report, report);
  bool ok = true;
  for (const auto& r : results) {
    ok = ok && r.passed;
    std::cout << (r.passed ? "PASS " : "FAIL ") << r.target << ": " << r.name << " = " << r.measured
              << " (tolerance " << r.tolerance << ", " << r.seconds << " s)\n";
  }
  return ok ? 0 : kExitCheckFailed;
}

struct AblateArgs {
  int T = 100;
  int pairs = 100;
  std::vector<int> step_counts;
  std::vector<std::string> modes;
  CLI::Option *T_opt, *pairs_opt, *steps_opt, *modes_opt;
  std::string out;
};

int cmd_ablate(const AblateArgs& a, RunConfig cfg, bool from_config) {
  if (!from_config) cfg.T = 100;
  override_if(a.T_opt, a.T, cfg.T);
  override_if(a.pairs_opt, a.pairs, cfg.pairs);
  override_if(a.steps_opt, a.step_counts, cfg.step_counts);
  override_if(a.modes_opt, a.modes, cfg.ablate_modes);
  const auto rows = run_ablation(cfg);
  write_atomic(a.out, ablation_csv(rows, cfg));
  for (const auto& r : rows) {
    std::cout << r.mode << " " << r.method << " steps=" << r.steps << " mean_sq_distance=" << r.stats.mean_sq_distance;
    if (r.stats.baseline_identical) std::cout << (*r.stats.baseline_identical ? " [bitwise baseline]" : " [BASELINE MISMATCH]");
    std::cout << "\n";
  }
  std::cout << "wrote " << a.out << " (" << rows.size() << " rows)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic conditional diffusion toolkit for semantic image synthesis at desk scale"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  Common common;

  StatsArgs stats;
  auto* s_stats = app.add_subcommand("estimate-stats", "estimate psi/phi class statistics from SLM1 maps");
  add_common(s_stats, common);
  s_stats->add_option("--maps", stats.maps, "SLM1 label maps")->required();
  s_stats->add_flag("--clamp-phi", stats.clamp_phi, "clamp phi to at least 1");
  s_stats->add_option("--unlabeled", stats.unlabeled, "unlabeled class id");
  stats.target_opt = s_stats->add_option("--target-min-product", stats.target, "rescale psi so min psi*phi equals this");
  s_stats->add_option("--out", stats.out, "stats JSON")->required();

  ScheduleArgs sched;
  auto* s_sched = app.add_subcommand("schedule", "build label and image schedules");
  add_common(s_sched, common);
  s_sched->add_option("--stats", sched.stats, "stats JSON")->required();
  sched.T_opt = s_sched->add_option("--T", sched.T, "diffusion steps");
  sched.eta_opt = s_sched->add_option("--eta", sched.eta, "eta, or 'inf' for no label diffusion");
  sched.kind_opt = s_sched->add_option("--kind", sched.kind, "image schedule")->check(CLI::IsMember({"linear_beta", "cosine"}));
  sched.uniform_opt = s_sched->add_option("--uniform-classes", sched.uniform_classes, "classes on the uniform schedule")->delimiter(',');
  s_sched->add_option("--out", sched.out, "schedule JSON")->required();

  DiffuseArgs diff;
  auto* s_diff = app.add_subcommand("diffuse-labels", "run the label forward process and dump a trajectory");
  add_common(s_diff, common);
  s_diff->add_option("--map", diff.map, "SLM1 label map")->required();
  s_diff->add_option("--sched", diff.sched, "schedule JSON")->required();
  s_diff->add_option("--emit-steps", diff.emit_steps, "fractions of T to emit")->delimiter(',');
  diff.coupling_opt = s_diff->add_option("--coupling", diff.coupling, "coupled|fresh")->check(CLI::IsMember({"coupled", "fresh"}));
  s_diff->add_option("--map-id", diff.map_id, "map index for the RNG stream");
  s_diff->add_option("--out-dir", diff.out_dir, "output directory")->required();

  CorruptArgs cor;
  auto* s_cor = app.add_subcommand("corrupt", "apply a DS, Edge or Random label corruption");
  add_common(s_cor, common);
  cor.mode_opt = s_cor->add_option("--mode", cor.mode, "ds|edge|random")->check(CLI::IsMember({"ds", "edge", "random"}));
  cor.factor_opt = s_cor->add_option("--factor", cor.factor, "DS factor");
  cor.distance_opt = s_cor->add_option("--distance", cor.distance, "edge band distance");
  cor.rate_opt = s_cor->add_option("--rate", cor.rate, "random flip rate");
  cor.unlabeled_opt = s_cor->add_option("--unlabeled", cor.unlabeled, "unlabeled class id");
  cor.metric_opt = s_cor->add_option("--metric", cor.metric, "chebyshev|manhattan|euclidean")
                       ->check(CLI::IsMember({"chebyshev", "manhattan", "euclidean"}));
  cor.ignore_opt = s_cor->add_flag("--ignore-unlabeled-edges", cor.ignore_unlabeled_edges,
                                   "do not treat borders with the unlabeled class as edges");
  s_cor->add_option("--map-id", cor.map_id, "map index for the RNG stream");
  s_cor->add_option("--in", cor.in, "input SLM1")->required();
  s_cor->add_option("--out", cor.out, "output SLM1")->required();

  TrainArgs tr;
  auto* s_tr = app.add_subcommand("train-toy", "train the small MLP denoiser on toy data");
  add_common(s_tr, common);
  s_tr->add_option("--spec", tr.spec, "toy data spec JSON")->required();
  s_tr->add_option("--maps", tr.maps, "training maps (default: generated rectangles)");
  tr.T_opt = s_tr->add_option("--T", tr.T, "diffusion steps");
  tr.eta_opt = s_tr->add_option("--eta", tr.eta, "eta, or 'inf'");
  s_tr->add_option("--lambda-vlb", tr.lambda_vlb, "weight of L_vlb");
  s_tr->add_option("--drop-rate", tr.drop_rate, "probability of the null label map");
  s_tr->add_option("--lr", tr.learning_rate, "SGD learning rate");
  s_tr->add_option("--iters", tr.iters, "training iterations");
  s_tr->add_option("--batch", tr.batch, "examples per step");
  s_tr->add_option("--hidden", tr.hidden, "hidden width");
  s_tr->add_option("--embed", tr.embed, "label embedding width");
  s_tr->add_option("--height", tr.height, "generated map height");
  s_tr->add_option("--width", tr.width, "generated map width");
  s_tr->add_option("--corpus", tr.corpus, "generated corpus size");
  s_tr->add_option("--log-every", tr.log_every, "loss log interval");
  s_tr->add_option("--out-dir", tr.out_dir, "output directory")->required();

  SampleArgs sa;
  auto* s_sa = app.add_subcommand("sample", "sample an image for a label map");
  add_common(s_sa, common);
  s_sa->add_option("--map", sa.map, "SLM1 label map")->required();
  s_sa->add_option("--sched", sa.sched, "schedule JSON")->required();
  s_sa->add_option("--denoiser", sa.denoiser, "denoiser JSON (oracle or mlp)")->required();
  sa.steps_opt = s_sa->add_option("--steps", sa.steps, "sampling steps");
  sa.cfg_opt = s_sa->add_option("--cfg-scale", sa.cfg_scale, "guidance scale s");
  sa.extra_opt = s_sa->add_option("--extrapolation", sa.extrapolation, "extrapolation scale w");
  sa.pct_opt = s_sa->add_option("--percentile", sa.percentile, "dynamic thresholding percentile");
  sa.var_opt = s_sa->add_option("--variance", sa.variance, "fixed_small|fixed_large|learned")
                   ->check(CLI::IsMember({"fixed_small", "fixed_large", "learned"}));
  sa.coupling_opt = s_sa->add_option("--coupling", sa.coupling, "coupled|fresh")->check(CLI::IsMember({"coupled", "fresh"}));
  sa.force_opt = s_sa->add_option("--force-full-mask-at-T", sa.force, "fully mask the label at the first step (true|false)");
  s_sa->add_option("--index", sa.index, "sample index for the RNG streams");
  s_sa->add_option("--out", sa.out, "output SIM1")->required();

  MetricsArgs me;
  auto* s_me = app.add_subcommand("metrics", "evaluate label or image metrics");
  add_common(s_me, common);
  s_me->add_option("--task", me.task, "miou|grouped-miou|psnr|ssim|frechet")
      ->required()
      ->check(CLI::IsMember({"miou", "grouped-miou", "psnr", "ssim", "frechet"}));
  s_me->add_option("--a", me.a, "first file(s)")->required();
  s_me->add_option("--b", me.b, "second file(s)")->required();
  s_me->add_option("--ignore", me.ignore, "class id excluded from mIoU");
  s_me->add_option("--stats", me.stats, "stats JSON for grouped-miou");
  s_me->add_option("--data-range", me.data_range, "image data range");
  s_me->add_option("--window", me.window, "SSIM window");
  s_me->add_flag("--gaussian", me.gaussian, "Gaussian SSIM window");
  s_me->add_option("--report", me.report, "report JSON (default: stdout)");

  VerifyArgs ve;
  auto* s_ve = app.add_subcommand("verify", "run the built-in verification checks");
  add_common(s_ve, common);
  s_ve->add_option("--targets", ve.targets, "comma-separated subset of prop1,prop2,marginal,trajectory,oracle,gradcheck, or all")
      ->required()
      ->delimiter(',');
  s_ve->add_option("--product", ve.vc.product, "psi*phi for prop1");
  s_ve->add_option("--T", ve.vc.T, "T for prop1");
  s_ve->add_option("--tolerance", ve.vc.prop1_tolerance, "prop1 tolerance");
  s_ve->add_option("--classifiers", ve.vc.prop2_classifiers, "random classifiers for prop2");
  s_ve->add_option("--schedules", ve.vc.marginal_schedules, "random schedules for marginal");
  s_ve->add_option("--trials", ve.vc.trajectory_trials, "trajectory trials");
  s_ve->add_option("--marginal-trials", ve.vc.marginal_trials, "single-time marginal trials");
  s_ve->add_option("--probes", ve.vc.oracle_probes, "oracle probes");
  s_ve->add_option("--report", ve.report, "report JSON");

  AblateArgs ab;
  auto* s_ab = app.add_subcommand("ablate", "ablation and shared-seed robustness harness (CSV)");
  add_common(s_ab, common);
  ab.T_opt = s_ab->add_option("--T", ab.T, "diffusion steps (default 100)");
  ab.pairs_opt = s_ab->add_option("--pairs", ab.pairs, "paired samples per row");
  ab.steps_opt = s_ab->add_option("--step-counts", ab.step_counts, "sampling step counts")->delimiter(',');
  ab.modes_opt = s_ab->add_option("--modes", ab.modes, "corruption modes")->delimiter(',');
  s_ab->add_option("--out", ab.out, "output CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return e.get_exit_code() == 0 ? code : kExitUsage;
  }

  try {
    const RunConfig cfg = resolve_config(common);
    if (s_stats->parsed()) return cmd_estimate_stats(stats, cfg);
    if (s_sched->parsed()) return cmd_schedule(sched, cfg);
    if (s_diff->parsed()) return cmd_diffuse_labels(diff, cfg);
    if (s_cor->parsed()) return cmd_corrupt(cor, cfg);
    if (s_tr->parsed()) return cmd_train_toy(tr, cfg);
    if (s_sa->parsed()) return cmd_sample(sa, cfg);
    if (s_me->parsed()) return cmd_metrics(me, cfg);
    if (s_ve->parsed()) return cmd_verify(ve, cfg);
    if (s_ab->parsed()) return cmd_ablate(ab, cfg, !common.config_path.empty());
  } catch (const ArgumentError& e) {
    std::cerr << "scdm: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    std::cerr << "scdm: " << e.what() << "\n";
    return kExitError;
  } catch (const std::exception& e) {
    std::cerr << "scdm: " << e.what() << "\n";
    return kExitError;
  }
  return kExitUsage;
}
