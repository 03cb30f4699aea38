// Copyright 2026 The SCDM Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "scdm/mlp.hpp"

#include <bit>
#include <cmath>
#include <numbers>

#include <json.hpp>

#include "scdm/io_util.hpp"
#include "scdm/rng.hpp"

namespace scdm {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Layout {
  Eigen::Index emb, w1, b1, w2, b2, total;
  Eigen::Index in, hidden, out, classes, embed;
};

Layout layout_of(const MlpConfig& c) {
  Layout l{};
  l.classes = c.num_classes;
  l.embed = c.embed_dim;
  l.in = c.channels + c.embed_dim + 3;
  l.hidden = c.hidden;
  l.out = c.channels * (c.learn_variance ? 2 : 1);
  l.emb = 0;
  l.w1 = l.emb + l.classes * l.embed;
  l.b1 = l.w1 + l.hidden * l.in;
  l.w2 = l.b1 + l.hidden;
  l.b2 = l.w2 + l.out * l.hidden;
  l.total = l.b2 + l.out;
  return l;
}

template <typename Vec>
auto mat(Vec& v, Eigen::Index offset, Eigen::Index rows, Eigen::Index cols) {
  using Scalar = std::remove_reference_t<decltype(v.data()[0])>;
  using M = std::conditional_t<std::is_const_v<Scalar>, const RowMat, RowMat>;
  return Eigen::Map<M>(v.data() + offset, rows, cols);
}

void check_config(const MlpConfig& c) {
  if (c.num_classes < 1 || c.channels < 1 || c.embed_dim < 0 || c.hidden < 1 || c.steps < 1) {
    throw ArgumentError("mlp: invalid configuration");
  }
}

}  // namespace

Eigen::Index MlpDenoiser::parameter_count(const MlpConfig& config) { return layout_of(config).total; }

MlpDenoiser::MlpDenoiser(MlpConfig config, std::uint64_t seed) : config_(config) {
  check_config(config_);
  const Layout l = layout_of(config_);
  params_ = Eigen::VectorXd::Zero(l.total);
  CounterStream rng(seed, "mlp.init");
  for (Eigen::Index k = l.emb; k < l.w1; ++k) params_(k) = 0.5 * rng.normal();
  const double s1 = 1.0 / std::sqrt(static_cast<double>(l.in));
  for (Eigen::Index k = l.w1; k < l.b1; ++k) params_(k) = s1 * rng.normal();
  const double s2 = 0.5 / std::sqrt(static_cast<double>(l.hidden));
  for (Eigen::Index k = l.w2; k < l.b2; ++k) params_(k) = s2 * rng.normal();
}

MlpDenoiser::MlpDenoiser(MlpConfig config, Eigen::VectorXd parameters) : config_(config), params_(std::move(parameters)) {
  check_config(config_);
  if (params_.size() != parameter_count(config_)) throw ArgumentError("mlp: parameter vector has the wrong length");
}

void MlpDenoiser::check_inputs(const ToyImage& x_t, const SemanticMap& y) const {
  if (x_t.channels() != config_.channels) throw ArgumentError("mlp: channel mismatch");
  if (y.num_classes() != config_.num_classes || y.height() != x_t.height() || y.width() != x_t.width()) {
    throw ArgumentError("mlp: label map does not match image");
  }
}

Eigen::MatrixXd MlpDenoiser::features(const ToyImage& x_t, const SemanticMap& y, int t) const {
  const Layout l = layout_of(config_);
  const auto emb = mat(params_, l.emb, l.classes, l.embed);
  Eigen::MatrixXd f = Eigen::MatrixXd::Zero(x_t.pixels(), l.in);
  f.leftCols(config_.channels) = x_t.values();
  const double phase = static_cast<double>(t) / config_.steps;
  for (Eigen::Index k = 0; k < x_t.pixels(); ++k) {
    const ClassId label = y[k];
    if (label < config_.num_classes && l.embed > 0) f.row(k).segment(config_.channels, l.embed) = emb.row(label);
    f(k, l.in - 3) = phase;
    f(k, l.in - 2) = std::sin(2.0 * std::numbers::pi * phase);
    f(k, l.in - 1) = std::cos(2.0 * std::numbers::pi * phase);
  }
  return f;
}

DenoiserOutput MlpDenoiser::predict(const ToyImage& x_t, const SemanticMap& y, int t) const {
  check_inputs(x_t, y);
  const Layout l = layout_of(config_);
  const auto w1 = mat(params_, l.w1, l.hidden, l.in);
  const auto w2 = mat(params_, l.w2, l.out, l.hidden);
  const Eigen::Map<const Eigen::RowVectorXd> b1(params_.data() + l.b1, l.hidden);
  const Eigen::Map<const Eigen::RowVectorXd> b2(params_.data() + l.b2, l.out);

  const Eigen::MatrixXd hidden = ((features(x_t, y, t) * w1.transpose()).rowwise() + b1).array().tanh().matrix();
  const Eigen::MatrixXd out = (hidden * w2.transpose()).rowwise() + b2;

  const int ch = config_.channels;
  DenoiserOutput result{ToyImage(x_t.height(), x_t.width(), ToyImage::Pixels(out.leftCols(ch))), std::nullopt};
  if (config_.learn_variance) {
    result.variance_logit = ToyImage(x_t.height(), x_t.width(), ToyImage::Pixels(out.rightCols(ch)));
  }
  return result;
}

void MlpDenoiser::backward(const ToyImage& x_t, const SemanticMap& y, int t, const ToyImage& grad_eps,
                           const ToyImage* grad_variance, Eigen::VectorXd& grad) const {
  check_inputs(x_t, y);
  const Layout l = layout_of(config_);
  if (grad.size() != l.total) throw ArgumentError("mlp: gradient buffer has the wrong length");
  const auto w1 = mat(params_, l.w1, l.hidden, l.in);
  const auto w2 = mat(params_, l.w2, l.out, l.hidden);
  const Eigen::Map<const Eigen::RowVectorXd> b1(params_.data() + l.b1, l.hidden);

  const Eigen::MatrixXd feats = features(x_t, y, t);
  const Eigen::MatrixXd hidden = ((feats * w1.transpose()).rowwise() + b1).array().tanh().matrix();

  const int ch = config_.channels;
  Eigen::MatrixXd d_out = Eigen::MatrixXd::Zero(x_t.pixels(), l.out);
  d_out.leftCols(ch) = grad_eps.values();
  if (config_.learn_variance && grad_variance) d_out.rightCols(ch) = grad_variance->values();

  auto g_w2 = mat(grad, l.w2, l.out, l.hidden);
  Eigen::Map<Eigen::RowVectorXd> g_b2(grad.data() + l.b2, l.out);
  g_w2 += d_out.transpose() * hidden;
  g_b2 += d_out.colwise().sum();

  const Eigen::MatrixXd d_z1 = ((d_out * w2).array() * (1.0 - hidden.array().square())).matrix();
  auto g_w1 = mat(grad, l.w1, l.hidden, l.in);
  Eigen::Map<Eigen::RowVectorXd> g_b1(grad.data() + l.b1, l.hidden);
  g_w1 += d_z1.transpose() * feats;
  g_b1 += d_z1.colwise().sum();

  if (l.embed > 0) {
    const Eigen::MatrixXd d_feats = d_z1 * w1;
    auto g_emb = mat(grad, l.emb, l.classes, l.embed);
    for (Eigen::Index k = 0; k < x_t.pixels(); ++k) {
      const ClassId label = y[k];
      if (label < config_.num_classes) g_emb.row(label) += d_feats.row(k).segment(ch, l.embed);
    }
  }
}

void save_checkpoint(const MlpDenoiser& model, const std::filesystem::path& path) {
  const auto& c = model.config();
  nlohmann::ordered_json header;
  header["version"] = 1;
  header["flavor"] = "mlp";
  header["num_classes"] = c.num_classes;
  header["channels"] = c.channels;
  header["embed_dim"] = c.embed_dim;
  header["hidden"] = c.hidden;
  header["steps"] = c.steps;
  header["learn_variance"] = c.learn_variance;
  header["param_count"] = model.parameters().size();
  header["dtype"] = "f32le";
  const std::string line = header.dump() + "\n";
  std::vector<std::uint8_t> bytes(line.begin(), line.end());
  for (Eigen::Index k = 0; k < model.parameters().size(); ++k) {
    const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(model.parameters()(k)));
    for (int b = 0; b < 4; ++b) bytes.push_back(static_cast<std::uint8_t>(bits >> (8 * b)));
  }
  write_atomic(path, bytes);
}

MlpDenoiser load_checkpoint(const std::filesystem::path& path) {
  const auto bytes = read_bytes(path);
  std::size_t pos = 0;
  const std::string_view line = next_line(bytes, pos);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint header is not valid JSON: ") + e.what());
  }
  MlpConfig c;
  Eigen::Index count = 0;
  try {
    if (header.at("flavor").get<std::string>() != "mlp") throw FormatError("checkpoint is not an mlp");
    c.num_classes = header.at("num_classes").get<int>();
    c.channels = header.at("channels").get<int>();
    c.embed_dim = header.at("embed_dim").get<int>();
    c.hidden = header.at("hidden").get<int>();
    c.steps = header.at("steps").get<int>();
    c.learn_variance = header.at("learn_variance").get<bool>();
    count = header.at("param_count").get<Eigen::Index>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint header missing field: ") + e.what());
  }
  check_config(c);
  if (count != MlpDenoiser::parameter_count(c)) throw FormatError("checkpoint param_count does not match its config");
  const auto need = static_cast<std::size_t>(count) * 4;
  if (bytes.size() - pos < need) throw TruncatedError("checkpoint parameter block truncated");
  if (bytes.size() - pos > need) throw FormatError("trailing bytes after checkpoint parameters");
  Eigen::VectorXd params(count);
  for (Eigen::Index k = 0; k < count; ++k) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) bits |= std::uint32_t{bytes[pos + 4 * static_cast<std::size_t>(k) + static_cast<std::size_t>(b)]} << (8 * b);
    params(k) = static_cast<double>(std::bit_cast<float>(bits));
  }
  return MlpDenoiser(c, std::move(params));
}

}  // namespace scdm
