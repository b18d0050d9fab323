/*
 * Copyright 2026 The Anchorline Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include "anchorline/gestures.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include <json.hpp>

#include "anchorline/errors.hpp"
#include "internal/io.hpp"

namespace anchorline {
namespace {

constexpr std::array<const char*, kGestureClasses> kLabelNames = {"stop", "come_here", "point",
                                                                  "background"};

RowMatrix relu(const RowMatrix& a) { return a.cwiseMax(0.0); }

// log(1 + e^z) without overflow.
double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// Activations kept for the backward pass.
struct Tape {
  RowMatrix tokens;  // (B*T) x 19
  RowMatrix a1, h1, a2, h2, q, k, v;
  std::vector<RowMatrix> attention;
  RowMatrix pooled;  // B x 128
  RowMatrix logits;  // B x 4
};

Tape run(const GestureNet& net, const RowMatrix& inputs) {
  if (inputs.cols() != kWindowFeatures) {
    throw Error(Errc::InvalidArgument, "expected " + std::to_string(kWindowFeatures) +
                                           " features per window");
  }
  const Eigen::Index batch = inputs.rows();
  Tape t;
  // Row-major storage makes this a reshape: each window becomes 12 rows.
  t.tokens = Eigen::Map<const RowMatrix>(inputs.data(), batch * kWindowFrames, kJoints);
  t.a1 = (t.tokens * net.token_w).rowwise() + net.token_b;
  t.h1 = relu(t.a1);
  t.a2 = (t.h1 * net.hidden_w).rowwise() + net.hidden_b;
  t.h2 = relu(t.a2);
  t.q = t.h2 * net.query_w;
  t.k = t.h2 * net.key_w;
  t.v = t.h2 * net.value_w;
  const double scale = 1.0 / std::sqrt(static_cast<double>(kGestureHidden));
  t.pooled.resize(batch, kGestureHidden);
  t.attention.resize(static_cast<std::size_t>(batch));
  for (Eigen::Index b = 0; b < batch; ++b) {
    const auto rows = Eigen::seqN(b * kWindowFrames, kWindowFrames);
    RowMatrix s = (t.q(rows, Eigen::all) * t.k(rows, Eigen::all).transpose()) * scale;
    for (Eigen::Index r = 0; r < s.rows(); ++r) {
      auto row = s.row(r);
      row = (row.array() - row.maxCoeff()).exp().matrix();
      row /= row.sum();
    }
    t.pooled.row(b) = (s * t.v(rows, Eigen::all)).colwise().mean();
    t.attention[static_cast<std::size_t>(b)] = std::move(s);
  }
  t.logits = (t.pooled * net.class_w).rowwise() + net.class_b;
  return t;
}

RowMatrix random_uniform(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols,
                         double bound) {
  std::uniform_real_distribution<double> u(-bound, bound);
  RowMatrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

void check_angle(double a) {
  if (!std::isfinite(a) || std::abs(a) > M_PI) {
    throw Error(Errc::InvalidArgument, "flexion angle outside [-pi, pi]");
  }
}

}  // namespace

const char* to_string(GestureLabel label) { return kLabelNames[static_cast<int>(label)]; }

GestureLabel gesture_label_from_string(std::string_view name) {
  for (int i = 0; i < kGestureClasses; ++i) {
    if (name == kLabelNames[i]) return static_cast<GestureLabel>(i);
  }
  throw Error(Errc::InvalidArgument, "unknown gesture label '" + std::string(name) + "'");
}

std::vector<GestureWindow> window_stream(const std::vector<HandFrame>& frames) {
  if (frames.size() < kWindowFrames) {
    throw Error(Errc::TooFewFrames, "need at least " + std::to_string(kWindowFrames) +
                                        " frames, got " + std::to_string(frames.size()));
  }
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (i > 0 && !(frames[i].timestamp > frames[i - 1].timestamp)) {
      throw Error(Errc::InvalidArgument,
                  "timestamps must strictly increase (frame " + std::to_string(i) + ")");
    }
    for (double a : frames[i].flexion) check_angle(a);
  }
  std::vector<GestureWindow> out(frames.size() - kWindowFrames + 1);
  for (std::size_t k = 0; k < out.size(); ++k) {
    std::copy_n(frames.begin() + static_cast<std::ptrdiff_t>(k), kWindowFrames,
                out[k].frames.begin());
  }
  return out;
}

Eigen::VectorXd flatten(const GestureWindow& w) {
  Eigen::VectorXd x(kWindowFeatures);
  for (int t = 0; t < kWindowFrames; ++t) {
    for (int j = 0; j < kJoints; ++j) x[t * kJoints + j] = w.frames[t].flexion[j];
  }
  return x;
}

GestureNet GestureNet::zeros() {
  GestureNet n;
  n.token_w = RowMatrix::Zero(kJoints, kGestureHidden);
  n.token_b = Eigen::RowVectorXd::Zero(kGestureHidden);
  n.hidden_w = RowMatrix::Zero(kGestureHidden, kGestureHidden);
  n.hidden_b = Eigen::RowVectorXd::Zero(kGestureHidden);
  n.query_w = RowMatrix::Zero(kGestureHidden, kGestureHidden);
  n.key_w = RowMatrix::Zero(kGestureHidden, kGestureHidden);
  n.value_w = RowMatrix::Zero(kGestureHidden, kGestureHidden);
  n.class_w = RowMatrix::Zero(kGestureHidden, kGestureClasses);
  n.class_b = Eigen::RowVectorXd::Zero(kGestureClasses);
  return n;
}

GestureNet GestureNet::initialize(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const double in_bound = 1.0 / std::sqrt(static_cast<double>(kJoints));
  const double hid_bound = 1.0 / std::sqrt(static_cast<double>(kGestureHidden));
  GestureNet n;
  n.token_w = random_uniform(rng, kJoints, kGestureHidden, in_bound);
  n.token_b = random_uniform(rng, 1, kGestureHidden, in_bound);
  n.hidden_w = random_uniform(rng, kGestureHidden, kGestureHidden, hid_bound);
  n.hidden_b = random_uniform(rng, 1, kGestureHidden, hid_bound);
  n.query_w = random_uniform(rng, kGestureHidden, kGestureHidden, hid_bound);
  n.key_w = random_uniform(rng, kGestureHidden, kGestureHidden, hid_bound);
  n.value_w = random_uniform(rng, kGestureHidden, kGestureHidden, hid_bound);
  n.class_w = random_uniform(rng, kGestureHidden, kGestureClasses, hid_bound);
  n.class_b = random_uniform(rng, 1, kGestureClasses, hid_bound);
  return n;
}

std::vector<GestureNet::Param> GestureNet::params() {
  auto p = [](const char* name, auto& m) {
    return Param{name, m.data(), m.rows(), m.cols()};
  };
  return {p("token_w", token_w), p("token_b", token_b),   p("hidden_w", hidden_w),
          p("hidden_b", hidden_b), p("query_w", query_w), p("key_w", key_w),
          p("value_w", value_w), p("class_w", class_w),   p("class_b", class_b)};
}

bool GestureNet::operator==(const GestureNet& o) const {
  return token_w == o.token_w && token_b == o.token_b && hidden_w == o.hidden_w &&
         hidden_b == o.hidden_b && query_w == o.query_w && key_w == o.key_w &&
         value_w == o.value_w && class_w == o.class_w && class_b == o.class_b;
}

ForwardResult forward(const GestureNet& net, const RowMatrix& inputs) {
  Tape t = run(net, inputs);
  return ForwardResult{std::move(t.logits), std::move(t.attention)};
}

double loss_and_gradient(const GestureNet& net, const RowMatrix& inputs,
                         const std::vector<GestureLabel>& labels, GestureNet* grad) {
  const Eigen::Index batch = inputs.rows();
  if (static_cast<std::size_t>(batch) != labels.size() || batch == 0) {
    throw Error(Errc::InvalidArgument, "one label per input row required");
  }
  const Tape t = run(net, inputs);
  RowMatrix target = RowMatrix::Zero(batch, kGestureClasses);
  for (Eigen::Index b = 0; b < batch; ++b) target(b, static_cast<int>(labels[b])) = 1.0;

  double loss = 0.0;
  RowMatrix d_logits(batch, kGestureClasses);
  for (Eigen::Index b = 0; b < batch; ++b) {
    for (int c = 0; c < kGestureClasses; ++c) {
      const double z = t.logits(b, c), y = target(b, c);
      loss += softplus(z) - y * z;
      d_logits(b, c) = (sigmoid(z) - y) / static_cast<double>(batch);
    }
  }
  loss /= static_cast<double>(batch);
  if (grad == nullptr) return loss;

  GestureNet& g = *grad;
  g.class_w = t.pooled.transpose() * d_logits;
  g.class_b = d_logits.colwise().sum();
  const RowMatrix d_pooled = d_logits * net.class_w.transpose();

  const double scale = 1.0 / std::sqrt(static_cast<double>(kGestureHidden));
  RowMatrix d_q(t.q.rows(), kGestureHidden), d_k(t.k.rows(), kGestureHidden),
      d_v(t.v.rows(), kGestureHidden);
  for (Eigen::Index b = 0; b < batch; ++b) {
    const auto rows = Eigen::seqN(b * kWindowFrames, kWindowFrames);
    const RowMatrix& p = t.attention[static_cast<std::size_t>(b)];
    // Mean pooling spreads the gradient evenly over the 12 outputs.
    const RowMatrix d_out =
        RowMatrix::Ones(kWindowFrames, 1) * (d_pooled.row(b) / double{kWindowFrames});
    const RowMatrix d_p = d_out * t.v(rows, Eigen::all).transpose();
    d_v(rows, Eigen::all) = p.transpose() * d_out;
    const Eigen::VectorXd row_dot = (d_p.array() * p.array()).rowwise().sum();
    const RowMatrix d_s =
        (p.array() * (d_p.array().colwise() - row_dot.array())).matrix() * scale;
    d_q(rows, Eigen::all) = d_s * t.k(rows, Eigen::all);
    d_k(rows, Eigen::all) = d_s.transpose() * t.q(rows, Eigen::all);
  }
  g.query_w = t.h2.transpose() * d_q;
  g.key_w = t.h2.transpose() * d_k;
  g.value_w = t.h2.transpose() * d_v;
  RowMatrix d_a2 = d_q * net.query_w.transpose() + d_k * net.key_w.transpose() +
                   d_v * net.value_w.transpose();
  d_a2 = (t.a2.array() > 0.0).select(d_a2, 0.0);
  g.hidden_w = t.h1.transpose() * d_a2;
  g.hidden_b = d_a2.colwise().sum();
  RowMatrix d_a1 = d_a2 * net.hidden_w.transpose();
  d_a1 = (t.a1.array() > 0.0).select(d_a1, 0.0);
  g.token_w = t.tokens.transpose() * d_a1;
  g.token_b = d_a1.colwise().sum();
  return loss;
}

GestureLabel pick_label(const std::array<double, kGestureClasses>& scores) {
  const double best = *std::max_element(scores.begin(), scores.end());
  const int background = static_cast<int>(GestureLabel::Background);
  if (scores[background] == best) return GestureLabel::Background;
  for (int c = 0; c < kGestureClasses; ++c) {
    if (scores[c] == best) return static_cast<GestureLabel>(c);
  }
  return GestureLabel::Background;  // NaN scores
}

std::vector<Inference> infer_batch(const GestureNet& net, const RowMatrix& inputs) {
  const RowMatrix logits = run(net, inputs).logits;
  std::vector<Inference> out(static_cast<std::size_t>(logits.rows()));
  for (Eigen::Index b = 0; b < logits.rows(); ++b) {
    auto& r = out[static_cast<std::size_t>(b)];
    for (int c = 0; c < kGestureClasses; ++c) r.confidences[c] = sigmoid(logits(b, c));
    r.label = pick_label(r.confidences);
  }
  return out;
}

Inference infer(const GestureNet& net, const GestureWindow& w) {
  const Eigen::VectorXd x = flatten(w);
  RowMatrix row = x.transpose();
  return infer_batch(net, row).front();
}

namespace {

RowMatrix stack(const std::vector<const LabeledWindow*>& rows) {
  RowMatrix m(static_cast<Eigen::Index>(rows.size()), kWindowFeatures);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    m.row(static_cast<Eigen::Index>(i)) = rows[i]->features.transpose();
  }
  return m;
}

std::vector<GestureLabel> labels_of(const std::vector<const LabeledWindow*>& rows) {
  std::vector<GestureLabel> out;
  out.reserve(rows.size());
  for (const auto* r : rows) out.push_back(r->label);
  return out;
}

void sgd_update(GestureNet& net, GestureNet& grad, double lr) {
  auto p = net.params();
  auto g = grad.params();
  for (std::size_t i = 0; i < p.size(); ++i) {
    Eigen::Map<Eigen::VectorXd>(p[i].data, p[i].size()) -=
        lr * Eigen::Map<Eigen::VectorXd>(g[i].data, g[i].size());
  }
}

}  // namespace

TrainResult train(const std::vector<LabeledWindow>& data, const TrainConfig& cfg) {
  if (cfg.epochs < 0 || cfg.batch_size < 1 || !(cfg.learning_rate > 0.0)) {
    throw Error(Errc::InvalidArgument, "epochs >= 0, batch_size >= 1, learning_rate > 0");
  }
  std::set<std::string> subjects;
  std::vector<const LabeledWindow*> train_rows, holdout_rows;
  std::array<bool, kGestureClasses> seen{};
  for (const auto& w : data) {
    if (w.features.size() != kWindowFeatures) {
      throw Error(Errc::InvalidArgument, "window has wrong feature count");
    }
    subjects.insert(w.subject);
    if (w.subject == cfg.holdout) {
      holdout_rows.push_back(&w);
    } else {
      train_rows.push_back(&w);
      seen[static_cast<int>(w.label)] = true;
    }
  }
  if (subjects.size() < 2) throw Error(Errc::InvalidArgument, "need at least two subjects");
  if (holdout_rows.empty()) {
    throw Error(Errc::InvalidArgument, "holdout subject '" + cfg.holdout + "' has no data");
  }
  for (int c = 0; c < kGestureClasses; ++c) {
    if (!seen[c]) {
      throw Error(Errc::ClassMissing, std::string("training split has no '") +
                                          kLabelNames[c] + "' windows");
    }
  }

  TrainResult result;
  result.net = GestureNet::initialize(cfg.seed);
  result.train_windows = train_rows.size();
  result.holdout_windows = holdout_rows.size();
  const RowMatrix all_inputs = stack(train_rows);
  const std::vector<GestureLabel> all_labels = labels_of(train_rows);
  result.initial_loss = loss_and_gradient(result.net, all_inputs, all_labels, nullptr);

  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(train_rows.size());
  GestureNet grad = GestureNet::zeros();
  std::vector<const LabeledWindow*> batch;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      batch.clear();
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      for (std::size_t i = start; i < end; ++i) batch.push_back(train_rows[order[i]]);
      const double loss = loss_and_gradient(result.net, stack(batch), labels_of(batch), &grad);
      if (!std::isfinite(loss)) {
        throw Error(Errc::NonFiniteLoss, "loss became non-finite in epoch " +
                                             std::to_string(epoch));
      }
      sgd_update(result.net, grad, cfg.learning_rate);
    }
  }
  result.final_loss = loss_and_gradient(result.net, all_inputs, all_labels, nullptr);
  if (!std::isfinite(result.final_loss)) {
    throw Error(Errc::NonFiniteLoss, "final loss is non-finite");
  }

  const auto predictions = infer_batch(result.net, stack(holdout_rows));
  std::size_t correct = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    correct += predictions[i].label == holdout_rows[i]->label;
  }
  result.holdout_accuracy = static_cast<double>(correct) / static_cast<double>(predictions.size());
  return result;
}

std::string net_to_json(const GestureNet& net) {
  nlohmann::ordered_json j;
  j["format"] = "gesturenet-v1";
  j["params"] = nlohmann::ordered_json::array();
  for (const auto& p : const_cast<GestureNet&>(net).params()) {
    nlohmann::ordered_json entry;
    entry["name"] = p.name;
    entry["shape"] = {p.rows, p.cols};
    entry["data"] = std::vector<double>(p.data, p.data + p.size());
    j["params"].push_back(std::move(entry));
  }
  return j.dump();
}

GestureNet net_from_json(const std::string& text) {
  GestureNet net = GestureNet::zeros();
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.at("format").get<std::string>() != "gesturenet-v1") {
      throw Error(Errc::MalformedDocument, "unknown network format");
    }
    const auto& list = j.at("params");
    auto params = net.params();
    if (!list.is_array() || list.size() != params.size()) {
      throw Error(Errc::MalformedDocument, "expected " + std::to_string(params.size()) +
                                               " parameter arrays");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
      const auto& e = list[i];
      auto& p = params[i];
      if (e.at("name").get<std::string>() != p.name) {
        throw Error(Errc::MalformedDocument, std::string("expected parameter '") + p.name + "'");
      }
      const auto shape = e.at("shape").get<std::vector<Eigen::Index>>();
      const auto values = e.at("data").get<std::vector<double>>();
      if (shape != std::vector<Eigen::Index>{p.rows, p.cols} ||
          values.size() != static_cast<std::size_t>(p.size())) {
        throw Error(Errc::MalformedDocument, std::string("bad shape for '") + p.name + "'");
      }
      for (std::size_t k = 0; k < values.size(); ++k) {
        if (!std::isfinite(values[k])) {
          throw Error(Errc::MalformedDocument, std::string("non-finite value in '") + p.name + "'");
        }
        p.data[k] = values[k];
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::MalformedDocument, e.what());
  }
  return net;
}

void save_net(const std::filesystem::path& path, const GestureNet& net) {
  internal::write_file_atomic(path, net_to_json(net));
}

GestureNet load_net(const std::filesystem::path& path) {
  return net_from_json(internal::read_file(path));
}

}  // namespace anchorline
