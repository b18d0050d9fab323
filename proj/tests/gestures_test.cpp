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
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "anchorline/anchor_sim.hpp"
#include "anchorline/errors.hpp"
#include "anchorline/gestures.hpp"
#include "support/gesture_oracle.hpp"

namespace anchorline {
namespace {

template <typename F>
Errc error_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return Errc::InvalidArgument;
}

std::vector<HandFrame> ramp_frames(int n) {
  std::vector<HandFrame> frames(static_cast<std::size_t>(n));
  for (int f = 0; f < n; ++f) {
    frames[f].timestamp = f / 60.0;
    for (int j = 0; j < kJoints; ++j) frames[f].flexion[j] = 0.01 * f + 0.001 * j;
  }
  return frames;
}

const std::vector<LabeledWindow>& sample_windows() {
  static const auto windows = to_windows(generate_dataset(default_subjects(), 1));
  return windows;
}

RowMatrix sample_batch(std::mt19937_64& rng, int n, std::vector<GestureLabel>* labels) {
  const auto& all = sample_windows();
  std::uniform_int_distribution<std::size_t> pick(0, all.size() - 1);
  RowMatrix m(n, kWindowFeatures);
  for (int i = 0; i < n; ++i) {
    const auto& w = all[pick(rng)];
    m.row(i) = w.features.transpose();
    if (labels) labels->push_back(w.label);
  }
  return m;
}

GestureWindow window_from_row(const Eigen::VectorXd& x) {
  GestureWindow w;
  for (int t = 0; t < kWindowFrames; ++t) {
    w.frames[t].timestamp = t;
    for (int j = 0; j < kJoints; ++j) w.frames[t].flexion[j] = x[t * kJoints + j];
  }
  return w;
}

TEST(WindowStreamTest, Counts) {
  EXPECT_EQ(window_stream(ramp_frames(12)).size(), 1u);
  const auto frames = ramp_frames(15);
  const auto windows = window_stream(frames);
  ASSERT_EQ(windows.size(), 4u);
  for (std::size_t k = 0; k < windows.size(); ++k) {
    EXPECT_EQ(windows[k].frames.back().timestamp, frames[k + 11].timestamp);
    EXPECT_EQ(windows[k].frames.front().timestamp, frames[k].timestamp);
  }
}

TEST(WindowStreamTest, Errors) {
  EXPECT_EQ(error_of([] { window_stream(ramp_frames(11)); }), Errc::TooFewFrames);
  auto frames = ramp_frames(13);
  frames[5].timestamp = frames[4].timestamp;
  EXPECT_EQ(error_of([&] { window_stream(frames); }), Errc::InvalidArgument);
  frames = ramp_frames(13);
  frames[2].flexion[3] = 4.0;
  EXPECT_EQ(error_of([&] { window_stream(frames); }), Errc::InvalidArgument);
}

TEST(FlattenTest, RowMajorTimeThenJoint) {
  GestureWindow w;
  for (int t = 0; t < kWindowFrames; ++t) {
    for (int j = 0; j < kJoints; ++j) w.frames[t].flexion[j] = t + j / 100.0;
  }
  const auto x = flatten(w);
  ASSERT_EQ(x.size(), 228);
  EXPECT_EQ(x[0], 0.0);
  EXPECT_EQ(x[18], 0.18);
  EXPECT_EQ(x[19], 1.0);
  EXPECT_EQ(x[19 * 11 + 18], 11.18);
}

TEST(InferTest, ZeroNetGivesHalfAndBackground) {
  const auto r = infer(GestureNet::zeros(), window_from_row(Eigen::VectorXd::Ones(228)));
  for (double c : r.confidences) EXPECT_EQ(c, 0.5);
  EXPECT_EQ(r.label, GestureLabel::Background);
}

TEST(InferTest, HighestConfidenceWins) {
  GestureNet net = GestureNet::zeros();
  auto logit = [](double p) { return std::log(p / (1 - p)); };
  net.class_b << logit(0.62), logit(0.2), logit(0.3), logit(0.1);
  const auto r = infer(net, window_from_row(Eigen::VectorXd::Zero(228)));
  EXPECT_EQ(r.label, GestureLabel::Stop);
  EXPECT_NEAR(r.confidences[0], 0.62, 1e-12);
}

TEST(InferTest, TieBreak) {
  EXPECT_EQ(pick_label({0.7, 0.7, 0.1, 0.1}), GestureLabel::Stop);
  EXPECT_EQ(pick_label({0.1, 0.7, 0.7, 0.1}), GestureLabel::ComeHere);
  EXPECT_EQ(pick_label({0.2, 0.7, 0.7, 0.7}), GestureLabel::Background);
}

TEST(InferTest, LabelInvariantUnderMonotoneTransforms) {
  std::mt19937_64 rng(3);
  for (int n = 0; n < 5; ++n) {
    const GestureNet net = GestureNet::initialize(rng());
    const RowMatrix x = sample_batch(rng, 20, nullptr);
    const auto base = infer_batch(net, x);
    GestureNet shifted = net;
    shifted.class_b.array() += 0.8;
    GestureNet scaled = net;
    scaled.class_w *= 3.0;
    scaled.class_b *= 3.0;
    const auto a = infer_batch(shifted, x), b = infer_batch(scaled, x);
    for (std::size_t i = 0; i < base.size(); ++i) {
      EXPECT_EQ(a[i].label, base[i].label);
      EXPECT_EQ(b[i].label, base[i].label);
      std::array<double, kGestureClasses> cubed;
      for (int c = 0; c < kGestureClasses; ++c) cubed[c] = std::pow(base[i].confidences[c], 3);
      EXPECT_EQ(pick_label(cubed), base[i].label);
    }
  }
}

TEST(ForwardTest, MatchesScalarOracle) {
  std::mt19937_64 rng(4);
  const GestureNet net = GestureNet::initialize(11);
  const RowMatrix x = sample_batch(rng, 6, nullptr);
  const auto fr = forward(net, x);
  for (int b = 0; b < x.rows(); ++b) {
    const auto oracle = testing::naive_forward(net, window_from_row(x.row(b).transpose()));
    for (int c = 0; c < kGestureClasses; ++c) EXPECT_NEAR(fr.logits(b, c), oracle.logits[c], 1e-10);
    for (int r = 0; r < kWindowFrames; ++r) {
      for (int k = 0; k < kWindowFrames; ++k) {
        EXPECT_NEAR(fr.attention[b](r, k), oracle.attention[r][k], 1e-12);
      }
    }
  }
}

TEST(ForwardTest, AttentionRowsSumToOne) {
  std::mt19937_64 rng(5);
  for (int n = 0; n < 5; ++n) {
    GestureNet net = GestureNet::initialize(rng());
    net.query_w *= 10.0;  // sharper attention
    const auto fr = forward(net, sample_batch(rng, 8, nullptr));
    for (const auto& p : fr.attention) {
      for (int r = 0; r < p.rows(); ++r) {
        EXPECT_NEAR(p.row(r).sum(), 1.0, 1e-9);
        EXPECT_GE(p.row(r).minCoeff(), 0.0);
      }
    }
  }
}

TEST(GradientTest, MatchesCentralDifferences) {
  std::mt19937_64 rng(6);
  // Random angles vary strongly over time, which gives the attention layer
  // something to do; recorded gestures are nearly static within a window.
  std::uniform_real_distribution<double> angle(-1.5, 1.5);
  std::vector<GestureLabel> labels;
  RowMatrix x(8, kWindowFeatures);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = angle(rng);
  for (int b = 0; b < 8; ++b) labels.push_back(static_cast<GestureLabel>(b % kGestureClasses));
  GestureNet net = GestureNet::initialize(21);
  // Sharper attention than at initialization so query/key gradients are well
  // above finite-difference roundoff.
  net.query_w *= 8.0;
  net.key_w *= 8.0;
  GestureNet grad = GestureNet::zeros();
  loss_and_gradient(net, x, labels, &grad);

  const double eps = 1e-6;
  auto params = net.params();
  auto grads = grad.params();
  for (std::size_t p = 0; p < params.size(); ++p) {
    std::uniform_int_distribution<Eigen::Index> coord(0, params[p].size() - 1);
    int checked = 0;
    for (int attempt = 0; attempt < 1000 && checked < 10; ++attempt) {
      const Eigen::Index i = coord(rng);
      const double analytic = grads[p].data[i];
      // Below this the central difference is dominated by roundoff.
      if (std::abs(analytic) < 1e-5) continue;
      const double saved = params[p].data[i];
      params[p].data[i] = saved + eps;
      const double up = loss_and_gradient(net, x, labels, nullptr);
      params[p].data[i] = saved - eps;
      const double down = loss_and_gradient(net, x, labels, nullptr);
      params[p].data[i] = saved;
      const double numeric = (up - down) / (2 * eps);
      const double rel = std::abs(analytic - numeric) / std::max(std::abs(analytic), std::abs(numeric));
      EXPECT_LE(rel, 1e-4) << params[p].name << "[" << i << "] analytic " << analytic
                           << " numeric " << numeric;
      ++checked;
    }
    EXPECT_EQ(checked, 10) << params[p].name;
  }
}

TEST(TrainTest, DeterministicAndLossDecreases) {
  TrainConfig cfg;
  cfg.epochs = 2;
  const auto a = train(sample_windows(), cfg);
  const auto b = train(sample_windows(), cfg);
  EXPECT_TRUE(a.net == b.net);
  EXPECT_LT(a.final_loss, a.initial_loss);
  EXPECT_EQ(a.final_loss, b.final_loss);
  EXPECT_GT(a.holdout_windows, 0u);
  cfg.seed = 8;
  EXPECT_FALSE(train(sample_windows(), cfg).net == a.net);
}

TEST(TrainTest, InputValidation) {
  const auto& all = sample_windows();
  std::vector<LabeledWindow> no_point;
  for (const auto& w : all) {
    if (w.label != GestureLabel::Point || w.subject == "subject-5") no_point.push_back(w);
  }
  EXPECT_EQ(error_of([&] { train(no_point, {}); }), Errc::ClassMissing);
  std::vector<LabeledWindow> one_subject;
  for (const auto& w : all) {
    if (w.subject == "subject-5") one_subject.push_back(w);
  }
  EXPECT_EQ(error_of([&] { train(one_subject, {}); }), Errc::InvalidArgument);
  TrainConfig cfg;
  cfg.holdout = "subject-9";
  EXPECT_EQ(error_of([&] { train(all, cfg); }), Errc::InvalidArgument);
}

TEST(TrainTest, DivergenceIsReported) {
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.learning_rate = 1e200;
  EXPECT_EQ(error_of([&] { train(sample_windows(), cfg); }), Errc::NonFiniteLoss);
}

TEST(NetFileTest, RoundTripAndRejects) {
  const GestureNet net = GestureNet::initialize(9);
  const std::string text = net_to_json(net);
  EXPECT_TRUE(net_from_json(text) == net);
  auto j = nlohmann::json::parse(text);
  j["params"][2]["shape"] = {128, 127};
  EXPECT_EQ(error_of([&] { net_from_json(j.dump()); }), Errc::MalformedDocument);
  j = nlohmann::json::parse(text);
  j["format"] = "other";
  EXPECT_EQ(error_of([&] { net_from_json(j.dump()); }), Errc::MalformedDocument);
  EXPECT_EQ(error_of([] { net_from_json("{"); }), Errc::MalformedDocument);
}

SyntheticSubject clean_subject(std::uint64_t seed) {
  SyntheticSubject s;
  s.name = "clean";
  s.seed = seed;
  return s;
}

TEST(GeneratorTest, ProtocolCounts) {
  const auto recs = generate_dataset(default_subjects(), 2);
  ASSERT_EQ(recs.size(), 48u);
  for (const auto& r : recs) {
    EXPECT_EQ(r.frames.size(), 60u);
    EXPECT_EQ(r.fps, 60.0);
  }
  EXPECT_EQ(recs.front().subject, "subject-0");
  EXPECT_EQ(recs.back().subject, "subject-5");
  EXPECT_EQ(recs.back().label, GestureLabel::Background);
}

TEST(GeneratorTest, ZeroNoiseReproducesTemplates) {
  const std::array<double, kJoints> stop{0.05, 0.05, 0.05, 0.05, 0.05, 0.05, 0.05,
                                         0.05, 0.05, 0.05, 0.05, 0.05, 0.05, 0.05,
                                         0.05, 0.05, 0.05, 0.05, 0.05};
  const std::array<double, kJoints> point{0.9, 0.9, 0.9, 0.05, 0.05, 0.05, 0.05,
                                          1.3, 1.3, 1.3, 1.3, 1.3, 1.3, 1.3,
                                          1.3, 1.3, 1.3, 1.3, 1.3};
  std::array<double, kJoints> come_open, come_closed;
  come_open.fill(0.5);
  come_closed.fill(1.5);
  for (int j = 0; j < 3; ++j) come_open[j] = come_closed[j] = 0.4;

  const auto recs = generate_dataset({clean_subject(1)}, 1);
  ASSERT_EQ(recs.size(), 4u);
  for (const auto& f : recs[0].frames) EXPECT_EQ(f.flexion, stop);
  for (const auto& f : recs[2].frames) EXPECT_EQ(f.flexion, point);
  // 1.5 Hz curl: open at t = 0, closed half a period later (frame 20).
  EXPECT_EQ(recs[1].frames[0].flexion, come_open);
  for (int j = 0; j < kJoints; ++j) {
    EXPECT_NEAR(recs[1].frames[20].flexion[j], come_closed[j], 1e-12);
  }
  for (std::size_t f = 0; f < recs[1].frames.size(); ++f) {
    EXPECT_EQ(recs[1].frames[f].flexion,
              gesture_template(GestureLabel::ComeHere, recs[1].frames[f].timestamp));
  }
  for (const auto& f : recs[3].frames) {
    for (double a : f.flexion) {
      EXPECT_GE(a, 0.3);
      EXPECT_LE(a, 1.3);
    }
  }
}

TEST(GeneratorTest, SeedsChangeNoiseNotLabels) {
  auto s1 = clean_subject(1), s2 = clean_subject(2);
  s1.noise_sigma = s2.noise_sigma = 0.05;
  const auto a = generate_dataset({s1}, 2), b = generate_dataset({s2}, 2),
             a2 = generate_dataset({s1}, 2);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].label, b[i].label);
    EXPECT_NE(a[i].frames[5].flexion, b[i].frames[5].flexion);
    EXPECT_EQ(a[i].frames[5].flexion, a2[i].frames[5].flexion);
  }
}

TEST(DatasetFileTest, RoundTripAndLineNumbers) {
  const auto recs = generate_dataset(default_subjects(), 1);
  std::stringstream io;
  write_recordings(io, recs);
  const auto back = read_recordings(io);
  ASSERT_EQ(back.size(), recs.size());
  for (std::size_t i = 0; i < recs.size(); ++i) {
    EXPECT_EQ(back[i].subject, recs[i].subject);
    EXPECT_EQ(back[i].label, recs[i].label);
    ASSERT_EQ(back[i].frames.size(), recs[i].frames.size());
    for (std::size_t f = 0; f < recs[i].frames.size(); ++f) {
      EXPECT_EQ(back[i].frames[f].flexion, recs[i].frames[f].flexion);
    }
  }
  std::istringstream bad(
      "{\"subject\":\"s\",\"label\":\"stop\",\"fps\":60,\"frames\":[]}\n"
      "{\"subject\":\"s\",\"label\":\"wave\",\"fps\":60,\"frames\":[]}\n");
  try {
    read_recordings(bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::MalformedDocument);
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
}

TEST(CommandTest, ComeHereFacingPlusX) {
  const auto cmd = gesture_to_command(GestureLabel::ComeHere, Pose::identity(), Vec3::Zero());
  EXPECT_EQ(cmd.kind, RobotCommand::Kind::Goal);
  EXPECT_NEAR(cmd.position.x(), 1.5, 1e-12);
  EXPECT_NEAR(cmd.position.y(), 0.0, 1e-12);
  EXPECT_NEAR(cmd.yaw, std::numbers::pi, 1e-12);
}

TEST(CommandTest, ComeHereIgnoresPitch) {
  // Head at (1, 2, 1.7) facing +Y and tilted 30 degrees down.
  const Eigen::Quaterniond q = Eigen::AngleAxisd(std::numbers::pi / 2, Vec3::UnitZ()) *
                               Eigen::AngleAxisd(std::numbers::pi / 6, Vec3::UnitY());
  const auto cmd = gesture_to_command(GestureLabel::ComeHere, Pose(Vec3(1, 2, 1.7), q),
                                      Vec3::Zero(), CommandConfig{2.0});
  EXPECT_NEAR(cmd.position.x(), 1.0, 1e-12);
  EXPECT_NEAR(cmd.position.y(), 4.0, 1e-12);
  EXPECT_NEAR(cmd.yaw, -std::numbers::pi / 2, 1e-12);
}

TEST(CommandTest, PointRayHitsGround) {
  const auto cmd = gesture_to_command(GestureLabel::Point, Pose::from_translation(Vec3(0, 0, 1.6)),
                                      Vec3(0.3, 0, 1.4));
  EXPECT_EQ(cmd.kind, RobotCommand::Kind::Goal);
  EXPECT_NEAR(cmd.position.x(), 2.4, 1e-12);
  EXPECT_NEAR(cmd.position.y(), 0.0, 1e-12);
  EXPECT_NEAR(cmd.yaw, 0.0, 1e-12);
  const Pose head = Pose::from_translation(Vec3(0, 0, 1.6));
  EXPECT_EQ(error_of([&] { gesture_to_command(GestureLabel::Point, head, Vec3(1, 0, 1.6)); }),
            Errc::RayParallelToGround);
  EXPECT_EQ(error_of([&] { gesture_to_command(GestureLabel::Point, head, Vec3(1, 0, 1.8)); }),
            Errc::RayParallelToGround);
}

TEST(CommandTest, StopAndBackground) {
  EXPECT_EQ(gesture_to_command(GestureLabel::Stop, Pose(), Vec3::Zero()).kind,
            RobotCommand::Kind::Preempt);
  EXPECT_EQ(gesture_to_command(GestureLabel::Background, Pose(), Vec3::Zero()).kind,
            RobotCommand::Kind::NoOp);
}

TEST(CommandTest, GoalMustBeOnMap) {
  OccupancyGrid g;
  g.resolution = 0.5;
  g.width = g.height = 4;
  g.cells.assign(16, Cell::Free);
  g.at(3, 0) = Cell::Unknown;
  RobotCommand cmd;
  cmd.kind = RobotCommand::Kind::Goal;
  cmd.position = Vec2(1.0, 1.0);
  EXPECT_NO_THROW(check_goal_on_map(cmd, g));
  cmd.position = Vec2(5.0, 1.0);
  EXPECT_EQ(error_of([&] { check_goal_on_map(cmd, g); }), Errc::GoalOutsideMap);
  cmd.position = Vec2(1.5, 0.0);
  EXPECT_EQ(error_of([&] { check_goal_on_map(cmd, g); }), Errc::GoalOutsideMap);
  cmd.kind = RobotCommand::Kind::Preempt;
  EXPECT_NO_THROW(check_goal_on_map(cmd, g));
}

// Headset and robot each localize against the same anchor; a ComeHere goal
// computed in the anchor frame lands in front of the true headset position
// once expressed in the robot's frame.
TEST(CommandTest, ColocalizedGoalMatchesGroundTruth) {
  AnchorStore store({}, 1);
  const Pose anchor_world = Pose::from_yaw(0.4, Vec3(3, -1, 0));
  const Anchor anchor = store.create_anchor(anchor_world, AnchorPolicy{});
  RelocModel model;
  model.sigma_t0 = model.sigma_r0 = 0.0;

  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.5, 1.5), yaw(-3, 3);
  for (int n = 0; n < 20; ++n) {
    const Pose head_world = Pose::from_yaw(yaw(rng), Vec3(3 + u(rng), -1 + u(rng), 1.6));
    const Pose robot_world = Pose::from_yaw(yaw(rng), Vec3(3 + u(rng), -1 + u(rng), 0.0));
    const auto head_fix = query(store, anchor.id, head_world, model, 2 * n);
    const auto robot_fix = query(store, anchor.id, robot_world, model, 2 * n + 1);
    ASSERT_TRUE(head_fix && robot_fix);

    // Headset pose in the anchor frame, then the goal in that frame.
    const Pose head_in_anchor = invert(head_fix->anchor_in_query);
    TransformTree tree;
    tree.add_root(FrameId("robot"));
    tree.add(FrameId("robot"), FrameId("anchor"), robot_fix->anchor_in_query);
    tree.add(FrameId("anchor"), FrameId("headset"), head_in_anchor);
    const Pose head_in_robot = tree.lookup(FrameId("robot"), FrameId("headset"));
    const auto cmd = gesture_to_command(GestureLabel::ComeHere, head_in_robot, Vec3::Zero());

    const Vec3 forward = head_world.rotation() * Vec3::UnitX();
    const Vec3 truth_world = head_world.translation() + 1.5 * Vec3(forward.x(), forward.y(), 0).normalized();
    const Vec3 truth_robot = transform_point(invert(robot_world), truth_world);
    EXPECT_NEAR(cmd.position.x(), truth_robot.x(), 1e-6);
    EXPECT_NEAR(cmd.position.y(), truth_robot.y(), 1e-6);
  }
}

}  // namespace
}  // namespace anchorline
