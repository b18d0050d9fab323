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
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "anchorline/geometry.hpp"
#include "anchorline/mapconv.hpp"

namespace anchorline {

inline constexpr int kJoints = 19;
inline constexpr int kWindowFrames = 12;
inline constexpr int kWindowFeatures = kJoints * kWindowFrames;
inline constexpr int kGestureHidden = 128;
inline constexpr int kGestureClasses = 4;

// Class index order of the network outputs.
enum class GestureLabel { Stop = 0, ComeHere = 1, Point = 2, Background = 3 };

// "stop", "come_here", "point", "background".
const char* to_string(GestureLabel label);
// InvalidArgument for unknown names.
GestureLabel gesture_label_from_string(std::string_view name);

struct HandFrame {
  double timestamp = 0.0;  // s
  std::array<double, kJoints> flexion{};
};

struct GestureWindow {
  std::array<HandFrame, kWindowFrames> frames;
};

// Sliding windows of 12 frames with stride 1; window k ends at frame k + 11.
// TooFewFrames below 12 frames. InvalidArgument if timestamps do not
// strictly increase or an angle is outside [-pi, pi].
std::vector<GestureWindow> window_stream(const std::vector<HandFrame>& frames);

// Row-major by time then joint: entry 19 * t + j.
Eigen::VectorXd flatten(const GestureWindow& w);

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Per-time-step token map and hidden layer, single-head self-attention over
// the 12 steps, mean pooling and a 4-way classifier. Row-vector convention:
// y = x W + b.
struct GestureNet {
  RowMatrix token_w;   // 19 x 128
  Eigen::RowVectorXd token_b;
  RowMatrix hidden_w;  // 128 x 128
  Eigen::RowVectorXd hidden_b;
  RowMatrix query_w;   // 128 x 128
  RowMatrix key_w;
  RowMatrix value_w;
  RowMatrix class_w;   // 128 x 4
  Eigen::RowVectorXd class_b;

  // Uniform in +-1/sqrt(fan_in); biases included.
  static GestureNet initialize(std::uint64_t seed);
  // Same shapes, all zero.
  static GestureNet zeros();

  struct Param {
    const char* name;
    double* data;
    Eigen::Index rows;
    Eigen::Index cols;
    Eigen::Index size() const { return rows * cols; }
  };
  // Every trainable array, in a fixed order.
  std::vector<Param> params();

  bool operator==(const GestureNet& other) const;
};

struct ForwardResult {
  RowMatrix logits;                   // batch x 4
  std::vector<RowMatrix> attention;   // per sample, 12 x 12, rows sum to 1
};

// `inputs` holds one flattened window per row (batch x 228).
ForwardResult forward(const GestureNet& net, const RowMatrix& inputs);

// Batch mean of the per-class summed binary cross-entropy between
// sigmoid(logits) and one-hot targets. Fills `grad` (same layout as the net)
// when non-null.
double loss_and_gradient(const GestureNet& net, const RowMatrix& inputs,
                         const std::vector<GestureLabel>& labels, GestureNet* grad);

struct Inference {
  std::array<double, kGestureClasses> confidences{};
  GestureLabel label = GestureLabel::Background;
};

// Highest score wins; ties go to Background, then to the lowest index.
GestureLabel pick_label(const std::array<double, kGestureClasses>& scores);

Inference infer(const GestureNet& net, const GestureWindow& w);
std::vector<Inference> infer_batch(const GestureNet& net, const RowMatrix& inputs);

struct LabeledWindow {
  std::string subject;
  GestureLabel label = GestureLabel::Background;
  Eigen::VectorXd features;  // 228
};

struct TrainConfig {
  int epochs = 40;
  double learning_rate = 1e-2;
  int batch_size = 32;
  std::uint64_t seed = 7;
  std::string holdout = "subject-5";
};

struct TrainResult {
  GestureNet net;
  double initial_loss = 0.0;  // training split, before the first update
  double final_loss = 0.0;    // training split, after the last epoch
  double holdout_accuracy = 0.0;
  std::size_t train_windows = 0;
  std::size_t holdout_windows = 0;
};

// Minibatch SGD over all windows whose subject differs from cfg.holdout.
// InvalidArgument with fewer than two subjects or a missing holdout subject;
// ClassMissing if the training split lacks a class; NonFiniteLoss if the
// loss diverges.
TrainResult train(const std::vector<LabeledWindow>& data, const TrainConfig& cfg);

// {"format":"gesturenet-v1","params":[{"name","shape","data"}, ...]}
std::string net_to_json(const GestureNet& net);
// MalformedDocument on bad shape, unknown format or non-finite values.
GestureNet net_from_json(const std::string& text);
void save_net(const std::filesystem::path& path, const GestureNet& net);
GestureNet load_net(const std::filesystem::path& path);

// Synthetic recordings standing in for recorded hand tracking.

struct SyntheticSubject {
  std::string name;
  double amplitude_scale = 1.0;
  double tempo_scale = 1.0;
  std::array<double, kJoints> offsets{};
  double noise_sigma = 0.0;  // rad
  std::uint64_t seed = 0;
};

struct Recording {
  std::string subject;
  GestureLabel label = GestureLabel::Background;
  double fps = 60.0;
  std::vector<HandFrame> frames;
};

// Noise-free flexion angles of a gesture at time t. Background has no
// template and throws InvalidArgument.
std::array<double, kJoints> gesture_template(GestureLabel label, double t);

// "subject-0" ... "subject-5" with seeded variation in amplitude, tempo,
// per-joint offsets and noise.
std::vector<SyntheticSubject> default_subjects(std::uint64_t seed = 2026);

// For every subject, class and repetition one recording of `frames` frames
// at `fps`. Order: subject, then class index, then repetition.
std::vector<Recording> generate_dataset(const std::vector<SyntheticSubject>& subjects,
                                        int reps, int frames = 60, double fps = 60.0);

// All sliding windows of every recording.
std::vector<LabeledWindow> to_windows(const std::vector<Recording>& recordings);

// One {"subject","label","fps","frames":[[19 angles], ...]} object per line.
void write_recordings(std::ostream& out, const std::vector<Recording>& recordings);
// MalformedDocument with the offending line number.
std::vector<Recording> read_recordings(std::istream& in);
std::vector<Recording> read_recordings(const std::filesystem::path& path);

// Gesture to robot command, all poses in the shared map frame.

struct RobotCommand {
  enum class Kind { Goal, Preempt, NoOp };
  Kind kind = Kind::NoOp;
  Vec2 position = Vec2::Zero();
  double yaw = 0.0;
};

const char* to_string(RobotCommand::Kind kind);

struct CommandConfig {
  double front_offset = 1.5;  // m in front of the headset for ComeHere
};

// Stop -> Preempt; ComeHere -> goal front_offset ahead of the headset along
// its +X axis projected onto XY, facing back at the headset; Point -> where
// the ray from the headset through the hand meets z = 0, facing along the
// ray; Background -> NoOp. RayParallelToGround if the pointing ray does not
// descend to the ground in front of the user.
RobotCommand gesture_to_command(GestureLabel label, const Pose& headset, const Vec3& hand,
                                const CommandConfig& cfg = {});

// GoalOutsideMap if a Goal lies outside the grid or on an Unknown cell.
void check_goal_on_map(const RobotCommand& cmd, const OccupancyGrid& grid);

}  // namespace anchorline
