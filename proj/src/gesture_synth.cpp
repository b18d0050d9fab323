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
#include <fstream>
#include <random>

#include <json.hpp>

#include "anchorline/errors.hpp"
#include "anchorline/gestures.hpp"

namespace anchorline {
namespace {

constexpr int kThumbJoints = 3;
constexpr int kIndexFirst = 3;
constexpr int kIndexEnd = 7;
constexpr double kComeHereHz = 1.5;

// Background: velocity-smoothed random walk kept inside [lo, hi].
constexpr double kWalkLo = 0.3;
constexpr double kWalkHi = 1.3;

}  // namespace

std::array<double, kJoints> gesture_template(GestureLabel label, double t) {
  std::array<double, kJoints> a{};
  switch (label) {
    case GestureLabel::Stop:
      a.fill(0.05);
      break;
    case GestureLabel::ComeHere: {
      const double curl = 0.5 * (1.0 - std::cos(2.0 * M_PI * kComeHereHz * t));
      for (int j = 0; j < kJoints; ++j) a[j] = j < kThumbJoints ? 0.4 : 0.5 + curl;
      break;
    }
    case GestureLabel::Point:
      for (int j = 0; j < kJoints; ++j) {
        a[j] = j < kThumbJoints ? 0.9 : (j >= kIndexFirst && j < kIndexEnd) ? 0.05 : 1.3;
      }
      break;
    case GestureLabel::Background:
      throw Error(Errc::InvalidArgument, "background has no template");
  }
  return a;
}

std::vector<SyntheticSubject> default_subjects(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> amp(0.85, 1.15), tempo(0.8, 1.2), offset(-0.1, 0.1),
      noise(0.02, 0.05);
  std::vector<SyntheticSubject> out;
  for (int i = 0; i < 6; ++i) {
    SyntheticSubject s;
    s.name = "subject-" + std::to_string(i);
    s.amplitude_scale = amp(rng);
    s.tempo_scale = tempo(rng);
    for (auto& o : s.offsets) o = offset(rng);
    s.noise_sigma = noise(rng);
    s.seed = seed * 131 + static_cast<std::uint64_t>(i);
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<Recording> generate_dataset(const std::vector<SyntheticSubject>& subjects,
                                        int reps, int frames, double fps) {
  if (reps < 1 || frames < 1 || !(fps > 0.0)) {
    throw Error(Errc::InvalidArgument, "reps, frames and fps must be positive");
  }
  std::vector<Recording> out;
  for (const auto& s : subjects) {
    if (s.noise_sigma < 0.0) throw Error(Errc::InvalidArgument, "noise sigma must be >= 0");
    for (int c = 0; c < kGestureClasses; ++c) {
      const auto label = static_cast<GestureLabel>(c);
      for (int rep = 0; rep < reps; ++rep) {
        std::seed_seq seq{s.seed, static_cast<std::uint64_t>(c), static_cast<std::uint64_t>(rep)};
        std::mt19937_64 rng(seq);
        std::normal_distribution<double> noise(0.0, 1.0);
        std::uniform_real_distribution<double> start(kWalkLo, kWalkHi);

        std::array<double, kJoints> walk{}, velocity{};
        for (auto& w : walk) w = start(rng);

        Recording r;
        r.subject = s.name;
        r.label = label;
        r.fps = fps;
        r.frames.resize(static_cast<std::size_t>(frames));
        for (int f = 0; f < frames; ++f) {
          HandFrame& hf = r.frames[static_cast<std::size_t>(f)];
          hf.timestamp = f / fps;
          std::array<double, kJoints> base{};
          if (label == GestureLabel::Background) {
            for (int j = 0; j < kJoints; ++j) {
              velocity[j] = 0.9 * velocity[j] + 0.01 * noise(rng);
              walk[j] += velocity[j];
              if (walk[j] < kWalkLo) walk[j] = 2 * kWalkLo - walk[j], velocity[j] = -velocity[j];
              if (walk[j] > kWalkHi) walk[j] = 2 * kWalkHi - walk[j], velocity[j] = -velocity[j];
            }
            base = walk;
          } else {
            base = gesture_template(label, s.tempo_scale * hf.timestamp);
            for (auto& b : base) b *= s.amplitude_scale;
          }
          for (int j = 0; j < kJoints; ++j) {
            double a = base[j] + s.offsets[j];
            if (s.noise_sigma > 0.0) a += s.noise_sigma * noise(rng);
            hf.flexion[j] = std::clamp(a, -M_PI, M_PI);
          }
        }
        out.push_back(std::move(r));
      }
    }
  }
  return out;
}

std::vector<LabeledWindow> to_windows(const std::vector<Recording>& recordings) {
  std::vector<LabeledWindow> out;
  for (const auto& r : recordings) {
    for (const auto& w : window_stream(r.frames)) {
      out.push_back(LabeledWindow{r.subject, r.label, flatten(w)});
    }
  }
  return out;
}

void write_recordings(std::ostream& out, const std::vector<Recording>& recordings) {
  for (const auto& r : recordings) {
    nlohmann::ordered_json j;
    j["subject"] = r.subject;
    j["label"] = to_string(r.label);
    j["fps"] = r.fps;
    auto frames = nlohmann::ordered_json::array();
    for (const auto& f : r.frames) frames.push_back(f.flexion);
    j["frames"] = std::move(frames);
    out << j.dump() << '\n';
  }
}

std::vector<Recording> read_recordings(std::istream& in) {
  std::vector<Recording> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      Recording r;
      r.subject = j.at("subject").get<std::string>();
      r.label = gesture_label_from_string(j.at("label").get<std::string>());
      r.fps = j.at("fps").get<double>();
      if (!(r.fps > 0.0)) throw Error(Errc::MalformedDocument, "fps must be positive");
      const auto& frames = j.at("frames");
      for (std::size_t f = 0; f < frames.size(); ++f) {
        HandFrame hf;
        hf.timestamp = static_cast<double>(f) / r.fps;
        const auto angles = frames[f].get<std::vector<double>>();
        if (angles.size() != kJoints) {
          throw Error(Errc::MalformedDocument, "frame " + std::to_string(f) + " has " +
                                                   std::to_string(angles.size()) + " angles");
        }
        std::copy(angles.begin(), angles.end(), hf.flexion.begin());
        r.frames.push_back(hf);
      }
      out.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::MalformedDocument, "line " + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(Errc::MalformedDocument, "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::vector<Recording> read_recordings(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::InvalidArgument, "cannot open " + path.string());
  return read_recordings(in);
}

}  // namespace anchorline
