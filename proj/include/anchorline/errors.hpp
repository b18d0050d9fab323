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

#include <stdexcept>
#include <string>
#include <string_view>

namespace anchorline {

// Every domain failure carries one of these codes. The code name is what
// travels over the wire ({"error":"UnknownMission"}) and to stderr.
enum class Errc {
  InvalidArgument,
  InvalidPose,
  UnknownFrame,
  DisconnectedFrames,
  DuplicateFrame,
  UnknownAnchor,
  StoreWriteFailure,
  StoreCorrupt,
  UnknownWaypoint,
  DuplicateEdge,
  SelfLoop,
  MalformedDocument,
  SchemaVersionUnsupported,
  IntegrityViolation,
  UnknownMission,
  ParseError,
  NonTriangleFace,
  EmptyMesh,
  SliceOutOfRange,
  StartOccupied,
  GoalOccupied,
  NoPath,
  TooFewFrames,
  ClassMissing,
  NonFiniteLoss,
  RayParallelToGround,
  GoalOutsideMap,
  AnchorUnreachable,
  CallbackMissing,
  CallbackChoseUnknownEdge,
  StepBudget,
  NotAwaitingBranch,
  UnknownEdge,
  MissionActive,
  UnknownExecution,
  PortInUse,
};

std::string_view to_string(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code) {}

  Errc code() const noexcept { return code_; }
  std::string_view name() const noexcept { return to_string(code_); }

 private:
  Errc code_;
};

}  // namespace anchorline
