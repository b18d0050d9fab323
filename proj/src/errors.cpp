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
#include "anchorline/errors.hpp"

namespace anchorline {

std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::InvalidPose: return "InvalidPose";
    case Errc::UnknownFrame: return "UnknownFrame";
    case Errc::DisconnectedFrames: return "DisconnectedFrames";
    case Errc::DuplicateFrame: return "DuplicateFrame";
    case Errc::UnknownAnchor: return "UnknownAnchor";
    case Errc::StoreWriteFailure: return "StoreWriteFailure";
    case Errc::StoreCorrupt: return "StoreCorrupt";
    case Errc::UnknownWaypoint: return "UnknownWaypoint";
    case Errc::DuplicateEdge: return "DuplicateEdge";
    case Errc::SelfLoop: return "SelfLoop";
    case Errc::MalformedDocument: return "MalformedDocument";
    case Errc::SchemaVersionUnsupported: return "SchemaVersionUnsupported";
    case Errc::IntegrityViolation: return "IntegrityViolation";
    case Errc::UnknownMission: return "UnknownMission";
    case Errc::ParseError: return "ParseError";
    case Errc::NonTriangleFace: return "NonTriangleFace";
    case Errc::EmptyMesh: return "EmptyMesh";
    case Errc::SliceOutOfRange: return "SliceOutOfRange";
    case Errc::StartOccupied: return "StartOccupied";
    case Errc::GoalOccupied: return "GoalOccupied";
    case Errc::NoPath: return "NoPath";
    case Errc::TooFewFrames: return "TooFewFrames";
    case Errc::ClassMissing: return "ClassMissing";
    case Errc::NonFiniteLoss: return "NonFiniteLoss";
    case Errc::RayParallelToGround: return "RayParallelToGround";
    case Errc::GoalOutsideMap: return "GoalOutsideMap";
    case Errc::AnchorUnreachable: return "AnchorUnreachable";
    case Errc::CallbackMissing: return "CallbackMissing";
    case Errc::CallbackChoseUnknownEdge: return "CallbackChoseUnknownEdge";
    case Errc::StepBudget: return "StepBudget";
    case Errc::NotAwaitingBranch: return "NotAwaitingBranch";
    case Errc::UnknownEdge: return "UnknownEdge";
    case Errc::MissionActive: return "MissionActive";
    case Errc::UnknownExecution: return "UnknownExecution";
    case Errc::PortInUse: return "PortInUse";
  }
  return "Unknown";
}

}  // namespace anchorline
