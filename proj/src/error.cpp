// Copyright 2026 The demoforge Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "demoforge/error.hpp"

namespace demoforge {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kInvalidDepth: return "InvalidDepth";
    case ErrorCode::kOutOfBounds: return "OutOfBounds";
    case ErrorCode::kBehindCamera: return "BehindCamera";
    case ErrorCode::kJointLimitViolation: return "JointLimitViolation";
    case ErrorCode::kUnreachable: return "Unreachable";
    case ErrorCode::kChainFormat: return "ChainFormat";
    case ErrorCode::kEmptyFrame: return "EmptyFrame";
    case ErrorCode::kNoPlaneFound: return "NoPlaneFound";
    case ErrorCode::kGridTooLarge: return "GridTooLarge";
    case ErrorCode::kTooFewValidPoints: return "TooFewValidPoints";
    case ErrorCode::kDegenerateHand: return "DegenerateHand";
    case ErrorCode::kUnreachableKeypoint: return "UnreachableKeypoint";
    case ErrorCode::kPlanningFailed: return "PlanningFailed";
    case ErrorCode::kCancelled: return "Cancelled";
    case ErrorCode::kAllSamplesUnreachable: return "AllSamplesUnreachable";
    case ErrorCode::kEmptySession: return "EmptySession";
    case ErrorCode::kOutOfWorkspace: return "OutOfWorkspace";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kMissingMask: return "MissingMask";
    case ErrorCode::kSceneNotFound: return "SceneNotFound";
    case ErrorCode::kSceneCorrupt: return "SceneCorrupt";
    case ErrorCode::kNoPlane: return "NoPlane";
    case ErrorCode::kPointOffPlane: return "PointOffPlane";
    case ErrorCode::kWrongMode: return "WrongMode";
    case ErrorCode::kInvalidState: return "InvalidState";
    case ErrorCode::kNotFound: return "NotFound";
    case ErrorCode::kSchema: return "Schema";
    case ErrorCode::kIo: return "Io";
  }
  return "Unknown";
}

}  // namespace demoforge
