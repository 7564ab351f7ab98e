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

#ifndef DEMOFORGE_ERROR_HPP_
#define DEMOFORGE_ERROR_HPP_

#include <stdexcept>
#include <string>
#include <string_view>

namespace demoforge {

// Every failure the library reports carries one of these codes. The service
// layer forwards the code name verbatim in its structured error bodies.
enum class ErrorCode {
  kInvalidArgument,
  kInvalidDepth,
  kOutOfBounds,
  kBehindCamera,
  kJointLimitViolation,
  kUnreachable,
  kChainFormat,
  kEmptyFrame,
  kNoPlaneFound,
  kGridTooLarge,
  kTooFewValidPoints,
  kDegenerateHand,
  kUnreachableKeypoint,
  kPlanningFailed,
  kCancelled,
  kAllSamplesUnreachable,
  kEmptySession,
  kOutOfWorkspace,
  kDimensionMismatch,
  kMissingMask,
  kSceneNotFound,
  kSceneCorrupt,
  kNoPlane,
  kPointOffPlane,
  kWrongMode,
  kInvalidState,
  kNotFound,
  kSchema,
  kIo,
};

std::string_view error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace demoforge

#endif  // DEMOFORGE_ERROR_HPP_
