// Copyright 2026 The mlark Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef MLARK_STATUS_H_
#define MLARK_STATUS_H_

#include <string_view>

#include "absl/status/status.h"
#include "absl/status/statusor.h"

#define MLARK_STATUS_CONCAT_INNER_(x, y) x##y
#define MLARK_STATUS_CONCAT_(x, y) MLARK_STATUS_CONCAT_INNER_(x, y)

#define MLARK_RETURN_IF_ERROR(expr)              \
  do {                                           \
    ::absl::Status mlark_status_ = (expr);       \
    if (!mlark_status_.ok()) return mlark_status_; \
  } while (0)

#define MLARK_ASSIGN_OR_RETURN_IMPL_(tmp, lhs, rexpr) \
  auto tmp = (rexpr);                                 \
  if (!tmp.ok()) return std::move(tmp).status();      \
  lhs = std::move(tmp).value()

#define MLARK_ASSIGN_OR_RETURN(lhs, rexpr) \
  MLARK_ASSIGN_OR_RETURN_IMPL_(            \
      MLARK_STATUS_CONCAT_(mlark_statusor_, __LINE__), lhs, rexpr)

namespace mlark {

// Partial results from the two helpers do not describe the same records.
inline absl::Status IntegrityError(std::string_view message) {
  return absl::DataLossError(std::string(message));
}

inline bool IsIntegrityError(const absl::Status& status) {
  return status.code() == absl::StatusCode::kDataLoss;
}

// Process exit codes used by the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfigError = 2;
inline constexpr int kExitIntegrityError = 3;
inline constexpr int kExitHelperUnreachable = 4;

inline int ExitCodeForStatus(const absl::Status& status) {
  switch (status.code()) {
    case absl::StatusCode::kOk:
      return kExitOk;
    case absl::StatusCode::kInvalidArgument:
    case absl::StatusCode::kNotFound:
    case absl::StatusCode::kFailedPrecondition:
    case absl::StatusCode::kOutOfRange:
      return kExitConfigError;
    case absl::StatusCode::kDataLoss:
      return kExitIntegrityError;
    case absl::StatusCode::kUnavailable:
    case absl::StatusCode::kDeadlineExceeded:
      return kExitHelperUnreachable;
    default:
      return kExitFailure;
  }
}

}  // namespace mlark

#endif  // MLARK_STATUS_H_
