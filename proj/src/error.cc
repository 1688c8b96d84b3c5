// Copyright 2026 The tmdstat Authors
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

#include "tmd/error.h"

namespace tmd {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::kDomain:
            return "domain_error";
        case ErrorCode::kDegenerate:
            return "degenerate_condition";
        case ErrorCode::kConditioning:
            return "conditioning_error";
        case ErrorCode::kTruncation:
            return "truncation_error";
        case ErrorCode::kComplexity:
            return "complexity_guard";
        case ErrorCode::kNumerical:
            return "numerical_error";
        case ErrorCode::kConfig:
            return "config_error";
        case ErrorCode::kData:
            return "data_error";
    }
    return "unknown_error";
}

Error::Error(ErrorCode code, const std::string &message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), message_(message) {
}

void fail(ErrorCode code, const std::string &message) {
    throw Error(code, message);
}

}  // namespace tmd
