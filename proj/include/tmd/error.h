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

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tmd {

/// Machine-readable failure category carried by every library exception.
enum class ErrorCode {
    kDomain,        // argument outside its mathematical domain
    kDegenerate,    // quantity undefined for this input (zero variance, empty herald slice, ...)
    kConditioning,  // detector matrix is rank deficient
    kTruncation,    // photon truncation exceeds what the click space resolves
    kComplexity,    // exact algorithm refused on size grounds
    kNumerical,     // iterative method failed to converge
    kConfig,        // configuration schema violation
    kData,          // malformed input data
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
   public:
    Error(ErrorCode code, const std::string &message);

    ErrorCode code() const noexcept {
        return code_;
    }
    /// The message without the code prefix.
    const std::string &message() const noexcept {
        return message_;
    }

   private:
    ErrorCode code_;
    std::string message_;
};

[[noreturn]] void fail(ErrorCode code, const std::string &message);

}  // namespace tmd
