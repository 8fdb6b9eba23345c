// Copyright 2026 The MaskGRPO Authors.
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

#pragma once

#include <stdexcept>
#include <string>

namespace maskgrpo {

// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A caller broke a documented precondition (shape, range, state).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// A computation produced a non-finite value where a finite one is required,
// e.g. log(0) in a transition probability or an infinite importance ratio.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class CheckpointError : public Error {
 public:
  enum class Code { kIo, kBadMagic, kVersionMismatch, kTruncated, kArchMismatch };

  CheckpointError(Code code, const std::string& what) : Error(what), code_(code) {}

  Code code() const noexcept { return code_; }

 private:
  Code code_;
};

// Configuration problem. `line` is 1-based, 0 when the error is not tied to
// a single line (cross-field validation, unreadable file).
class ConfigError : public Error {
 public:
  ConfigError(int line, const std::string& what) : Error(what), line_(line) {}

  int line() const noexcept { return line_; }

 private:
  int line_;
};

}  // namespace maskgrpo
