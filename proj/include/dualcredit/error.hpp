// Copyright 2026 The dualcredit Authors
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

#ifndef DUALCREDIT_ERROR_HPP_
#define DUALCREDIT_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace dualcredit {

// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class StepAfterTerminal : public Error {
 public:
  StepAfterTerminal() : Error("step called on a terminated dialogue state") {}
};

class EmptyUtterance : public Error {
 public:
  EmptyUtterance() : Error("utterance must contain at least one token") {}
};

class EmptyLibrary : public Error {
 public:
  EmptyLibrary() : Error("script library must contain at least one script") {}
};

class NonTerminalTrajectory : public Error {
 public:
  NonTerminalTrajectory() : Error("trajectory has not terminated") {}
};

class LengthMismatch : public Error {
 public:
  explicit LengthMismatch(const std::string& what)
      : Error("length mismatch: " + what) {}
};

class DimMismatch : public Error {
 public:
  explicit DimMismatch(const std::string& what)
      : Error("dimension mismatch: " + what) {}
};

class EmptyInput : public Error {
 public:
  explicit EmptyInput(const std::string& what) : Error("empty input: " + what) {}
};

class UnknownMethod : public Error {
 public:
  explicit UnknownMethod(const std::string& name)
      : Error("unknown method '" + name + "'") {}
};

// Configuration and data-file errors.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class ParseError : public ConfigError {
 public:
  explicit ParseError(const std::string& what)
      : ConfigError("parse error: " + what) {}
};

class ValidationError : public ConfigError {
 public:
  ValidationError(std::string key, const std::string& why)
      : ConfigError("invalid value for '" + key + "': " + why),
        key_(std::move(key)) {}

  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

class UnknownKey : public ConfigError {
 public:
  explicit UnknownKey(std::string key)
      : ConfigError("unknown key '" + key + "'"), key_(std::move(key)) {}

  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

}  // namespace dualcredit

#endif  // DUALCREDIT_ERROR_HPP_
