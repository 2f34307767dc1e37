//
// Copyright 2026 The SMS Authors
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
//

#ifndef SMS_ERROR_HPP_
#define SMS_ERROR_HPP_

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sms {

// Root of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor shapes or layer dimensions do not line up.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Caller supplied a value outside an operation's domain (label range, empty
// set, mismatched counts).
class InputError : public Error {
 public:
  using Error::Error;
};

// A configuration or hyper-parameter is out of range.
class ParameterError : public Error {
 public:
  using Error::Error;
};

// Object used in the wrong lifecycle state (e.g. backward before forward).
class StateError : public Error {
 public:
  using Error::Error;
};

// NaN or Inf produced by an operation.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// Malformed binary or text file. Carries the byte offset (binary formats) or
// the 1-based line number (text formats) where parsing failed.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::size_t position)
      : Error(what), position_(position) {}
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

// Training diverged. Carries the 1-based epoch in which it happened.
class TrainingError : public Error {
 public:
  TrainingError(const std::string& what, int epoch)
      : Error(what), epoch_(epoch) {}
  int epoch() const { return epoch_; }

 private:
  int epoch_;
};

// The verifier did not reach its hold-out accuracy floor.
class CalibrationError : public Error {
 public:
  CalibrationError(const std::string& what, double holdout_accuracy)
      : Error(what), holdout_accuracy_(holdout_accuracy) {}
  double holdout_accuracy() const { return holdout_accuracy_; }

 private:
  double holdout_accuracy_;
};

// Experiment config could not be parsed or validated.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// An artifact on disk does not match the hash recorded for it.
class IntegrityError : public Error {
 public:
  using Error::Error;
};

// A pipeline stage failed. Names the stage; the cause is in what().
class StageError : public Error {
 public:
  StageError(const std::string& stage, const std::string& cause)
      : Error("stage '" + stage + "' failed: " + cause), stage_(stage) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

}  // namespace sms

#endif  // SMS_ERROR_HPP_
