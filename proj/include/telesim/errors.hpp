// Copyright 2026 The telesim Authors
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

#ifndef TELESIM_ERRORS_HPP_
#define TELESIM_ERRORS_HPP_

#include <cstddef>
#include <stdexcept>
#include <string>

namespace telesim {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParameterError : public Error {
 public:
  using Error::Error;
};

class InvalidStateError : public Error {
 public:
  using Error::Error;
};

// Parallel (or zero) axes passed to the elbow-axis projection.
class DegenerateFrameError : public Error {
 public:
  using Error::Error;
};

class SynthesisError : public Error {
 public:
  SynthesisError(const std::string& what, double residual)
      : Error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class SimulationDiverged : public Error {
 public:
  SimulationDiverged(std::string field, double t)
      : Error("simulation diverged: non-finite " + field + " at t=" +
              std::to_string(t)),
        field_(std::move(field)),
        t_(t) {}
  const std::string& field() const { return field_; }
  double time() const { return t_; }

 private:
  std::string field_;
  double t_;
};

class RecordError : public Error {
 public:
  RecordError(const std::string& what, std::size_t offset)
      : Error(what + " (byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

class VersionMismatch : public Error {
 public:
  using Error::Error;
};

}  // namespace telesim

#endif  // TELESIM_ERRORS_HPP_
