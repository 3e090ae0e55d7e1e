// Copyright 2026 The AdaQuant Authors. All Rights Reserved.
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
// =============================================================================

#ifndef ADAQUANT_ERRORS_HPP_
#define ADAQUANT_ERRORS_HPP_

#include <cstddef>
#include <stdexcept>
#include <string>

namespace adaquant {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidInput : public Error {
 public:
  using Error::Error;
};

class InvalidParameter : public Error {
 public:
  using Error::Error;
};

class DecodeError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what)
      : Error(field + ": " + what), field_(std::move(field)) {}

  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

// Raised when a loss, gradient or parameter becomes non-finite.
class DivergenceError : public Error {
 public:
  static constexpr std::size_t kNoClient = static_cast<std::size_t>(-1);

  DivergenceError(const std::string& what, std::size_t step,
                  std::size_t client = kNoClient)
      : Error(what), step_(step), client_(client) {}

  std::size_t step() const { return step_; }
  std::size_t client() const { return client_; }

 private:
  std::size_t step_;
  std::size_t client_;
};

}  // namespace adaquant

#endif  // ADAQUANT_ERRORS_HPP_
