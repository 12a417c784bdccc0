/*
 * Copyright 2026 The DiffWorld Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef DIFFWORLD_ERROR_HPP_
#define DIFFWORLD_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace diffworld {

// Scalar type of the numeric engine. Single precision is opt-in at build
// time; gradient checks assume double.
#ifdef DIFFWORLD_SINGLE_PRECISION
using Real = float;
#else
using Real = double;
#endif

// Malformed or unreadable input: bad magic, truncated payload, unsupported
// codec, missing file.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Well-formed input that violates a contract: out-of-range feature values,
// shape or frame-count mismatches, bad configuration.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Math domain violation inside a tensor op (log of a non-positive value,
// sqrt of a negative value). Carries the flat index of the first offender.
class DomainError : public ValidationError {
 public:
  DomainError(const std::string& what, std::size_t index)
      : ValidationError(what + " at index " + std::to_string(index)),
        index_(index) {}
  std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

}  // namespace diffworld

#endif  // DIFFWORLD_ERROR_HPP_
