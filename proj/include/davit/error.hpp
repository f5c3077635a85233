/*
 * Copyright (c) 2026, The davit-logo Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <stdexcept>
#include <string>

namespace davit {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Extent or rank disagreement between operands.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// A forward result contained NaN or Inf.
class NumericError : public Error {
 public:
  using Error::Error;
};

class AutogradError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

// Bad magic, unknown version or truncated payload.
class CheckpointCorruptError : public Error {
 public:
  using Error::Error;
};

// Well-formed file whose tensors do not fit the receiving model.
class CheckpointMismatchError : public Error {
 public:
  using Error::Error;
};

// Tensors fit but the architecture fingerprint differs.
class CheckpointHashError : public CheckpointMismatchError {
 public:
  using CheckpointMismatchError::CheckpointMismatchError;
};

}  // namespace davit
