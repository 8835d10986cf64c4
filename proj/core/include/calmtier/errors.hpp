//  Copyright 2026 The calmtier Authors
//
//  Licensed under the Apache License, Version 2.0 (the "License");
//  you may not use this file except in compliance with the License.
//  You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
//  Unless required by applicable law or agreed to in writing, software
//  distributed under the License is distributed on an "AS IS" BASIS,
//  WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
//  See the License for the specific language governing permissions and
//  limitations under the License.

#ifndef CALMTIER_ERRORS_HPP_
#define CALMTIER_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace calmtier {

/// Base class for every error this library raises on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// task-model
class SchemaError : public Error {
 public:
  using Error::Error;
};
class IntegrityError : public Error {
 public:
  using Error::Error;
};
class ValueError : public Error {
 public:
  using Error::Error;
};

// lattice
class KindMismatch : public Error {
 public:
  using Error::Error;
};
class NotASemilattice : public Error {
 public:
  using Error::Error;
};
class EmptyInput : public Error {
 public:
  using Error::Error;
};

// classifier
class InvalidSpec : public Error {
 public:
  using Error::Error;
};
class AmbiguousLabel : public Error {
 public:
  using Error::Error;
};

// engine
class ScriptMissing : public Error {
 public:
  using Error::Error;
};

// portfolio
class DomainError : public Error {
 public:
  using Error::Error;
};
class EmptyPortfolio : public Error {
 public:
  using Error::Error;
};

}  // namespace calmtier

#endif  // CALMTIER_ERRORS_HPP_
