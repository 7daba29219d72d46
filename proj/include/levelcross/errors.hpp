/*
   Copyright 2026 The levelcross Authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

       http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/

#pragma once

#include <stdexcept>
#include <string>

namespace levelcross {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Covariance model violating the normalization or Taylor-coefficient constraints.
class InvalidModelError : public Error {
public:
    using Error::Error;
};

/// Configuration-level failure: invalid block exponents, unsolvable level
/// schedule, bad config file. Maps to the "configuration error" exit code.
class ConfigurationError : public Error {
public:
    using Error::Error;
};

class InvalidSchemeError : public ConfigurationError {
public:
    using ConfigurationError::ConfigurationError;
};

class NoSolutionError : public ConfigurationError {
public:
    using ConfigurationError::ConfigurationError;
};

/// Numerical failure; maps to the "numerical failure" exit code.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// Covariance matrix of the conditioning values too close to singular.
class NearDegenerateError : public NumericalError {
public:
    NearDegenerateError(const std::string& what, double det)
        : NumericalError(what), det_(det) {}
    double det() const noexcept { return det_; }

private:
    double det_;
};

/// 1 - r^2 - rdot^2 <= 0 at the requested lag.
class DegenerateLagError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

/// Leading-order asymptotics undefined because 24d - 1 = 0.
class BoundaryDegenerateError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class QuadratureError : public NumericalError {
public:
    QuadratureError(const std::string& what, double partial, double achieved)
        : NumericalError(what), partial_(partial), achieved_(achieved) {}
    double partial_value() const noexcept { return partial_; }
    double achieved_tolerance() const noexcept { return achieved_; }

private:
    double partial_;
    double achieved_;
};

/// Circulant embedding has a genuinely negative eigenvalue.
class NonEmbeddableError : public NumericalError {
public:
    NonEmbeddableError(const std::string& what, double min_eigenvalue)
        : NumericalError(what), min_eig_(min_eigenvalue) {}
    double min_eigenvalue() const noexcept { return min_eig_; }

private:
    double min_eig_;
};

}  // namespace levelcross
