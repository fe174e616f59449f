// Copyright 2026 The cessm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace cessm {

/// Base class of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A caller-supplied argument violates an operation's precondition.
class PreconditionError : public Error {
public:
    using Error::Error;
};

/// Array or tensor shapes are incompatible.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// A simulation or integration produced a non-finite value.
class DivergedError : public Error {
public:
    using Error::Error;
};

/// A linear solve failed (singular or numerically indefinite system).
class SolverError : public Error {
public:
    using Error::Error;
};

/// A file could not be read or does not follow the expected layout.
class FormatError : public Error {
public:
    using Error::Error;
};

} // namespace cessm
