// Copyright 2026 The roadgen Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace roadgen {

/// Base for every error the library raises. The CLI maps these to exit code 2.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

class BehindCamera : public Error {
public:
    BehindCamera() : Error("point is behind the camera") {}
};

class NoIntersection : public Error {
public:
    NoIntersection() : Error("ray does not intersect the requested plane in front of the camera") {}
};

class Degenerate : public Error {
public:
    using Error::Error;
};

class ShapeMismatch : public Error {
public:
    using Error::Error;
};

class RigMismatch : public Error {
public:
    using Error::Error;
};

class TooFewFrames : public Error {
public:
    using Error::Error;
};

class DetectorUnavailable : public Error {
public:
    DetectorUnavailable() : Error("no detector available for pseudo labeling") {}
};

class TrainerHookFailed : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// Malformed text input. Line and column are 1-based.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line, std::size_t column)
        : Error(what + " (line " + std::to_string(line) + ", column " + std::to_string(column) + ")"),
          line_(line),
          column_(column) {}

    std::size_t line() const noexcept { return line_; }
    std::size_t column() const noexcept { return column_; }

private:
    std::size_t line_;
    std::size_t column_;
};

/// Configuration problem; `key()` is the dotted path of the offending key.
class ConfigError : public Error {
public:
    ConfigError(const std::string& key, const std::string& what)
        : Error("config key '" + key + "': " + what), key_(key) {}

    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

}  // namespace roadgen
