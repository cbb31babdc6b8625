#pragma once

#include <stdexcept>
#include <string>

namespace zonocert {

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class ShapeError : public Error {
public:
    explicit ShapeError(const std::string& msg) : Error("shape: " + msg) {}
};

class DomainError : public Error {
public:
    explicit DomainError(const std::string& msg) : Error("domain: " + msg) {}
};

class IndexError : public Error {
public:
    explicit IndexError(const std::string& msg) : Error("index: " + msg) {}
};

class FormatError : public Error {
public:
    explicit FormatError(const std::string& msg) : Error("format: " + msg) {}
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& msg) : Error("config: " + msg) {}
};

class MetricError : public Error {
public:
    explicit MetricError(const std::string& msg) : Error("metric: " + msg) {}
};

class UnsupportedOpError : public Error {
public:
    explicit UnsupportedOpError(const std::string& msg) : Error("unsupported op: " + msg) {}
};

} // namespace zonocert
