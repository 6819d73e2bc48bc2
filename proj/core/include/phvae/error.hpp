#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace phvae {

// Base for every error raised by the library. `kind()` is a stable tag that
// callers (and the CLI) can switch on without parsing the message.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& what)
        : std::runtime_error(what), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

class ShapeError : public Error {
public:
    explicit ShapeError(const std::string& what) : Error("shape", what) {}
};

class DomainError : public Error {
public:
    explicit DomainError(const std::string& what) : Error("domain", what) {}
};

// A primitive produced NaN or Inf.
class NonFiniteError : public Error {
public:
    NonFiniteError(std::string op, const std::string& what)
        : Error("non_finite", op + ": " + what), op_(std::move(op)) {}

    const std::string& op() const noexcept { return op_; }

private:
    std::string op_;
};

class TapeError : public Error {
public:
    explicit TapeError(const std::string& what) : Error("tape", what) {}
};

// Uniformization needed more Poisson terms than the plan allows.
class TruncationError : public Error {
public:
    TruncationError(std::size_t required, std::size_t cap)
        : Error("truncation", "uniformization needs " + std::to_string(required) +
                                  " terms, cap is " + std::to_string(cap)),
          required_(required) {}

    std::size_t required_terms() const noexcept { return required_; }

private:
    std::size_t required_;
};

class FormatError : public Error {
public:
    explicit FormatError(const std::string& what) : Error("format", what) {}
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error("config", what) {}
};

} // namespace phvae
