#pragma once

#include <stdexcept>
#include <string>

namespace nimh {

// Base class for everything thrown by this library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed input text (curve files, program files, parameter files, ...).
// line is 1-based; 0 means "not tied to a specific line".
class ParseError : public Error {
public:
    ParseError(const std::string& msg, std::size_t line = 0)
        : Error(line ? msg + " (line " + std::to_string(line) + ")" : msg),
          line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

// Structurally valid input that violates a domain precondition
// (pole inside the evaluation range, cutoff never reached, bad grid, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

} // namespace nimh
