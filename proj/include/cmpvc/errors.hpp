#pragma once

#include <stdexcept>
#include <string>

namespace cmpvc {

// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid distribution parameters or configuration values.
class DomainError : public Error {
public:
    using Error::Error;
};

// A series or iteration hit its hard cap before reaching tolerance.
class NonConvergent : public Error {
public:
    using Error::Error;
};

class SingularDesign : public Error {
public:
    using Error::Error;
};

class DegenerateModerator : public Error {
public:
    using Error::Error;
};

class NoValidSplit : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t row, std::string column)
        : Error(what), row_(row), column_(std::move(column)) {}
    explicit ParseError(const std::string& what) : Error(what) {}

    std::size_t row() const noexcept { return row_; }
    const std::string& column() const noexcept { return column_; }

private:
    std::size_t row_ = 0;
    std::string column_;
};

class SchemaMismatch : public Error {
public:
    using Error::Error;
};

}  // namespace cmpvc
