#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gog {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Shape or dimension disagreement between operands.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// A caller-supplied value violates a documented precondition.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// A runtime invariant of the algorithm was broken (e.g. weights no longer sum to n).
class InvariantError : public Error {
public:
    using Error::Error;
};

/// Malformed input file. Carries the 1-based row and column when known (0 = unknown).
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t row = 0, std::size_t col = 0)
        : Error(format(what, row, col)), row_(row), col_(col) {}

    std::size_t row() const noexcept { return row_; }
    std::size_t col() const noexcept { return col_; }

private:
    static std::string format(const std::string& what, std::size_t row, std::size_t col) {
        if (row == 0 && col == 0) return what;
        std::string out = what + " (row " + std::to_string(row);
        if (col != 0) out += ", column " + std::to_string(col);
        return out + ")";
    }

    std::size_t row_;
    std::size_t col_;
};

/// CSV header names a column the schema does not declare (or vice versa).
class UnknownColumnError : public ParseError {
public:
    using ParseError::ParseError;
};

/// A cell could not be converted to the declared type.
class CellParseError : public ParseError {
public:
    using ParseError::ParseError;
};

/// Input file had no header or no data rows.
class EmptyInputError : public ParseError {
public:
    using ParseError::ParseError;
};

}  // namespace gog
