#pragma once

#include <stdexcept>
#include <string>

namespace vmlab {

struct BlockNotFound : std::out_of_range {
    explicit BlockNotFound(int id)
        : std::out_of_range("block not found: " + std::to_string(id)) {}
};

struct ParseError : std::runtime_error {
    int line;
    ParseError(int line_no, const std::string &what)
        : std::runtime_error("line " + std::to_string(line_no) + ": " + what), line(line_no) {}
};

struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TimeoutError : std::runtime_error {
    TimeoutError() : std::runtime_error("step budget exhausted") {}
};

struct TrapDivZero : std::runtime_error {
    TrapDivZero() : std::runtime_error("division or modulo by zero") {}
};

struct TrapBounds : std::runtime_error {
    explicit TrapBounds(const std::string &what) : std::runtime_error(what) {}
};

struct EmptyInput : std::invalid_argument {
    explicit EmptyInput(const std::string &what) : std::invalid_argument(what) {}
};

struct IncompleteRoleMap : std::invalid_argument {
    explicit IncompleteRoleMap(int id)
        : std::invalid_argument("no role assigned to block " + std::to_string(id)) {}
};

} // namespace vmlab
