#pragma once

#include <stdexcept>
#include <string>

namespace tgcn {

// Root of every error the library throws. Callers that only care about
// "something went wrong" catch this; the CLI maps subclasses to exit codes.
class error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class shape_error : public error {
public:
    using error::error;
};

class singular_matrix_error : public error {
public:
    singular_matrix_error(std::size_t index, const std::string& what)
        : error(what), index_(index) {}

    // 0-based slice index of the offending zero diagonal
    std::size_t index() const noexcept { return index_; }

private:
    std::size_t index_;
};

class argument_error : public error {
public:
    using error::error;
};

class parse_error : public error {
public:
    parse_error(std::size_t line, const std::string& what)
        : error("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class data_error : public error {
public:
    using error::error;
};

class numerical_error : public error {
public:
    using error::error;
};

class format_error : public error {
public:
    using error::error;
};

}  // namespace tgcn
