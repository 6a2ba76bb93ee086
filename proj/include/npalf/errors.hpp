#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace npalf {

/// Malformed input file or invalid argument to a data operation.
class data_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Line-numbered parse failure (1-based line).
class parse_error : public data_error {
public:
    parse_error(std::size_t line, const std::string& what)
        : data_error("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Invalid run configuration or optimizer parameters.
class config_error : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A training pass produced a non-finite factor or refined error.
/// `entry` is the position in the training entry list being processed.
class divergence_error : public std::runtime_error {
public:
    explicit divergence_error(std::size_t entry)
        : std::runtime_error("training diverged at training entry " + std::to_string(entry)),
          entry_(entry) {}

    std::size_t entry() const noexcept { return entry_; }

private:
    std::size_t entry_;
};

}  // namespace npalf
