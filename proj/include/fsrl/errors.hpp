#pragma once

#include <stdexcept>
#include <string>

namespace fsrl {

// Bad inputs: shapes, ranges, missing side information.
class ValidationError : public std::invalid_argument {
public:
    explicit ValidationError(const std::string& what) : std::invalid_argument(what) {}
};

// Unreadable, truncated or malformed files.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace fsrl
