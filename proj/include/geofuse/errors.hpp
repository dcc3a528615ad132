#pragma once

#include <stdexcept>
#include <string>

namespace geofuse {

// Raised for malformed inputs: bad files, schema violations, contract
// violations on user-supplied values. Maps to process exit code 1.
class input_error : public std::runtime_error {
public:
    explicit input_error(const std::string& what) : std::runtime_error(what) {}
};

// Raised when a computation cannot proceed numerically: non-finite
// intermediates, degenerate systems with no defined answer. Exit code 2.
class numeric_error : public std::runtime_error {
public:
    explicit numeric_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace geofuse
