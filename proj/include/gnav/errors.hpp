#pragma once

#include <stdexcept>
#include <string>

namespace gnav {

// Bad configuration, malformed spec files, invalid arguments. CLI exit code 2.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Non-finite loss during training. CLI exit code 3.
struct DivergenceError : std::runtime_error {
    explicit DivergenceError(const std::string& what) : std::runtime_error(what) {}
};

// Unreadable/unwritable files, parse failures of data files. CLI exit code 4.
struct IoError : std::runtime_error {
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

// Graph construction or alignment failure (bad traversal data, bad closures,
// unmatched nodes).
struct GraphError : std::runtime_error {
    explicit GraphError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace gnav
