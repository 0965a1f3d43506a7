#ifndef ODCL_ERRORS_HPP
#define ODCL_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace odcl {

// Invalid configuration (bad values, unrealizable stream, unknown keys).
// The CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed manifest / checkpoint / log file; message carries file:line locus.
class ParseError : public std::runtime_error {
public:
    explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

// Shape mismatch between tensors, images, or encoder configuration.
class DimensionError : public std::runtime_error {
public:
    explicit DimensionError(const std::string& msg) : std::runtime_error(msg) {}
};

// Zero-norm vector fed to a cosine similarity.
class DegenerateVectorError : public std::runtime_error {
public:
    explicit DegenerateVectorError(const std::string& msg) : std::runtime_error(msg) {}
};

// Vocabulary update for a class name that was never inserted.
class MissingEntryError : public std::runtime_error {
public:
    explicit MissingEntryError(const std::string& msg) : std::runtime_error(msg) {}
};

// NaN/Inf loss during training; message names the iteration.
// The CLI maps this to exit code 3.
class DivergenceError : public std::runtime_error {
public:
    explicit DivergenceError(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid prediction request (bad mode/task id combination).
class RoutingError : public std::runtime_error {
public:
    explicit RoutingError(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid arguments to an operation (empty class name, bad index, ...).
class InputError : public std::runtime_error {
public:
    explicit InputError(const std::string& msg) : std::runtime_error(msg) {}
};

// Metric computation on a matrix with unfilled cells.
class IncompleteMatrixError : public std::runtime_error {
public:
    explicit IncompleteMatrixError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace odcl

#endif
