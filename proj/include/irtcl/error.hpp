#ifndef IRTCL_ERROR_HPP
#define IRTCL_ERROR_HPP

#include <stdexcept>
#include <string>

namespace irtcl {

/// Raised when a precondition on an argument is violated (dimension mismatch, empty input, bad range).
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised by rank correlation when one of the inputs has no variance.
class UndefinedCorrelation : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Raised when an experiment config is malformed. `path()` is a JSON-pointer style location.
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string path, const std::string& what)
        : std::runtime_error(path + ": " + what), path_(std::move(path)) {}

    const std::string& path() const { return path_; }

private:
    std::string path_;
};

/// Raised for malformed input files.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline void require(bool ok, const std::string& msg) {
    if (!ok) {
        throw InvalidArgument(msg);
    }
}

} // namespace detail

} // namespace irtcl

#endif
