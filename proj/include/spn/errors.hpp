#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace spn {

class InvalidOrderError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class AssumptionViolation : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NotDiffusionModelError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class MisalignedRegionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class LayoutError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class SingularSystemError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Configuration problems. `issues` holds one "path: message" entry per offending key.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(std::vector<std::string> issues);
    const std::vector<std::string>& issues() const noexcept { return issues_; }

private:
    std::vector<std::string> issues_;
};

}  // namespace spn
