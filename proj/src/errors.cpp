#include "spn/errors.hpp"

#include <utility>

namespace spn {

namespace {

std::string join_issues(const std::vector<std::string>& issues) {
    std::string msg = "invalid configuration:";
    for (const auto& s : issues) msg += "\n  " + s;
    return msg;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> issues)
    : std::runtime_error(join_issues(issues)), issues_(std::move(issues)) {}

}  // namespace spn
