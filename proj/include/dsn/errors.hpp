#pragma once

#include <stdexcept>
#include <string>

namespace dsn {

/// Invalid dimensions, geometry or configuration values.
class ConfigError : public std::runtime_error {
public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// A caller broke an operation's precondition.
class ContractViolation : public std::logic_error {
public:
  explicit ContractViolation(const std::string& what) : std::logic_error(what) {}
};

}  // namespace dsn
