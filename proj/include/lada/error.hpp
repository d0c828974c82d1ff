#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lada {

enum class ErrorKind {
  Shape,
  Bounds,
  State,
  Numeric,
  EmptyInput,
  DivergenceUndefined,
  UnreachableTarget,
  InsufficientPool,
  Policy,
  Spec,
  Parse,
  Io,
  Config,
};

std::string_view to_string(ErrorKind kind);

/// Every failure raised by the library carries a kind so callers (the CLI in
/// particular) can map it onto a stable exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace lada
