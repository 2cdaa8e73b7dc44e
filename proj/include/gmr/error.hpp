#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gmr {

enum class Errc {
  InvalidArgument,
  DimensionMismatch,
  LengthMismatch,
  NonFinite,
  EmptyGroup,
  DuplicateGroupId,
  EmptyCluster,
  SingularSystem,
  AllRestartsFailed,
  TooFewGroups,
  TooManyGroups,
  GroupTooSmall,
  UnknownGroup,
  Infeasible,
  Io,
  Parse,
};

std::string_view to_string(Errc code) noexcept;

/// Every failure raised by the library carries one of the codes above so callers
/// (restart loop, CLI exit status) can dispatch on it without string matching.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace gmr
