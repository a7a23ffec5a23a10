#pragma once

#include <stdexcept>
#include <string>

namespace fsosim {

/// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A value in a config or domain type violates an invariant.
struct ValidationError : Error {
  ValidationError(std::string field_, const std::string& reason_)
      : Error("invalid " + field_ + ": " + reason_), field(std::move(field_)), reason(reason_) {}
  std::string field;
  std::string reason;
};

/// Config text could not be parsed.
struct ParseError : Error {
  ParseError(int line_, const std::string& what_)
      : Error("parse error at line " + std::to_string(line_) + ": " + what_), line(line_) {}
  int line;
};

/// An action id is not present in an action map or domain.
struct UnknownActionError : Error {
  explicit UnknownActionError(const std::string& action)
      : Error("unknown action: " + action) {}
};

/// A notification origin is not a (transitive) member of the community.
struct NotAMemberError : Error {
  explicit NotAMemberError(std::int64_t agent)
      : Error("agent " + std::to_string(agent) + " is not a member of this community") {}
};

/// form_son called with an allocation that does not cover the request.
struct IncompleteAllocationError : Error {
  using Error::Error;
};

/// dissolve_son called on an already dissolved SON.
struct AlreadyDissolvedError : Error {
  using Error::Error;
};

/// A summary was requested for a run whose log is not terminated.
struct IncompleteRunError : Error {
  using Error::Error;
};

/// Filesystem output failed.
struct IoError : Error {
  using Error::Error;
};

}  // namespace fsosim
