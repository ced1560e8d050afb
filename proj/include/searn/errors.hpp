#pragma once

#include <stdexcept>
#include <string>

namespace searn {

struct IllegalAction : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct TerminalState : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct MissingReference : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NoLearnedComponent : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct MismatchedActionCount : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct EmptyInput : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct LengthMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct TooLargeToEnumerate : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct MalformedRow : std::runtime_error {
  MalformedRow(const std::string& msg, int line) : std::runtime_error(msg), line_number(line) {}
  int line_number;
};
struct EmptyFile : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct UnsupportedVersion : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct CorruptFile : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace searn
