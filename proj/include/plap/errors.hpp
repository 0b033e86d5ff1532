#pragma once

#include <stdexcept>
#include <string>

namespace plap {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DegenerateWeight : Error { using Error::Error; };
struct InvalidField : Error { using Error::Error; };
struct SingularMatrix : Error { using Error::Error; };
struct InvalidExponent : Error { using Error::Error; };
struct NonConvergence : Error {
  NonConvergence(const std::string& msg, double residual)
      : Error(msg), final_residual(residual) {}
  double final_residual;
};
struct NumericalBreakdown : Error { using Error::Error; };
struct OutOfRange : Error { using Error::Error; };
struct IncompatibleTrajectories : Error { using Error::Error; };
struct InvalidParameters : Error { using Error::Error; };
struct UndefinedRatio : Error { using Error::Error; };
struct NotApplicable : Error { using Error::Error; };
struct InvalidRun : Error { using Error::Error; };
struct ParseError : Error {
  ParseError(const std::string& msg, int line_no, std::string key_name)
      : Error(msg), line(line_no), key(std::move(key_name)) {}
  int line;
  std::string key;
};

}  // namespace plap
