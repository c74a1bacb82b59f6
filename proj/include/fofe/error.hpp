#ifndef FOFE_ERROR_HPP
#define FOFE_ERROR_HPP

#include <stdexcept>
#include <string>

namespace fofe {

// Error codes are stable identifiers; the CLI prints them in its
// machine-parsable error line and maps them to exit codes.
enum class ErrorCode {
  InvalidArgument,
  InvalidConfig,
  EmptyInput,
  BadMagic,
  BadVersion,
  VocabHashMismatch,
  TruncatedBlob,
  NonFinite,
  Io,
};

const char* error_code_name(ErrorCode code);

class FofeError : public std::runtime_error {
 public:
  FofeError(ErrorCode code, const std::string& msg)
      : std::runtime_error(msg), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& msg) {
  throw FofeError(code, msg);
}

}  // namespace fofe

#endif  // FOFE_ERROR_HPP
