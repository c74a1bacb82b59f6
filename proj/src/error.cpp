#include "fofe/error.hpp"

namespace fofe {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "invalid_argument";
    case ErrorCode::InvalidConfig: return "invalid_config";
    case ErrorCode::EmptyInput: return "empty_input";
    case ErrorCode::BadMagic: return "bad_magic";
    case ErrorCode::BadVersion: return "bad_version";
    case ErrorCode::VocabHashMismatch: return "vocab_hash_mismatch";
    case ErrorCode::TruncatedBlob: return "truncated_blob";
    case ErrorCode::NonFinite: return "non_finite";
    case ErrorCode::Io: return "io";
  }
  return "unknown";
}

}  // namespace fofe
