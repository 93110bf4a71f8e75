#include "kdmhl/error.hpp"

namespace kdmhl {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "invalid-argument";
    case ErrorKind::InvalidConfig: return "invalid-config";
    case ErrorKind::MissingInput: return "missing-input";
    case ErrorKind::BadData: return "bad-data";
    case ErrorKind::Unsupported: return "unsupported";
  }
  return "error";
}

void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace kdmhl
