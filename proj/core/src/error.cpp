#include "auxcodec/error.hpp"

namespace auxcodec {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kDimension: return "dimension error";
    case ErrorKind::kParse: return "parse error";
    case ErrorKind::kUnsupportedFormat: return "unsupported format";
    case ErrorKind::kFormat: return "format error";
    case ErrorKind::kModelMismatch: return "model mismatch";
    case ErrorKind::kCorruption: return "corrupt data";
    case ErrorKind::kOverflow: return "overflow";
    case ErrorKind::kNumerical: return "numerical failure";
    case ErrorKind::kDomain: return "domain error";
    case ErrorKind::kUsage: return "usage error";
    case ErrorKind::kUnsupportedConfig: return "unsupported configuration";
    case ErrorKind::kDivergence: return "divergence";
    case ErrorKind::kIo: return "i/o error";
  }
  return "error";
}

void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, std::string(to_string(kind)) + ": " + what);
}

}  // namespace auxcodec
