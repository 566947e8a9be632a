// SPDX-License-Identifier: Apache-2.0
#include "qgrl/error.hpp"

namespace qgrl {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig: return "config";
    case ErrorKind::kIngestion: return "ingestion";
    case ErrorKind::kDependency: return "dependency";
    case ErrorKind::kTraining: return "training";
    case ErrorKind::kInvalidArgument: return "invalid-argument";
    case ErrorKind::kCheckpoint: return "checkpoint";
    case ErrorKind::kIo: return "io";
  }
  return "unknown";
}

}  // namespace qgrl
