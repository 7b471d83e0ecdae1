#include "amcs/error.hpp"

namespace amcs {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_rollout: return "invalid rollout";
    case ErrorCode::empty_sample: return "empty sample";
    case ErrorCode::invalid_config: return "invalid config";
    case ErrorCode::integrity: return "integrity";
    case ErrorCode::transport: return "transport";
    case ErrorCode::invalid_problem: return "invalid problem";
    case ErrorCode::invalid_state: return "invalid state";
    case ErrorCode::parse: return "parse";
    case ErrorCode::validation: return "validation";
    case ErrorCode::io: return "io";
    case ErrorCode::shape: return "shape";
    case ErrorCode::empty_dataset: return "empty dataset";
    case ErrorCode::input: return "input";
  }
  return "unknown";
}

}  // namespace amcs
