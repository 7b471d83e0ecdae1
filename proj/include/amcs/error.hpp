#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace amcs {

enum class ErrorCode {
  invalid_rollout,
  empty_sample,
  invalid_config,
  integrity,
  transport,
  invalid_problem,
  invalid_state,
  parse,
  validation,
  io,
  shape,
  empty_dataset,
  input,
};

const char* to_string(ErrorCode code);

/**
 * Single exception type for the library.
 *
 * The code identifies the failure class so the CLI can map it to an exit
 * status; the message carries the human-readable diagnostic.
 */
class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

/// Malformed input line; carries 1-based line number and byte offset of the line start.
class ParseError : public Error {
public:
  ParseError(std::size_t line, std::size_t byte_offset, const std::string& message)
      : Error(ErrorCode::parse, "line " + std::to_string(line) + " (byte " +
                                    std::to_string(byte_offset) + "): " + message),
        line_(line),
        byte_offset_(byte_offset) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t byte_offset() const noexcept { return byte_offset_; }

private:
  std::size_t line_;
  std::size_t byte_offset_;
};

/// I/O failure after `written` items reached the sink.
class IoError : public Error {
public:
  IoError(const std::string& message, std::size_t written)
      : Error(ErrorCode::io, message), written_(written) {}

  std::size_t written() const noexcept { return written_; }

private:
  std::size_t written_;
};

}  // namespace amcs
