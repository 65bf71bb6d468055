#pragma once

#include <stdexcept>
#include <string>

namespace forge {

// Base of every error raised by the workbench. Callers that only need to
// distinguish "task failed" from "infrastructure broke" catch Error and
// InfrastructureError respectively.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
public:
  using Error::Error;
};

class DecodeError : public Error {
public:
  using Error::Error;
};

class ConfigError : public Error {
public:
  using Error::Error;
};

// Provider transport failure. Always retryable by the caller.
class TransportError : public Error {
public:
  using Error::Error;
  bool retryable() const noexcept { return true; }
};

// Provider output could not be turned into a structured artifact.
class GenerationError : public Error {
public:
  GenerationError(const std::string& what, std::string raw_text)
      : Error(what), raw_text_(std::move(raw_text)) {}
  const std::string& raw_text() const noexcept { return raw_text_; }

private:
  std::string raw_text_;
};

class PipelineError : public Error {
public:
  using Error::Error;
};

class AssemblyError : public Error {
public:
  using Error::Error;
};

class RepairError : public Error {
public:
  using Error::Error;
};

class ExtractionError : public Error {
public:
  using Error::Error;
};

// Browser launch / session / server failures. Never counted against a task.
class InfrastructureError : public Error {
public:
  using Error::Error;
};

} // namespace forge
