// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace servo {

// Every domain error the library raises. Codes are grouped into families
// (ErrorFamily) that drive CLI exit codes and HTTP status mapping.
enum class ErrorCode {
  ParseError,
  ValidationError,
  InvalidArgument,
  UnknownService,
  UnknownKpi,
  UnknownFault,
  UnknownPlugin,
  UnknownBoard,
  UnknownScenario,
  UnknownDataset,
  UnknownExperiment,
  InvalidCalendar,
  HorizonOverflow,
  AlreadyStarted,
  DuplicateId,
  DuplicateAlgorithm,
  IoError,
  SchemaMismatch,
  RowError,
  WindowOutOfRange,
  WindowUnavailable,
  ManifestError,
  BundleError,
  StartupTimeout,
  IllegalTransition,
  PluginUnreachable,
  PhaseOrderError,
  PayloadInvalid,
  PluginFailure,
  EmptyInput,
  UnrankedPrediction,
  SchemaError,
  IncompatibleMetric,
};

enum class ErrorFamily {
  Usage,       // malformed input documents or arguments
  Validation,  // well-formed input violating an invariant
  NotFound,
  Conflict,    // state machine / ordering / duplicate
  Io,
  Data,        // telemetry or payload schema problems
  Plugin,      // sandbox or remote plugin misbehaviour
};

std::string_view error_name(ErrorCode code) noexcept;
ErrorFamily error_family(ErrorCode code) noexcept;
std::string_view family_name(ErrorFamily family) noexcept;

// Process exit code for the family (documented in docs/cli.md).
int exit_code(ErrorFamily family) noexcept;
// HTTP status used by the REST API.
int http_status(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string message, std::vector<std::string> detail = {});

  ErrorCode code() const noexcept { return code_; }
  ErrorFamily family() const noexcept { return error_family(code_); }
  const std::vector<std::string>& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::vector<std::string> detail_;
};

}  // namespace servo
