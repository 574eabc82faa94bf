// SPDX-License-Identifier: Apache-2.0

#include "servo/error.hpp"

namespace servo {

std::string_view error_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::ValidationError: return "ValidationError";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::UnknownService: return "UnknownService";
    case ErrorCode::UnknownKpi: return "UnknownKpi";
    case ErrorCode::UnknownFault: return "UnknownFault";
    case ErrorCode::UnknownPlugin: return "UnknownPlugin";
    case ErrorCode::UnknownBoard: return "UnknownBoard";
    case ErrorCode::UnknownScenario: return "UnknownScenario";
    case ErrorCode::UnknownDataset: return "UnknownDataset";
    case ErrorCode::UnknownExperiment: return "UnknownExperiment";
    case ErrorCode::InvalidCalendar: return "InvalidCalendar";
    case ErrorCode::HorizonOverflow: return "HorizonOverflow";
    case ErrorCode::AlreadyStarted: return "AlreadyStarted";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::DuplicateAlgorithm: return "DuplicateAlgorithm";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::SchemaMismatch: return "SchemaMismatch";
    case ErrorCode::RowError: return "RowError";
    case ErrorCode::WindowOutOfRange: return "WindowOutOfRange";
    case ErrorCode::WindowUnavailable: return "WindowUnavailable";
    case ErrorCode::ManifestError: return "ManifestError";
    case ErrorCode::BundleError: return "BundleError";
    case ErrorCode::StartupTimeout: return "StartupTimeout";
    case ErrorCode::IllegalTransition: return "IllegalTransition";
    case ErrorCode::PluginUnreachable: return "PluginUnreachable";
    case ErrorCode::PhaseOrderError: return "PhaseOrderError";
    case ErrorCode::PayloadInvalid: return "PayloadInvalid";
    case ErrorCode::PluginFailure: return "PluginFailure";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::UnrankedPrediction: return "UnrankedPrediction";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::IncompatibleMetric: return "IncompatibleMetric";
  }
  return "Unknown";
}

ErrorFamily error_family(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::ParseError:
    case ErrorCode::InvalidArgument:
    case ErrorCode::ManifestError:
    case ErrorCode::BundleError:
      return ErrorFamily::Usage;
    case ErrorCode::ValidationError:
    case ErrorCode::InvalidCalendar:
    case ErrorCode::HorizonOverflow:
    case ErrorCode::IncompatibleMetric:
      return ErrorFamily::Validation;
    case ErrorCode::UnknownService:
    case ErrorCode::UnknownKpi:
    case ErrorCode::UnknownFault:
    case ErrorCode::UnknownPlugin:
    case ErrorCode::UnknownBoard:
    case ErrorCode::UnknownScenario:
    case ErrorCode::UnknownDataset:
    case ErrorCode::UnknownExperiment:
      return ErrorFamily::NotFound;
    case ErrorCode::AlreadyStarted:
    case ErrorCode::DuplicateId:
    case ErrorCode::DuplicateAlgorithm:
    case ErrorCode::IllegalTransition:
    case ErrorCode::PhaseOrderError:
      return ErrorFamily::Conflict;
    case ErrorCode::IoError:
      return ErrorFamily::Io;
    case ErrorCode::SchemaMismatch:
    case ErrorCode::RowError:
    case ErrorCode::WindowOutOfRange:
    case ErrorCode::WindowUnavailable:
    case ErrorCode::EmptyInput:
    case ErrorCode::UnrankedPrediction:
    case ErrorCode::SchemaError:
      return ErrorFamily::Data;
    case ErrorCode::StartupTimeout:
    case ErrorCode::PluginUnreachable:
    case ErrorCode::PayloadInvalid:
    case ErrorCode::PluginFailure:
      return ErrorFamily::Plugin;
  }
  return ErrorFamily::Usage;
}

std::string_view family_name(ErrorFamily family) noexcept {
  switch (family) {
    case ErrorFamily::Usage: return "usage";
    case ErrorFamily::Validation: return "validation";
    case ErrorFamily::NotFound: return "not_found";
    case ErrorFamily::Conflict: return "conflict";
    case ErrorFamily::Io: return "io";
    case ErrorFamily::Data: return "data";
    case ErrorFamily::Plugin: return "plugin";
  }
  return "unknown";
}

int exit_code(ErrorFamily family) noexcept {
  switch (family) {
    case ErrorFamily::Usage: return 2;
    case ErrorFamily::Validation: return 3;
    case ErrorFamily::NotFound: return 4;
    case ErrorFamily::Conflict: return 5;
    case ErrorFamily::Io: return 6;
    case ErrorFamily::Data: return 7;
    case ErrorFamily::Plugin: return 8;
  }
  return 1;
}

int http_status(ErrorCode code) noexcept {
  switch (code) {
    // A plugin that is not Running cannot take work: the request conflicts
    // with the instance's current state.
    case ErrorCode::PluginUnreachable: return 409;
    case ErrorCode::StartupTimeout: return 504;
    case ErrorCode::PayloadInvalid:
    case ErrorCode::PluginFailure: return 502;
    default: break;
  }
  switch (error_family(code)) {
    case ErrorFamily::Usage: return 400;
    case ErrorFamily::Validation: return 422;
    case ErrorFamily::NotFound: return 404;
    case ErrorFamily::Conflict: return 409;
    case ErrorFamily::Io: return 500;
    case ErrorFamily::Data: return 422;
    case ErrorFamily::Plugin: return 502;
  }
  return 500;
}

Error::Error(ErrorCode code, std::string message, std::vector<std::string> detail)
    : std::runtime_error(std::move(message)), code_(code), detail_(std::move(detail)) {}

}  // namespace servo
