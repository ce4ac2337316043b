#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace m2s {

enum class ErrorKind {
  MalformedScan,
  MalformedLabel,
  MalformedPose,
  MalformedCalib,
  MalformedConfig,
  InvalidConfig,
  EmptyInput,
  DegenerateSource,
  NoOverlap,
  InstanceNotFound,
  MissingLabels,
  DbWriteError,
  DbReadError,
  EmptyDatabase,
  ShapeError,
  NumericError,
  DegenerateInstance,
  ClassRangeError,
  NoValidClasses,
  IoError,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MalformedScan: return "MalformedScan";
    case ErrorKind::MalformedLabel: return "MalformedLabel";
    case ErrorKind::MalformedPose: return "MalformedPose";
    case ErrorKind::MalformedCalib: return "MalformedCalib";
    case ErrorKind::MalformedConfig: return "MalformedConfig";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::DegenerateSource: return "DegenerateSource";
    case ErrorKind::NoOverlap: return "NoOverlap";
    case ErrorKind::InstanceNotFound: return "InstanceNotFound";
    case ErrorKind::MissingLabels: return "MissingLabels";
    case ErrorKind::DbWriteError: return "DbWriteError";
    case ErrorKind::DbReadError: return "DbReadError";
    case ErrorKind::EmptyDatabase: return "EmptyDatabase";
    case ErrorKind::ShapeError: return "ShapeError";
    case ErrorKind::NumericError: return "NumericError";
    case ErrorKind::DegenerateInstance: return "DegenerateInstance";
    case ErrorKind::ClassRangeError: return "ClassRangeError";
    case ErrorKind::NoValidClasses: return "NoValidClasses";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

// Single exception type for every library failure; callers dispatch on kind().
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace m2s
