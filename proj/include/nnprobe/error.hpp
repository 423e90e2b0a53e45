#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace nnprobe {

enum class ErrorCode {
  // corpusio
  IoError,
  BadMagic,
  HeaderMismatch,
  NonFiniteValue,
  RowCountMismatch,
  DuplicatePosition,
  MalformedRow,
  AlignmentFailure,
  EmptyInput,
  // knn
  ZeroVector,
  DimensionMismatch,
  SizeMismatch,
  UnqueryableRow,
  UnknownType,
  // lexicon
  UnknownRelationTag,
  // metrics
  EmptyNeighborList,
  // treesim
  UnbalancedParens,
  EmptyTree,
  MultipleRoots,
  LeafIndexOutOfRange,
  EmptySubtree,
  // driver
  ConfigError,
  InputInconsistency,
  SpecError,
  StageFailure,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::HeaderMismatch: return "HeaderMismatch";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::RowCountMismatch: return "RowCountMismatch";
    case ErrorCode::DuplicatePosition: return "DuplicatePosition";
    case ErrorCode::MalformedRow: return "MalformedRow";
    case ErrorCode::AlignmentFailure: return "AlignmentFailure";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::SizeMismatch: return "SizeMismatch";
    case ErrorCode::UnqueryableRow: return "UnqueryableRow";
    case ErrorCode::UnknownType: return "UnknownType";
    case ErrorCode::UnknownRelationTag: return "UnknownRelationTag";
    case ErrorCode::EmptyNeighborList: return "EmptyNeighborList";
    case ErrorCode::UnbalancedParens: return "UnbalancedParens";
    case ErrorCode::EmptyTree: return "EmptyTree";
    case ErrorCode::MultipleRoots: return "MultipleRoots";
    case ErrorCode::LeafIndexOutOfRange: return "LeafIndexOutOfRange";
    case ErrorCode::EmptySubtree: return "EmptySubtree";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::InputInconsistency: return "InputInconsistency";
    case ErrorCode::SpecError: return "SpecError";
    case ErrorCode::StageFailure: return "StageFailure";
  }
  return "Unknown";
}

// Single exception type for the whole toolkit. `row`/`col` carry the
// offending location where one exists (file line, matrix cell, tree offset).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what, std::int64_t row = -1, std::int64_t col = -1)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code), row_(row), col_(col) {}

  ErrorCode code() const noexcept { return code_; }
  std::int64_t row() const noexcept { return row_; }
  std::int64_t col() const noexcept { return col_; }

 private:
  ErrorCode code_;
  std::int64_t row_;
  std::int64_t col_;
};

}  // namespace nnprobe
