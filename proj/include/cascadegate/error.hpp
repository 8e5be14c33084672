#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cascadegate {

enum class ErrorCode {
  schema,
  range,
  empty_distribution,
  empty_dataset,
  cost_ordering,
  budget_range,
  empty_sample,
  empty_committee,
  missing_signal,
  insufficient_data,
  parse,
  io,
  grid,
  curve,
  parameter,
  config,
  upstream_unavailable,
  upstream_capability,
};

std::string_view to_string(ErrorCode code);

// Single exception type for every engine failure; `code()` says which
// contract was broken so callers (CLI, gateway) can map it to an exit code
// or HTTP status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace cascadegate
