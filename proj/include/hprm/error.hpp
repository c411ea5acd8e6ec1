#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hprm {

enum class Errc {
  protocol,
  unknown_federate,
  duplicate_registration,
  ordering_fault,
  invalid_state,
  // object store
  duplicate_id,
  unknown_id,
  already_sealed,
  not_sealed,
  no_reference,
  capacity_exceeded,
  store_full,
  timeout,
  // transport
  oversize,
  closed,
  refused,
  // serde
  truncated,
  segment_mismatch,
  unknown_schema,
  unsupported_type,
  malformed,
  // general
  precondition,
  io,
  reaction_failed,
};

std::string_view to_string(Errc code) noexcept;

/// Every failure raised by the library carries one of the codes above so
/// callers can branch on the kind of failure without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}

  [[nodiscard]] Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace hprm
