#include "hprm/tag.hpp"

#include "hprm/error.hpp"

#include <ostream>
#include <stdexcept>

namespace hprm {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::protocol: return "protocol";
    case Errc::unknown_federate: return "unknown-federate";
    case Errc::duplicate_registration: return "duplicate-registration";
    case Errc::ordering_fault: return "ordering-fault";
    case Errc::invalid_state: return "invalid-state";
    case Errc::duplicate_id: return "duplicate-id";
    case Errc::unknown_id: return "unknown-id";
    case Errc::already_sealed: return "already-sealed";
    case Errc::not_sealed: return "not-sealed";
    case Errc::no_reference: return "no-reference";
    case Errc::capacity_exceeded: return "capacity-exceeded";
    case Errc::store_full: return "store-full";
    case Errc::timeout: return "timeout";
    case Errc::oversize: return "oversize";
    case Errc::closed: return "closed";
    case Errc::refused: return "refused";
    case Errc::truncated: return "truncated";
    case Errc::segment_mismatch: return "segment-mismatch";
    case Errc::unknown_schema: return "unknown-schema";
    case Errc::unsupported_type: return "unsupported-type";
    case Errc::malformed: return "malformed";
    case Errc::precondition: return "precondition";
    case Errc::io: return "io";
    case Errc::reaction_failed: return "reaction-failed";
  }
  return "unknown";
}

Delay::Delay(Nanos value) : none_(false), nanos_(value.count()) {
  if (nanos_ < 0) {
    throw std::invalid_argument("connection delay must be non-negative");
  }
}

Ordering compare_tags(const Tag& a, const Tag& b) noexcept {
  if (a < b) return Ordering::less;
  if (b < a) return Ordering::greater;
  return Ordering::equal;
}

Tag next_microstep(const Tag& g) noexcept {
  if (!g.is_finite()) return g;
  if (g.microstep() == Tag::kMaxMicrostep) {
    if (g.time() + 1 == Tag::kMaxTime) return Tag::forever();
    return Tag{g.time() + 1, 0};
  }
  return Tag{g.time(), g.microstep() + 1};
}

Tag delay_tag(const Tag& g, const Delay& a) noexcept {
  if (!g.is_finite()) return g;
  if (a.is_zero()) {
    if (g.microstep() == Tag::kMaxMicrostep) return Tag::forever();
    return Tag{g.time(), g.microstep() + 1};
  }
  const auto d = a.value().count();
  if (g.time() >= Tag::kMaxTime - d) return Tag::forever();
  return Tag{g.time() + d, 0};
}

std::string to_string(const Tag& tag) {
  if (tag.is_never()) return "NEVER";
  if (tag.is_forever()) return "FOREVER";
  return "(" + std::to_string(tag.time()) + ", " + std::to_string(tag.microstep()) + ")";
}

std::ostream& operator<<(std::ostream& os, const Tag& tag) { return os << to_string(tag); }

}  // namespace hprm
