#include "hprm/scheduler.hpp"

#include "hprm/error.hpp"

#include <limits>

namespace hprm {

namespace {

std::int64_t saturating_add(std::int64_t a, std::int64_t b) noexcept {
  std::int64_t out;
  if (__builtin_add_overflow(a, b, &out)) {
    return b > 0 ? std::numeric_limits<std::int64_t>::max() : std::numeric_limits<std::int64_t>::min();
  }
  return out;
}

}  // namespace

Scheduler::Scheduler(CoordinationMode mode, Nanos stp_offset) : mode_(mode), stp_(stp_offset) {}

Admission Scheduler::push(Event e) {
  if (e.tag <= current_) {
    return mode_ == CoordinationMode::centralized ? Admission::fault : Admission::late;
  }
  queue_.emplace(e.tag, std::move(e));
  return Admission::queued;
}

Tag Scheduler::head() const noexcept { return queue_.empty() ? Tag::forever() : queue_.begin()->first; }

std::vector<Event> Scheduler::take(Tag g) {
  if (g != head()) throw Error(Errc::precondition, "only the head tag " + to_string(head()) + " may execute");
  std::vector<Event> out;
  auto range = queue_.equal_range(g);
  for (auto it = range.first; it != range.second; ++it) out.push_back(std::move(it->second));
  queue_.erase(range.first, range.second);
  current_ = g;
  return out;
}

void Scheduler::complete(Tag g) {
  if (g <= completed_) {
    throw Error(Errc::ordering_fault, "tag " + to_string(g) + " completed after " + to_string(completed_));
  }
  completed_ = g;
  current_ = g;
}

void Scheduler::set_grant(Tag g) noexcept {
  if (g > grant_) grant_ = g;
}

std::int64_t Scheduler::release_time(Tag g) const noexcept {
  if (mode_ == CoordinationMode::centralized) return g.time();
  return saturating_add(g.time(), stp_.count());
}

bool Scheduler::may_execute(Tag g, std::int64_t now) const noexcept {
  if (!g.is_finite()) return false;
  if (mode_ == CoordinationMode::centralized && !(grant_ > g)) return false;
  return now >= release_time(g);
}

bool Scheduler::may_halt(Tag stop, std::int64_t now) const noexcept {
  if (head() <= stop) return false;
  if (mode_ == CoordinationMode::centralized) return grant_ > stop;
  return now >= release_time(stop);
}

std::optional<Tag> Scheduler::net_update() {
  auto h = head();
  if (last_net_ && *last_net_ == h) return std::nullopt;
  last_net_ = h;
  return h;
}

}  // namespace hprm
