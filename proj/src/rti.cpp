#include "hprm/rti.hpp"

#include "hprm/error.hpp"

#include <algorithm>
#include <stdexcept>

namespace hprm {

std::string_view to_string(CoordinationMode m) noexcept {
  return m == CoordinationMode::centralized ? "centralized" : "decentralized";
}

CoordinationMode parse_mode(std::string_view text) {
  if (text == "centralized") return CoordinationMode::centralized;
  if (text == "decentralized") return CoordinationMode::decentralized;
  throw std::invalid_argument("unknown coordination mode '" + std::string(text) + "'");
}

Rti::Rti(Topology topology, RtiOptions opts) : topo_(std::move(topology)), opts_(opts) {
  auto report = validate_topology(topo_);
  if (!report.ok()) throw std::invalid_argument("invalid topology: " + report.violations.front().message);
  records_.resize(topo_.federates.size());
  for (std::size_t i = 0; i < records_.size(); ++i) records_[i].id = topo_.federates[i];
  for (const auto& c : topo_.connections) {
    edges_.push_back(Edge{topo_.require_index(c.source), topo_.require_index(c.destination), c.delay});
  }
}

void Rti::check_index(FederateIndex f) const {
  if (f >= records_.size()) throw Error(Errc::unknown_federate, "no federate with index " + std::to_string(f));
}

const FederateRecord& Rti::record(FederateIndex f) const {
  check_index(f);
  return records_[f];
}

FederateIndex Rti::register_federate(std::string_view id, std::int64_t physical_clock) {
  auto idx = topo_.index_of(id);
  if (!idx) throw Error(Errc::unknown_federate, "federate '" + std::string(id) + "' is not in the topology");
  if (phase_ != FederationPhase::registering) {
    throw Error(Errc::invalid_state, "registration is closed; federate '" + std::string(id) + "' is too late");
  }
  auto& r = records_[*idx];
  if (r.state != FederateState::absent) {
    throw Error(Errc::duplicate_registration, "federate '" + std::string(id) + "' is already registered");
  }
  r.state = FederateState::joined;
  r.clock_at_join = physical_clock;
  return *idx;
}

bool Rti::all_registered() const noexcept {
  return std::all_of(records_.begin(), records_.end(),
                     [](const FederateRecord& r) { return r.state != FederateState::absent; });
}

Tag Rti::start() {
  if (phase_ != FederationPhase::registering) throw Error(Errc::invalid_state, "federation already started");
  if (!all_registered()) throw Error(Errc::invalid_state, "not every federate has registered");
  std::int64_t latest = records_.empty() ? 0 : records_.front().clock_at_join;
  for (const auto& r : records_) latest = std::max(latest, r.clock_at_join);
  start_tag_ = Tag{latest + opts_.startup_offset.count(), 0};
  phase_ = FederationPhase::running;
  for (auto& r : records_) {
    if (r.state == FederateState::joined) r.state = FederateState::running;
  }
  if (opts_.timeout) {
    stop_tag_ = delay_tag(start_tag_, Delay(*opts_.timeout));
    if (opts_.timeout->count() == 0) stop_tag_ = start_tag_;
    phase_ = FederationPhase::stopping;
  } else if (stop_deferred_) {
    stop_tag_ = compute_stop(deferred_proposal_);
    phase_ = FederationPhase::stopping;
  }
  return start_tag_;
}

Tag Rti::pending(FederateIndex w) const {
  const auto& r = records_[w];
  if (r.state == FederateState::resigned) return Tag::forever();
  Tag t = r.net;
  if (!r.in_transit.empty()) t = std::min(t, *r.in_transit.begin());
  return t;
}

std::vector<Tag> Rti::earliest_future_events() const {
  std::vector<Tag> efe(records_.size());
  for (FederateIndex w = 0; w < records_.size(); ++w) efe[w] = pending(w);
  // Shortest-path relaxation. Every cycle has positive delay, so at most
  // |F| rounds are needed.
  for (std::size_t round = 0; round <= records_.size(); ++round) {
    bool changed = false;
    for (const auto& e : edges_) {
      auto via = delay_tag(efe[e.from], e.delay);
      if (via < efe[e.to]) {
        efe[e.to] = via;
        changed = true;
      }
    }
    if (!changed) break;
  }
  return efe;
}

std::optional<Tag> Rti::compute_grant(FederateIndex f) const {
  check_index(f);
  const auto& r = records_[f];
  if (phase_ == FederationPhase::registering || r.state != FederateState::running) return std::nullopt;
  auto efe = earliest_future_events();
  Tag bound = Tag::forever();
  for (const auto& e : edges_) {
    if (e.to == f) bound = std::min(bound, delay_tag(efe[e.from], e.delay));
  }
  if (bound <= r.tag_grant) return std::nullopt;
  return bound;
}

std::vector<Grant> Rti::issue(const std::vector<FederateIndex>& candidates) {
  std::vector<Grant> out;
  if (opts_.mode != CoordinationMode::centralized) return out;
  for (auto f : candidates) {
    if (auto g = compute_grant(f)) {
      records_[f].tag_grant = *g;
      out.push_back(Grant{f, *g});
    }
  }
  return out;
}

std::vector<Grant> Rti::recompute_all() {
  std::vector<FederateIndex> all(records_.size());
  for (FederateIndex i = 0; i < all.size(); ++i) all[i] = i;
  return issue(all);
}

std::vector<Grant> Rti::handle_net(FederateIndex f, Tag tag) {
  check_index(f);
  auto& r = records_[f];
  if (r.state != FederateState::running) return {};
  const auto floor = pending(f);
  if (tag < floor) {
    throw Error(Errc::protocol, "next event tag of '" + r.id + "' regressed to " + to_string(tag) + " below " +
                                    to_string(floor));
  }
  r.net = tag;
  return recompute_all();
}

void Rti::pop_completed(FederateRecord& r) {
  r.in_transit.erase(r.in_transit.begin(), r.in_transit.upper_bound(r.ltc));
}

std::vector<Grant> Rti::handle_ltc(FederateIndex f, Tag tag) {
  check_index(f);
  auto& r = records_[f];
  if (r.state != FederateState::running) return {};
  if (opts_.mode == CoordinationMode::centralized && tag > r.tag_grant) {
    throw Error(Errc::protocol, "'" + r.id + "' completed " + to_string(tag) + " beyond its grant " +
                                    to_string(r.tag_grant));
  }
  if (tag < r.ltc) {
    throw Error(Errc::protocol, "completed tag of '" + r.id + "' regressed to " + to_string(tag));
  }
  r.ltc = tag;
  pop_completed(r);
  return recompute_all();
}

bool Rti::handle_forward(FederateIndex destination, Tag tag) {
  check_index(destination);
  auto& r = records_[destination];
  if (r.state == FederateState::resigned) return true;
  r.in_transit.insert(tag);
  if (opts_.mode == CoordinationMode::centralized && tag < r.tag_grant) {
    ++safety_violations_;
    return false;
  }
  return true;
}

std::vector<Grant> Rti::handle_resign(FederateIndex f) {
  check_index(f);
  auto& r = records_[f];
  r.state = FederateState::resigned;
  r.in_transit.clear();
  return recompute_all();
}

bool Rti::all_resigned() const noexcept {
  if (phase_ == FederationPhase::registering) return false;
  return std::all_of(records_.begin(), records_.end(),
                     [](const FederateRecord& r) { return r.state == FederateState::resigned; });
}

Tag Rti::compute_stop(std::optional<Tag> proposal) const {
  Tag latest = start_tag_;
  auto take = [&](Tag t) {
    if (t.is_finite()) latest = std::max(latest, t);
  };
  for (const auto& r : records_) {
    take(r.net);
    take(r.ltc);
    if (!r.in_transit.empty()) take(*r.in_transit.rbegin());
  }
  if (proposal) take(*proposal);
  return next_microstep(latest);
}

std::optional<Tag> Rti::initiate_shutdown(std::optional<Tag> proposal) {
  switch (phase_) {
    case FederationPhase::registering:
      stop_deferred_ = true;
      if (proposal && (!deferred_proposal_ || *proposal > *deferred_proposal_)) deferred_proposal_ = proposal;
      return std::nullopt;
    case FederationPhase::stopping:
      return std::nullopt;
    case FederationPhase::running:
      break;
  }
  stop_tag_ = compute_stop(proposal);
  phase_ = FederationPhase::stopping;
  return stop_tag_;
}

}  // namespace hprm
