#pragma once

#include "hprm/tag.hpp"

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace hprm {

using FederateIndex = std::uint32_t;

struct Link {
  std::string source;
  std::string source_port;
  std::string destination;
  std::string destination_port;
  Delay delay = Delay::none();
};

/// Federation graph: federate ids plus port-to-port connections. The index of
/// a connection in `connections` is its wire-level port id.
struct Topology {
  std::vector<std::string> federates;
  std::vector<Link> connections;

  [[nodiscard]] std::optional<FederateIndex> index_of(std::string_view id) const;
  [[nodiscard]] FederateIndex require_index(std::string_view id) const;

  /// Connection indices whose destination / source is `id`.
  [[nodiscard]] std::vector<std::size_t> inbound(std::string_view id) const;
  [[nodiscard]] std::vector<std::size_t> outbound(std::string_view id) const;
  [[nodiscard]] std::vector<std::size_t> outbound(std::string_view id, std::string_view port) const;
};

struct TimingModel {
  Nanos clock_error_bound{0};  // E
  Nanos latency_bound{0};      // L

  /// Throws std::invalid_argument when either bound is negative.
  void validate() const;
};

struct TopologyViolation {
  enum class Kind { dangling_endpoint, zero_delay_cycle };
  Kind kind;
  std::string message;
  std::vector<std::string> federates;
};

struct ValidationReport {
  std::vector<TopologyViolation> violations;

  [[nodiscard]] bool ok() const noexcept { return violations.empty(); }
};

/// Reports dangling endpoints and cycles whose every edge has zero delay.
/// Violations are data; this never throws.
ValidationReport validate_topology(const Topology& topology);

/// JSON form:
///   {"federates": ["s", "p"],
///    "connections": [{"from": "s.out", "to": "p.in", "after_ns": 200000000}]}
/// A missing "after_ns" means a zero-delay connection.
/// Throws std::invalid_argument on malformed input.
Topology topology_from_json(std::string_view text);
std::string topology_to_json(const Topology& topology);
Topology load_topology(const std::string& path);
void save_topology(const Topology& topology, const std::string& path);

}  // namespace hprm
