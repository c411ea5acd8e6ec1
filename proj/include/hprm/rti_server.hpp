#pragma once

#include "hprm/rti.hpp"
#include "hprm/transport.hpp"

#include <memory>

namespace hprm {

struct RtiServerOptions {
  Endpoint listen{"127.0.0.1", 0};
  Topology topology;
  RtiOptions rti;
  ConnectionOptions transport;
};

struct RtiSummary {
  std::uint64_t grants_sent = 0;
  std::uint64_t messages_forwarded = 0;
  std::uint64_t protocol_errors = 0;
  std::uint64_t safety_violations = 0;
};

/// The RTI daemon. One connection handler thread per federate parses frames;
/// all state changes and the sends they trigger are serialized on one lock,
/// so no grant is computed against a half-applied update.
///
/// In centralized mode tagged messages travel through the RTI: it records
/// each as in transit toward its destination and forwards it on the same
/// ordered stream as that federate's grants.
class RtiServer {
 public:
  explicit RtiServer(RtiServerOptions opts);
  ~RtiServer();
  RtiServer(const RtiServer&) = delete;
  RtiServer& operator=(const RtiServer&) = delete;

  /// Bound address (useful with port 0).
  [[nodiscard]] Endpoint endpoint() const;

  /// Serves until every federate has resigned or stop() is called.
  void run();
  /// Thread-safe.
  void stop() noexcept;
  /// Asks the federation to stop as if a federate had requested it.
  void request_shutdown();

  [[nodiscard]] RtiSummary summary() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace hprm
