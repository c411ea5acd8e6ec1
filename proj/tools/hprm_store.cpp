// hprm-store: the shared-memory object store daemon.

#include "hprm/log.hpp"
#include "hprm/store_protocol.hpp"
#include "hprm/store_server.hpp"
#include "signals.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"Shared-memory object store daemon"};
  hprm::StoreServerOptions opts;
  opts.socket_path = hprm::store_wire::default_socket_path();
  app.add_option("--socket", opts.socket_path, "Local socket path (default $HPRM_STORE_PATH)");
  app.add_option("--capacity-bytes", opts.store.capacity_bytes, "Arena capacity")->check(CLI::PositiveNumber);
  app.add_option("--eviction-fraction", opts.store.eviction_fraction, "Fraction of capacity freed per eviction pass")
      ->check(CLI::Range(0.0, 1.0));
  app.add_option("--shm-name", opts.shm_name, "Name of the shared-memory arena");
  app.add_flag("--prefault", opts.prefault, "Touch every arena page at startup");
  CLI11_PARSE(app, argc, argv);

  hprm::log::init_from_env();
  try {
    hprm::StoreServer server(opts);
    hprm::tools::watch_termination([&server] { server.stop(); });
    hprm::log::info("store: serving ", server.socket_path(), " with ", opts.store.capacity_bytes, " bytes in ",
                    server.shm_name());
    server.run();
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "hprm-store: " << e.what() << "\n";
    return 1;
  }
}
