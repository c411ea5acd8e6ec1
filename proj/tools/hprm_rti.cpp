// hprm-rti: the coordination daemon. Serves one federation described by a
// topology file and exits once every federate has resigned.

#include "hprm/error.hpp"
#include "hprm/log.hpp"
#include "hprm/rti_server.hpp"
#include "signals.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"Coordination daemon for an hprm federation"};
  std::string listen;
  std::string config;
  std::string address_file;
  std::string mode = "centralized";
  std::size_t federates = 0;
  long long startup_offset_ms = 100;
  long long timeout_ns = -1;
  app.add_option("--listen", listen, "host:port to listen on (default $HPRM_RTI_ADDR or 127.0.0.1:15045)");
  app.add_option("--config", config, "Topology JSON file")->required()->check(CLI::ExistingFile);
  app.add_option("--federates", federates, "Expected federate count; must match the topology");
  app.add_option("--startup-offset-ms", startup_offset_ms, "Start tag offset past the last join")
      ->check(CLI::NonNegativeNumber);
  app.add_option("--mode", mode, "centralized or decentralized")->check(CLI::IsMember({"centralized", "decentralized"}));
  app.add_option("--timeout-ns", timeout_ns, "Stop the federation this long after the start tag");
  app.add_option("--address-file", address_file, "Write the bound host:port here once listening");
  CLI11_PARSE(app, argc, argv);

  hprm::log::init_from_env();
  try {
    if (listen.empty()) {
      const char* env = std::getenv("HPRM_RTI_ADDR");
      listen = env && *env ? env : "127.0.0.1:15045";
    }
    hprm::RtiServerOptions opts;
    opts.listen = hprm::Endpoint::parse(listen);
    opts.topology = hprm::load_topology(config);
    if (federates != 0 && federates != opts.topology.federates.size()) {
      std::cerr << "hprm-rti: --federates " << federates << " does not match the topology's "
                << opts.topology.federates.size() << " federates\n";
      return 2;
    }
    opts.rti.mode = hprm::parse_mode(mode);
    opts.rti.startup_offset = std::chrono::milliseconds(startup_offset_ms);
    if (timeout_ns >= 0) opts.rti.timeout = hprm::Nanos{timeout_ns};

    hprm::RtiServer server(std::move(opts));
    hprm::tools::watch_termination([&server] { server.stop(); });
    const auto ep = server.endpoint().to_string();
    if (!address_file.empty()) {
      const auto tmp = address_file + ".tmp";
      std::ofstream(tmp) << ep << '\n';
      std::rename(tmp.c_str(), address_file.c_str());
    }
    hprm::log::info("rti: listening on ", ep, " (", mode, ")");
    server.run();
    const auto s = server.summary();
    hprm::log::info("rti: done; grants ", s.grants_sent, ", forwarded ", s.messages_forwarded, ", protocol errors ",
                    s.protocol_errors, ", safety violations ", s.safety_violations);
    return s.safety_violations == 0 ? 0 : 3;
  } catch (const std::exception& e) {
    std::cerr << "hprm-rti: " << e.what() << "\n";
    return 1;
  }
}
