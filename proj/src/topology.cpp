#include "hprm/topology.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

namespace hprm {

std::optional<FederateIndex> Topology::index_of(std::string_view id) const {
  auto it = std::find(federates.begin(), federates.end(), id);
  if (it == federates.end()) return std::nullopt;
  return static_cast<FederateIndex>(it - federates.begin());
}

FederateIndex Topology::require_index(std::string_view id) const {
  if (auto idx = index_of(id)) return *idx;
  throw std::invalid_argument("unknown federate '" + std::string(id) + "'");
}

std::vector<std::size_t> Topology::inbound(std::string_view id) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < connections.size(); ++i) {
    if (connections[i].destination == id) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> Topology::outbound(std::string_view id) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < connections.size(); ++i) {
    if (connections[i].source == id) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> Topology::outbound(std::string_view id, std::string_view port) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < connections.size(); ++i) {
    if (connections[i].source == id && connections[i].source_port == port) out.push_back(i);
  }
  return out;
}

void TimingModel::validate() const {
  if (clock_error_bound.count() < 0 || latency_bound.count() < 0) {
    throw std::invalid_argument("timing bounds must be non-negative");
  }
}

namespace {

// Tarjan's strongly connected components over the zero-delay subgraph.
std::vector<std::vector<std::size_t>> zero_delay_cycles(const Topology& t) {
  const std::size_t n = t.federates.size();
  std::vector<std::vector<std::size_t>> adj(n);
  std::vector<bool> self_loop(n, false);
  for (const auto& c : t.connections) {
    if (!c.delay.is_zero()) continue;
    auto s = t.index_of(c.source);
    auto d = t.index_of(c.destination);
    if (!s || !d) continue;
    adj[*s].push_back(*d);
    if (*s == *d) self_loop[*s] = true;
  }

  std::vector<int> index(n, -1), low(n, 0);
  std::vector<bool> on_stack(n, false);
  std::vector<std::size_t> stack;
  std::vector<std::vector<std::size_t>> cycles;
  int counter = 0;

  std::function<void(std::size_t)> visit = [&](std::size_t v) {
    index[v] = low[v] = counter++;
    stack.push_back(v);
    on_stack[v] = true;
    for (auto w : adj[v]) {
      if (index[w] < 0) {
        visit(w);
        low[v] = std::min(low[v], low[w]);
      } else if (on_stack[w]) {
        low[v] = std::min(low[v], index[w]);
      }
    }
    if (low[v] == index[v]) {
      std::vector<std::size_t> component;
      std::size_t w;
      do {
        w = stack.back();
        stack.pop_back();
        on_stack[w] = false;
        component.push_back(w);
      } while (w != v);
      if (component.size() > 1 || self_loop[v]) {
        std::sort(component.begin(), component.end());
        cycles.push_back(std::move(component));
      }
    }
  };

  for (std::size_t v = 0; v < n; ++v) {
    if (index[v] < 0) visit(v);
  }
  return cycles;
}

std::pair<std::string, std::string> split_endpoint(const std::string& text) {
  auto dot = text.find('.');
  if (dot == std::string::npos || dot == 0 || dot + 1 == text.size()) {
    throw std::invalid_argument("endpoint '" + text + "' must be 'federate.port'");
  }
  return {text.substr(0, dot), text.substr(dot + 1)};
}

}  // namespace

ValidationReport validate_topology(const Topology& topology) {
  ValidationReport report;
  for (const auto& c : topology.connections) {
    for (const auto* end : {&c.source, &c.destination}) {
      if (!topology.index_of(*end)) {
        report.violations.push_back({TopologyViolation::Kind::dangling_endpoint,
                                     "connection " + c.source + "." + c.source_port + " -> " +
                                         c.destination + "." + c.destination_port +
                                         " names unregistered federate '" + *end + "'",
                                     {*end}});
      }
    }
  }
  for (const auto& cycle : zero_delay_cycles(topology)) {
    TopologyViolation v{TopologyViolation::Kind::zero_delay_cycle, "zero-delay cycle through", {}};
    for (auto idx : cycle) {
      v.federates.push_back(topology.federates[idx]);
      v.message += " " + topology.federates[idx];
    }
    report.violations.push_back(std::move(v));
  }
  return report;
}

Topology topology_from_json(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("topology: ") + e.what());
  }
  Topology t;
  try {
    for (const auto& f : doc.at("federates")) t.federates.push_back(f.get<std::string>());
    if (doc.contains("connections")) {
      for (const auto& c : doc.at("connections")) {
        auto [src, src_port] = split_endpoint(c.at("from").get<std::string>());
        auto [dst, dst_port] = split_endpoint(c.at("to").get<std::string>());
        Delay delay = Delay::none();
        if (c.contains("after_ns")) delay = Delay(Nanos{c.at("after_ns").get<std::int64_t>()});
        t.connections.push_back({src, src_port, dst, dst_port, delay});
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("topology: ") + e.what());
  }
  return t;
}

std::string topology_to_json(const Topology& topology) {
  nlohmann::json doc;
  doc["federates"] = topology.federates;
  doc["connections"] = nlohmann::json::array();
  for (const auto& c : topology.connections) {
    nlohmann::json jc{{"from", c.source + "." + c.source_port},
                      {"to", c.destination + "." + c.destination_port}};
    if (!c.delay.is_none()) jc["after_ns"] = c.delay.value().count();
    doc["connections"].push_back(std::move(jc));
  }
  return doc.dump(2);
}

Topology load_topology(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open topology file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return topology_from_json(ss.str());
}

void save_topology(const Topology& topology, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot write topology file '" + path + "'");
  out << topology_to_json(topology) << '\n';
}

}  // namespace hprm
