#pragma once

#include <filesystem>
#include <string>

#include "flowsolve/flow.hpp"
#include "flowsolve/gateway.hpp"
#include "flowsolve/sandbox.hpp"

namespace flowsolve {

// Everything a run needs, assembled from (highest precedence first) command
// line flags, environment variables, and the config file. Secrets only ever
// come from the environment.
struct EngineConfig {
  FlowConfig flow;
  GatewayConfig gateway;
  HttpBackendConfig http;
  SandboxConfig sandbox = default_sandbox_config();
  std::string config_text;  // verbatim file contents for report snapshots
};

// Parses the YAML config file (sections: flow, gateway, sandbox). Throws
// ConfigError on unreadable files or bad values.
EngineConfig load_engine_config(const std::filesystem::path& path);

EngineConfig default_engine_config();

// Environment overrides: FLOWSOLVE_API_KEY, FLOWSOLVE_BASE_URL,
// FLOWSOLVE_MODEL.
void apply_env_overrides(EngineConfig& config);

}  // namespace flowsolve
