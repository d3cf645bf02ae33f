#include "flowsolve/config.hpp"

#include <yaml-cpp/yaml.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "flowsolve/errors.hpp"

namespace flowsolve {

namespace {

template <typename T>
void read_into(const YAML::Node& node, const char* key, T& target) {
  if (YAML::Node value = node[key]) {
    try {
      target = value.as<T>();
    } catch (const YAML::Exception&) {
      throw ConfigError(std::string("config key '") + key + "' has the wrong type");
    }
  }
}

void read_flow(const YAML::Node& node, FlowConfig& flow) {
  read_into(node, "max_initial_attempts", flow.max_initial_attempts);
  read_into(node, "max_fix_attempts_per_test", flow.max_fix_attempts_per_test);
  read_into(node, "ai_test_min", flow.ai_test_min);
  read_into(node, "ai_test_max", flow.ai_test_max);
  read_into(node, "merge_stages", flow.merge_stages);
  read_into(node, "call_budget", flow.call_budget);
  read_into(node, "epsilon", flow.epsilon);
  read_into(node, "prompt_dir", flow.prompt_dir);
  if (YAML::Node limits = node["limits"]) {
    double wall_time_s = flow.limits.wall_time.count();
    read_into(limits, "wall_time_s", wall_time_s);
    flow.limits.wall_time = std::chrono::duration<double>(wall_time_s);
    std::uint64_t memory_mb = flow.limits.memory >> 20;
    read_into(limits, "memory_mb", memory_mb);
    flow.limits.memory = memory_mb << 20;
    std::uint64_t max_output_kb = flow.limits.max_output >> 10;
    read_into(limits, "max_output_kb", max_output_kb);
    flow.limits.max_output = max_output_kb << 10;
  }
  if (flow.max_initial_attempts <= 0 || flow.max_fix_attempts_per_test <= 0 ||
      flow.call_budget <= 0) {
    throw ConfigError("flow attempt counts and call_budget must be positive");
  }
  if (flow.ai_test_min <= 0 || flow.ai_test_min > flow.ai_test_max) {
    throw ConfigError("ai_test_min must be positive and at most ai_test_max");
  }
}

void read_gateway(const YAML::Node& node, GatewayConfig& gateway, HttpBackendConfig& http) {
  read_into(node, "base_url", http.base_url);
  read_into(node, "chat_path", http.chat_path);
  read_into(node, "model", http.model);
  read_into(node, "transport_retries", gateway.transport_retries);
  read_into(node, "parse_retries", gateway.parse_retries);
  read_into(node, "max_in_flight", gateway.max_in_flight);
  read_into(node, "default_temperature", gateway.default_temperature);
  long backoff_ms = gateway.backoff_base.count();
  read_into(node, "backoff_ms", backoff_ms);
  gateway.backoff_base = std::chrono::milliseconds(backoff_ms);
  if (YAML::Node temps = node["temperatures"]) {
    for (const auto& item : temps) {
      gateway.stage_temperatures[item.first.as<std::string>()] = item.second.as<double>();
    }
  }
}

void read_sandbox(const YAML::Node& node, SandboxConfig& sandbox) {
  std::string scratch_root;
  read_into(node, "scratch_root", scratch_root);
  if (!scratch_root.empty()) sandbox.scratch_root = scratch_root;
  read_into(node, "max_concurrent", sandbox.max_concurrent);
  if (YAML::Node runners = node["runners"]) {
    for (const auto& item : runners) {
      RunnerSpec spec;
      const YAML::Node& body = item.second;
      if (YAML::Node run = body["run"]) spec.run = run.as<std::vector<std::string>>();
      if (YAML::Node compile = body["compile"]) {
        spec.compile = compile.as<std::vector<std::string>>();
      }
      read_into(body, "source_file", spec.source_file);
      if (spec.run.empty()) throw ConfigError("runner needs a non-empty 'run' command");
      sandbox.runners[item.first.as<std::string>()] = std::move(spec);
    }
  }
}

}  // namespace

EngineConfig default_engine_config() { return EngineConfig{}; }

EngineConfig load_engine_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file: " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();

  EngineConfig config;
  config.config_text = buffer.str();
  YAML::Node doc;
  try {
    doc = YAML::Load(config.config_text);
  } catch (const YAML::Exception& ex) {
    throw ConfigError("config " + path.string() + ": " + ex.what());
  }
  if (doc.IsNull()) return config;
  if (!doc.IsMap()) throw ConfigError("config file must be a YAML mapping");

  if (YAML::Node flow = doc["flow"]) read_flow(flow, config.flow);
  if (YAML::Node gateway = doc["gateway"]) read_gateway(gateway, config.gateway, config.http);
  if (YAML::Node sandbox = doc["sandbox"]) read_sandbox(sandbox, config.sandbox);
  return config;
}

void apply_env_overrides(EngineConfig& config) {
  if (const char* key = std::getenv("FLOWSOLVE_API_KEY")) config.http.api_key = key;
  if (const char* url = std::getenv("FLOWSOLVE_BASE_URL")) config.http.base_url = url;
  if (const char* model = std::getenv("FLOWSOLVE_MODEL")) config.http.model = model;
}

}  // namespace flowsolve
