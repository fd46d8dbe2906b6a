#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>

#include "ctedd/mlp.hpp"
#include "ctedd/policy_networks.hpp"

namespace ctedd {

// Bad user-supplied input: missing files, mismatched artifacts, bad flags.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class NetKind { kGlobalPolicy, kCentralQ, kLocalPolicy };

const char* net_kind_name(NetKind kind);
NetKind parse_net_kind(const std::string& name);

// JSON sidecar describing a `.net` file: what network it holds and for
// which environment.
struct Manifest {
  NetKind kind = NetKind::kGlobalPolicy;
  std::string variant;  // CTEDD-G, CTEDD-L-1, MADDPG-3, ...
  std::string env_id;
  std::size_t num_agents = 0;
  std::size_t state_dim = 0;
  std::size_t obs_dim = 0;
  std::size_t action_dim = 2;
  std::size_t msg_dim = 0;
  std::size_t hidden = kHiddenUnits;
  std::uint64_t seed = 0;
  std::uint64_t env_steps = 0;
  std::size_t parameter_count = 0;
  LayerStack layers;
};

std::filesystem::path manifest_path_for(const std::filesystem::path& net_path);

std::string manifest_to_json(const Manifest& m);
Manifest manifest_from_json(const std::string& text);
void save_manifest(const std::filesystem::path& path, const Manifest& m);
Manifest load_manifest(const std::filesystem::path& path);

// Writes to "<path>.tmp" then renames over path; the temporary is removed
// if writing fails.
void write_file_atomic(const std::filesystem::path& path, const std::function<void(std::ostream&)>& writer);

Manifest make_manifest(const GlobalPolicyNet& net, const std::string& env_id);
Manifest make_manifest(const CentralQNet& net, const std::string& env_id, std::size_t num_agents);
Manifest make_manifest(const LocalCommPolicyNet& net, const std::string& env_id, const std::string& variant);

// Saves the `.net` file and its manifest beside it.
void save_network(const std::filesystem::path& net_path, const ParamStore& params, const Manifest& manifest);

GlobalPolicyNet load_global_policy(const std::filesystem::path& net_path, Manifest* manifest_out = nullptr);
CentralQNet load_central_q(const std::filesystem::path& net_path, Manifest* manifest_out = nullptr);
LocalCommPolicyNet load_local_policy(const std::filesystem::path& net_path, Manifest* manifest_out = nullptr);

using LoadedPolicy = std::variant<GlobalPolicyNet, LocalCommPolicyNet>;
// Dispatches on the manifest kind; critics are rejected.
LoadedPolicy load_policy(const std::filesystem::path& net_path, Manifest* manifest_out = nullptr);

}  // namespace ctedd
