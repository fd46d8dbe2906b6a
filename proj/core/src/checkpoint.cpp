#include "ctedd/checkpoint.hpp"

#include <fstream>
#include <sstream>
#include <system_error>

#include "json.hpp"

namespace ctedd {

namespace {

using nlohmann::json;

constexpr int kManifestFormat = 1;

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void require_file(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) throw InputError("no such file: " + path.string());
}

void check_params(const Manifest& m, const ParamStore& params, const std::filesystem::path& path) {
  if (m.parameter_count != params.parameter_count()) {
    throw InputError(path.string() + ": parameter count " + std::to_string(params.parameter_count()) +
                     " does not match manifest " + std::to_string(m.parameter_count));
  }
}

}  // namespace

const char* net_kind_name(NetKind kind) {
  switch (kind) {
    case NetKind::kGlobalPolicy: return "global_policy";
    case NetKind::kCentralQ: return "central_q";
    case NetKind::kLocalPolicy: return "local_policy";
  }
  return "?";
}

NetKind parse_net_kind(const std::string& name) {
  if (name == "global_policy") return NetKind::kGlobalPolicy;
  if (name == "central_q") return NetKind::kCentralQ;
  if (name == "local_policy") return NetKind::kLocalPolicy;
  throw FormatError("unknown network kind '" + name + "'");
}

std::filesystem::path manifest_path_for(const std::filesystem::path& net_path) {
  auto p = net_path;
  p.replace_extension(".json");
  return p;
}

std::string manifest_to_json(const Manifest& m) {
  json layers = json::array();
  for (const auto& l : m.layers) layers.push_back({{"name", l.name}, {"activation", activation_name(l.activation)}});
  const json j = {
      {"format", kManifestFormat},
      {"kind", net_kind_name(m.kind)},
      {"variant", m.variant},
      {"env_id", m.env_id},
      {"num_agents", m.num_agents},
      {"state_dim", m.state_dim},
      {"obs_dim", m.obs_dim},
      {"action_dim", m.action_dim},
      {"msg_dim", m.msg_dim},
      {"hidden", m.hidden},
      {"seed", m.seed},
      {"env_steps", m.env_steps},
      {"parameter_count", m.parameter_count},
      {"layers", layers},
  };
  return j.dump(2) + "\n";
}

Manifest manifest_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    if (j.at("format").get<int>() != kManifestFormat) throw FormatError("unsupported manifest format");
    Manifest m;
    m.kind = parse_net_kind(j.at("kind").get<std::string>());
    m.variant = j.at("variant").get<std::string>();
    m.env_id = j.at("env_id").get<std::string>();
    m.num_agents = j.at("num_agents").get<std::size_t>();
    m.state_dim = j.at("state_dim").get<std::size_t>();
    m.obs_dim = j.at("obs_dim").get<std::size_t>();
    m.action_dim = j.at("action_dim").get<std::size_t>();
    m.msg_dim = j.at("msg_dim").get<std::size_t>();
    m.hidden = j.at("hidden").get<std::size_t>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.env_steps = j.at("env_steps").get<std::uint64_t>();
    m.parameter_count = j.at("parameter_count").get<std::size_t>();
    for (const auto& l : j.at("layers")) {
      m.layers.push_back({l.at("name").get<std::string>(), parse_activation(l.at("activation").get<std::string>())});
    }
    return m;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed manifest: ") + e.what());
  }
}

void write_file_atomic(const std::filesystem::path& path, const std::function<void(std::ostream&)>& writer) {
  auto tmp = path;
  tmp += ".tmp";
  try {
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
      writer(out);
      out.flush();
      if (!out) throw std::runtime_error("failed writing " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
  } catch (...) {
    std::error_code ec;
    std::filesystem::remove(tmp, ec);
    throw;
  }
}

void save_manifest(const std::filesystem::path& path, const Manifest& m) {
  const std::string text = manifest_to_json(m);
  write_file_atomic(path, [&](std::ostream& out) { out << text; });
}

Manifest load_manifest(const std::filesystem::path& path) {
  require_file(path);
  return manifest_from_json(read_text(path));
}

Manifest make_manifest(const GlobalPolicyNet& net, const std::string& env_id) {
  Manifest m;
  m.kind = NetKind::kGlobalPolicy;
  m.variant = "CTEDD-G";
  m.env_id = env_id;
  m.num_agents = net.dims().num_agents;
  m.state_dim = net.dims().state_dim;
  m.action_dim = net.dims().action_dim;
  m.hidden = net.dims().hidden;
  m.parameter_count = net.theta().parameter_count() + net.omega().parameter_count();
  m.layers = net.trunk_layers();
  for (std::size_t i = 0; i < m.num_agents; ++i) {
    for (auto& l : net.mean_head_layers(i)) m.layers.push_back(l);
    for (auto& l : net.std_head_layers(i)) m.layers.push_back(l);
  }
  return m;
}

Manifest make_manifest(const CentralQNet& net, const std::string& env_id, std::size_t num_agents) {
  Manifest m;
  m.kind = NetKind::kCentralQ;
  m.variant = "critic";
  m.env_id = env_id;
  m.num_agents = num_agents;
  m.state_dim = net.dims().state_dim;
  m.action_dim = num_agents == 0 ? 0 : net.dims().joint_action_dim / num_agents;
  m.hidden = net.dims().hidden;
  m.parameter_count = net.params().parameter_count();
  m.layers = net.layers();
  return m;
}

Manifest make_manifest(const LocalCommPolicyNet& net, const std::string& env_id, const std::string& variant) {
  Manifest m;
  m.kind = NetKind::kLocalPolicy;
  m.variant = variant;
  m.env_id = env_id;
  m.num_agents = net.dims().num_agents;
  m.obs_dim = net.dims().obs_dim;
  m.action_dim = net.dims().action_dim;
  m.msg_dim = net.dims().msg_dim;
  m.hidden = net.dims().hidden;
  m.parameter_count = net.params().parameter_count();
  for (std::size_t i = 0; i < m.num_agents; ++i) {
    if (m.msg_dim > 0) {
      for (auto& l : net.message_layers(i)) m.layers.push_back(l);
    }
    for (auto& l : net.action_layers(i)) m.layers.push_back(l);
  }
  return m;
}

void save_network(const std::filesystem::path& net_path, const ParamStore& params, const Manifest& manifest) {
  write_file_atomic(net_path, [&](std::ostream& out) { write_params(out, params); });
  save_manifest(manifest_path_for(net_path), manifest);
}

namespace {

struct Loaded {
  Manifest manifest;
  ParamStore params;
};

Loaded load_with_manifest(const std::filesystem::path& net_path, NetKind expected) {
  require_file(net_path);
  Loaded l{load_manifest(manifest_path_for(net_path)), load_params(net_path)};
  if (l.manifest.kind != expected) {
    throw InputError(net_path.string() + ": expected a " + net_kind_name(expected) + " network, manifest says " +
                     net_kind_name(l.manifest.kind));
  }
  check_params(l.manifest, l.params, net_path);
  return l;
}

GlobalPolicyNet global_from(const Loaded& l) {
  return GlobalPolicyNet::from_merged({l.manifest.state_dim, l.manifest.num_agents, l.manifest.action_dim,
                                       l.manifest.hidden},
                                      l.params);
}

LocalCommPolicyNet local_from(Loaded l) {
  return LocalCommPolicyNet({l.manifest.num_agents, l.manifest.obs_dim, l.manifest.msg_dim, l.manifest.action_dim,
                             l.manifest.hidden},
                            std::move(l.params));
}

}  // namespace

GlobalPolicyNet load_global_policy(const std::filesystem::path& net_path, Manifest* manifest_out) {
  Loaded l = load_with_manifest(net_path, NetKind::kGlobalPolicy);
  if (manifest_out) *manifest_out = l.manifest;
  return global_from(l);
}

CentralQNet load_central_q(const std::filesystem::path& net_path, Manifest* manifest_out) {
  Loaded l = load_with_manifest(net_path, NetKind::kCentralQ);
  if (manifest_out) *manifest_out = l.manifest;
  return CentralQNet({l.manifest.state_dim, l.manifest.num_agents * l.manifest.action_dim, l.manifest.hidden},
                     std::move(l.params));
}

LocalCommPolicyNet load_local_policy(const std::filesystem::path& net_path, Manifest* manifest_out) {
  Loaded l = load_with_manifest(net_path, NetKind::kLocalPolicy);
  if (manifest_out) *manifest_out = l.manifest;
  return local_from(std::move(l));
}

LoadedPolicy load_policy(const std::filesystem::path& net_path, Manifest* manifest_out) {
  require_file(net_path);
  const Manifest m = load_manifest(manifest_path_for(net_path));
  switch (m.kind) {
    case NetKind::kGlobalPolicy: return load_global_policy(net_path, manifest_out);
    case NetKind::kLocalPolicy: return load_local_policy(net_path, manifest_out);
    case NetKind::kCentralQ: break;
  }
  throw InputError(net_path.string() + " holds a critic, not a policy");
}

}  // namespace ctedd
