#pragma once

// A complete deployment: PCA, RS and CP services, their dispatchers, a
// transport (in-process or localhost sockets), and any number of trusted
// agents each owning a TPM instance. Services talk to each other through the
// same transport, so every message passes through a dispatcher and lands in
// the message recorder.

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "tickets/agent.hpp"
#include "tickets/charging.hpp"
#include "tickets/clock.hpp"
#include "tickets/pca.hpp"
#include "tickets/persist.hpp"
#include "tickets/reputation.hpp"
#include "tickets/tpm.hpp"
#include "tickets/wire.hpp"

namespace tickets {

enum class TransportKind { kInProc, kSocket };

std::string_view transport_name(TransportKind k);
std::optional<TransportKind> parse_transport(std::string_view s);

// Environment variable naming the first of three consecutive ports (PCA,
// RS, CP) used in socket mode. Unset means ephemeral ports.
inline constexpr const char* kPortBaseEnv = "TICKETS_PORT_BASE";

struct GroupConfig {
  Amount price = 0;  // flat price or base price, depending on policy
  Rational impact{1};
  std::string price_class;
};

struct DeploymentConfig {
  std::optional<std::uint64_t> seed;
  std::vector<GroupConfig> groups;  // group g is groups[g - 1]
  PricingPolicy::Kind policy = PricingPolicy::Kind::kFlat;
  Amount step = 0;
  Amount incentive = 0;
  Timestamp window = 0;
  RevenueShares shares;
  ChargingMode charging;
  RsConfig rs;
  std::string authority_token = "operator-token";
  Timestamp challenge_ttl = 300;
  TransportKind transport = TransportKind::kInProc;
  // When set, services persist their logs here.
  std::optional<std::filesystem::path> state_dir;
};

PricingPolicy policy_for(const DeploymentConfig& c);

struct AgentHandle {
  std::string name;
  std::unique_ptr<TpmInstance> tpm;
  std::unique_ptr<RpcClient> rpc;
  std::unique_ptr<RemotePcaClient> pca;
  std::unique_ptr<RemoteRsClient> rs;
  std::unique_ptr<TrustedAgent> agent;
  Digest platform_id{};
};

class Deployment {
 public:
  static Result<std::unique_ptr<Deployment>> create(DeploymentConfig config);
  ~Deployment();

  // New TPM + agent; opens a CP account named after the agent and registers
  // the platform with the PCA.
  Result<AgentHandle*> add_agent(const std::string& name, Amount balance,
                                 Amount credit_limit = 0);
  AgentHandle* agent(std::string_view name);
  const std::vector<std::unique_ptr<AgentHandle>>& agents() const {
    return agents_;
  }

  PrivacyCa& pca() { return *pca_; }
  ReputationSystem& rs() { return *rs_; }
  ChargingProvider& cp() { return *cp_; }
  SimClock& clock() { return clock_; }
  MessageRecorder& recorder() { return recorder_; }
  Transport& transport() { return *transport_; }
  OperatorClient& operator_client() { return *operator_; }
  const DeploymentConfig& config() const { return config_; }

  // Writes the RS spent-set snapshot into state_dir (no-op without one).
  Status checkpoint();

  // Every log file written to state_dir so far.
  std::vector<std::filesystem::path> persisted_files() const;

 private:
  explicit Deployment(DeploymentConfig config);
  Status init();

  DeploymentConfig config_;
  Drbg root_rng_;
  SimClock clock_;
  MessageRecorder recorder_;

  std::unique_ptr<AppendLog> pca_log_;
  std::unique_ptr<AppendLog> rs_log_;
  std::unique_ptr<AppendLog> cp_log_;

  std::unique_ptr<ChargingProvider> cp_;
  std::unique_ptr<PrivacyCa> pca_;
  std::unique_ptr<ReputationSystem> rs_;

  Dispatcher pca_dispatch_;
  Dispatcher rs_dispatch_;
  Dispatcher cp_dispatch_;

  std::unique_ptr<Transport> transport_;
  std::vector<std::unique_ptr<SocketServer>> servers_;

  std::unique_ptr<RpcClient> pca_rpc_;  // PCA -> CP
  std::unique_ptr<RpcClient> rs_rpc_;   // RS -> PCA
  std::unique_ptr<RpcClient> operator_rpc_;
  std::unique_ptr<RemoteChargingLink> charging_link_;
  std::unique_ptr<RemotePcaLink> pca_link_;
  std::unique_ptr<OperatorClient> operator_;

  std::vector<std::unique_ptr<AgentHandle>> agents_;
};

}  // namespace tickets
