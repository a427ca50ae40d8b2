#include "tickets/deployment.hpp"

#include <array>
#include <cstdlib>

namespace tickets {

std::string_view transport_name(TransportKind k) {
  return k == TransportKind::kInProc ? "inproc" : "socket";
}

std::optional<TransportKind> parse_transport(std::string_view s) {
  if (s == "inproc") return TransportKind::kInProc;
  if (s == "socket") return TransportKind::kSocket;
  return std::nullopt;
}

PricingPolicy policy_for(const DeploymentConfig& c) {
  std::map<GroupId, Amount> prices;
  for (std::size_t i = 0; i < c.groups.size(); ++i) {
    prices[static_cast<GroupId>(i + 1)] = c.groups[i].price;
  }
  switch (c.policy) {
    case PricingPolicy::Kind::kFree:
      return PricingPolicy::free();
    case PricingPolicy::Kind::kFlat:
      return PricingPolicy::flat(std::move(prices));
    case PricingPolicy::Kind::kIncreasing:
      return PricingPolicy::increasing(std::move(prices), c.step);
    case PricingPolicy::Kind::kReverse:
      return PricingPolicy::reverse(c.incentive);
    case PricingPolicy::Kind::kFrequency:
      return PricingPolicy::frequency(std::move(prices), c.step, c.window);
  }
  return PricingPolicy::free();
}

Deployment::Deployment(DeploymentConfig config)
    : config_(std::move(config)),
      root_rng_(config_.seed ? Drbg::from_u64(*config_.seed) : Drbg()),
      pca_dispatch_(&recorder_),
      rs_dispatch_(&recorder_),
      cp_dispatch_(&recorder_) {}

Deployment::~Deployment() {
  // Stop servers before the services they dispatch into go away.
  servers_.clear();
}

Result<std::unique_ptr<Deployment>> Deployment::create(DeploymentConfig config) {
  std::unique_ptr<Deployment> d(new Deployment(std::move(config)));
  if (auto st = d->init(); !st) return st.error();
  return d;
}

Status Deployment::init() {
  if (auto st = config_.shares.validate(); !st) {
    return make_error(ErrorCode::kConfigError, st.error().to_string());
  }
  if (config_.authority_token.empty()) {
    return make_error(ErrorCode::kConfigError, "authority token required");
  }

  std::vector<GroupSpec> specs;
  for (std::size_t i = 0; i < config_.groups.size(); ++i) {
    Drbg group_rng = root_rng_.fork("group/" + std::to_string(i + 1));
    specs.push_back(GroupSpec{generate_keypair(group_rng),
                              config_.groups[i].price_class,
                              config_.groups[i].impact});
  }
  auto table = GroupTable::create(std::move(specs));
  if (!table) return table.error();

  if (config_.state_dir) {
    std::error_code ec;
    std::filesystem::create_directories(*config_.state_dir, ec);
    if (ec) return make_error(ErrorCode::kConfigError, ec.message());
    for (auto [slot, name] :
         {std::pair{&pca_log_, "pca-issuance.log"},
          std::pair{&rs_log_, "rs-ratings.log"},
          std::pair{&cp_log_, "cp-ledger.log"}}) {
      auto log = FileLog::open(*config_.state_dir / name);
      if (!log) return log.error();
      *slot = std::move(*log);
    }
  }

  if (config_.transport == TransportKind::kInProc) {
    transport_ = std::make_unique<InProcTransport>();
  } else {
    transport_ = std::make_unique<SocketTransport>();
  }

  pca_rpc_ = std::make_unique<RpcClient>(*transport_, "pca");
  rs_rpc_ = std::make_unique<RpcClient>(*transport_, "rs");
  operator_rpc_ = std::make_unique<RpcClient>(*transport_, "operator");
  charging_link_ =
      std::make_unique<RemoteChargingLink>(*pca_rpc_, config_.authority_token);
  pca_link_ =
      std::make_unique<RemotePcaLink>(*rs_rpc_, config_.authority_token);
  operator_ =
      std::make_unique<OperatorClient>(*operator_rpc_, config_.authority_token);

  cp_ = std::make_unique<ChargingProvider>(clock_, policy_for(config_),
                                           config_.shares, cp_log_.get());
  PcaConfig pca_config;
  pca_config.authority_token = config_.authority_token;
  pca_config.charging = config_.charging;
  pca_config.challenge_ttl = config_.challenge_ttl;
  pca_ = std::make_unique<PrivacyCa>(std::move(*table), pca_config, clock_,
                                     root_rng_.fork("pca"),
                                     charging_link_.get(), pca_log_.get());
  RsConfig rs_config = config_.rs;
  rs_config.ex_post_charging = config_.charging.ex_post;
  rs_ = std::make_unique<ReputationSystem>(rs_config, clock_, pca_link_.get(),
                                           rs_log_.get());

  bind_pca(pca_dispatch_, *pca_);
  bind_rs(rs_dispatch_, *rs_, config_.authority_token);
  bind_cp(cp_dispatch_, *cp_, config_.authority_token);

  const std::array<std::pair<const char*, const Dispatcher*>, 3> services{{
      {"pca", &pca_dispatch_},
      {"rs", &rs_dispatch_},
      {"cp", &cp_dispatch_},
  }};
  if (config_.transport == TransportKind::kInProc) {
    auto& t = static_cast<InProcTransport&>(*transport_);
    for (const auto& [name, d] : services) t.attach(name, d);
  } else {
    int base = 0;
    if (const char* env = std::getenv(kPortBaseEnv); env != nullptr && *env) {
      base = std::atoi(env);
      if (base <= 0 || base > 65533) {
        return make_error(ErrorCode::kConfigError,
                          std::string(kPortBaseEnv) + " is not a port");
      }
    }
    auto& t = static_cast<SocketTransport&>(*transport_);
    for (std::size_t i = 0; i < services.size(); ++i) {
      int port = base == 0 ? 0 : base + static_cast<int>(i);
      auto server = SocketServer::start(*services[i].second, port);
      if (!server) return server.error();
      t.attach(services[i].first, (*server)->port());
      servers_.push_back(std::move(*server));
    }
  }

  // The RS learns group keys and impacts from the PCA's table.
  GroupPolicies policies;
  for (const auto& [g, key] : pca_->group_registry()) {
    policies.emplace(g, GroupPolicy{key, config_.groups[g - 1].impact});
  }
  return operator_->configure_rs_groups(policies);
}

Result<AgentHandle*> Deployment::add_agent(const std::string& name,
                                           Amount balance,
                                           Amount credit_limit) {
  if (agent(name) != nullptr) {
    return make_error(ErrorCode::kConfigError, "duplicate agent " + name);
  }
  auto h = std::make_unique<AgentHandle>();
  h->name = name;
  h->tpm = std::make_unique<TpmInstance>(root_rng_.fork("tpm/" + name));
  h->rpc = std::make_unique<RpcClient>(*transport_, "ta/" + name);
  h->pca = std::make_unique<RemotePcaClient>(*h->rpc);
  h->rs = std::make_unique<RemoteRsClient>(*h->rpc);
  h->agent = std::make_unique<TrustedAgent>(*h->tpm, *h->pca, *h->rs,
                                            root_rng_.fork("agent/" + name));
  if (auto st = cp_->open_account(name, balance, credit_limit); !st) {
    return st.error();
  }
  auto id = h->agent->register_platform(name);
  if (!id) return id.error();
  h->platform_id = *id;
  agents_.push_back(std::move(h));
  return agents_.back().get();
}

AgentHandle* Deployment::agent(std::string_view name) {
  for (auto& a : agents_) {
    if (a->name == name) return a.get();
  }
  return nullptr;
}

Status Deployment::checkpoint() {
  if (!config_.state_dir) return {};
  return write_snapshot(*config_.state_dir / "rs-spent.snapshot",
                        rs_->spent_snapshot());
}

std::vector<std::filesystem::path> Deployment::persisted_files() const {
  std::vector<std::filesystem::path> out;
  if (!config_.state_dir) return out;
  for (const char* name : {"pca-issuance.log", "rs-ratings.log",
                           "cp-ledger.log", "rs-spent.snapshot"}) {
    auto p = *config_.state_dir / name;
    if (std::filesystem::exists(p)) out.push_back(p);
  }
  return out;
}

}  // namespace tickets
