#pragma once

// Protocol messages, service dispatch and the two transports (in-process
// and HTTP over localhost). Body layouts for every endpoint are documented
// in docs/protocol.md.

#include <atomic>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "tickets/agent.hpp"
#include "tickets/charging.hpp"
#include "tickets/codec.hpp"
#include "tickets/pca.hpp"
#include "tickets/reputation.hpp"
#include "tickets/result.hpp"

namespace httplib {
class Server;
}

namespace tickets {

inline constexpr std::uint32_t kProtocolVersion = 1;

namespace endpoint {
inline constexpr std::string_view kPcaRegister = "pca/register";
inline constexpr std::string_view kPcaRequest = "pca/request";
inline constexpr std::string_view kPcaComplete = "pca/complete";
inline constexpr std::string_view kPcaResolve = "pca/resolve";
inline constexpr std::string_view kPcaBlacklist = "pca/blacklist";
inline constexpr std::string_view kPcaCharge = "pca/charge";
inline constexpr std::string_view kPcaStanding = "pca/standing";
inline constexpr std::string_view kRsSubmit = "rs/submit";
inline constexpr std::string_view kRsScore = "rs/score";
inline constexpr std::string_view kRsAdminGroups = "rs/admin/groups";
inline constexpr std::string_view kCpCharge = "cp/charge";
inline constexpr std::string_view kCpBalance = "cp/balance";
inline constexpr std::string_view kCpPolicy = "cp/policy";
}  // namespace endpoint

struct ProtocolMessage {
  std::uint32_t version = kProtocolVersion;
  std::string endpoint;
  Bytes body;
  Bytes correlation_id;

  friend bool operator==(const ProtocolMessage&,
                         const ProtocolMessage&) = default;
};

Bytes encode(const ProtocolMessage& m);
// Unknown versions and malformed bytes are protocol errors.
Result<ProtocolMessage> decode_message(ByteView in);

struct Reply {
  std::uint32_t version = kProtocolVersion;
  Bytes correlation_id;
  bool ok = true;
  std::string error;  // error_name() when !ok
  std::string detail;
  Bytes body;

  friend bool operator==(const Reply&, const Reply&) = default;
};

Bytes encode(const Reply& r);
Result<Reply> decode_reply(ByteView in);

// Every request/reply pair seen at service ingress, numbered in arrival
// order.
struct TranscriptEntry {
  std::uint64_t seq = 0;
  std::string endpoint;
  Bytes request;
  Bytes reply;
};

class MessageRecorder {
 public:
  std::uint64_t begin(std::string_view endpoint, ByteView request);
  void end(std::uint64_t seq, ByteView reply);
  std::vector<TranscriptEntry> entries() const;
  std::size_t size() const;

 private:
  mutable std::mutex mu_;
  std::map<std::uint64_t, TranscriptEntry> entries_;
  std::uint64_t next_ = 1;
};

using Handler = std::function<Result<Bytes>(ByteView body)>;

// Service side: decodes a request, routes it to a handler, encodes the
// reply. Never throws; garbage in yields a protocol-error reply.
class Dispatcher {
 public:
  explicit Dispatcher(MessageRecorder* recorder = nullptr)
      : recorder_(recorder) {}

  void add(std::string_view endpoint, Handler h);
  Bytes handle(ByteView request) const;
  std::vector<std::string> endpoints() const;

 private:
  MessageRecorder* recorder_;
  std::map<std::string, Handler, std::less<>> handlers_;
};

// Service-to-service and operator endpoints check the bearer token the
// deployment configured (for the PCA, its authority token).
void bind_pca(Dispatcher& d, PrivacyCa& pca);
void bind_rs(Dispatcher& d, ReputationSystem& rs, std::string admin_token);
void bind_cp(Dispatcher& d, ChargingProvider& cp, std::string admin_token);

// Service owning an endpoint: the text before the first '/'.
std::string_view service_of(std::string_view endpoint);

class Transport {
 public:
  virtual ~Transport() = default;
  // Delivers encoded request bytes for `endpoint` and returns the encoded
  // reply, or transport-error.
  virtual Result<Bytes> exchange(std::string_view endpoint,
                                 ByteView request) = 0;
};

class InProcTransport final : public Transport {
 public:
  void attach(std::string service, const Dispatcher* d);
  Result<Bytes> exchange(std::string_view endpoint, ByteView request) override;

 private:
  std::map<std::string, const Dispatcher*, std::less<>> routes_;
};

// Serves one dispatcher over HTTP POST /rpc on 127.0.0.1.
class SocketServer {
 public:
  // port 0 picks a free port.
  static Result<std::unique_ptr<SocketServer>> start(const Dispatcher& d,
                                                     int port = 0);
  ~SocketServer();
  int port() const { return port_; }

 private:
  SocketServer() = default;

  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  int port_ = 0;
};

class SocketTransport final : public Transport {
 public:
  void attach(std::string service, int port);
  Result<Bytes> exchange(std::string_view endpoint, ByteView request) override;

 private:
  std::map<std::string, int, std::less<>> ports_;
};

// Wraps a transport and loses chosen messages. Exchange numbers start at 1.
class FaultyTransport final : public Transport {
 public:
  enum class Fault { kDropRequest, kDropReply };

  explicit FaultyTransport(Transport& inner) : inner_(inner) {}
  void fail_at(std::uint64_t exchange_no, Fault f);
  Result<Bytes> exchange(std::string_view endpoint, ByteView request) override;
  std::uint64_t exchanges() const { return count_; }

 private:
  Transport& inner_;
  std::map<std::uint64_t, Fault> faults_;
  std::uint64_t count_ = 0;
};

// Client side: wraps bodies in ProtocolMessages with per-party correlation
// ids and unwraps replies into Result<Bytes>.
class RpcClient {
 public:
  RpcClient(Transport& transport, std::string party);
  Result<Bytes> call(std::string_view endpoint, Bytes body);
  std::uint64_t sent() const { return sent_.load(); }

 private:
  Transport& transport_;
  std::string party_;
  std::atomic<std::uint64_t> sent_{0};
};

class RemotePcaClient final : public PcaClient {
 public:
  explicit RemotePcaClient(RpcClient& rpc) : rpc_(rpc) {}
  Result<Digest> register_platform(ByteView ek_public,
                                   std::string_view account) override;
  Result<Challenge> request_credential(
      ByteView aik_public, GroupId g, const PlatformEvidence& evidence) override;
  Result<Bytes> complete_handshake(const ChallengeResponse& r) override;

 private:
  RpcClient& rpc_;
};

class RemoteRsClient final : public RsClient {
 public:
  explicit RemoteRsClient(RpcClient& rpc) : rpc_(rpc) {}
  Result<Ack> submit(const RatingPayload& payload,
                     const CredentialChain& chain) override;

 private:
  RpcClient& rpc_;
};

class RemoteChargingLink final : public ChargingLink {
 public:
  RemoteChargingLink(RpcClient& rpc, std::string token)
      : rpc_(rpc), token_(std::move(token)) {}
  Result<ChargeReceipt> charge_ticket(std::string_view account, GroupId g,
                                      ChargePhase phase) override;
  Result<Amount> authorize_ticket(std::string_view account, GroupId g,
                                  ChargePhase phase) override;

 private:
  RpcClient& rpc_;
  std::string token_;
};

class RemotePcaLink final : public PcaLink {
 public:
  RemotePcaLink(RpcClient& rpc, std::string token)
      : rpc_(rpc), token_(std::move(token)) {}
  Result<ChargeReceipt> charge_ex_post(const Digest& aik_id) override;
  Result<bool> ticket_revoked(const Digest& aik_id) override;

 private:
  RpcClient& rpc_;
  std::string token_;
};

// Operator / relying-party calls that are not part of an agent flow.
class OperatorClient {
 public:
  OperatorClient(RpcClient& rpc, std::string token)
      : rpc_(rpc), token_(std::move(token)) {}

  Result<IdentityRecord> resolve(const Digest& aik_id);
  Status blacklist(const Digest& platform_id, bool flag);
  Result<std::optional<WeightedScore>> score(std::string_view subject);
  Status configure_rs_groups(const GroupPolicies& groups);
  Result<Amount> balance(std::string_view account);
  Result<PricingPolicy> policy();
  Status set_policy(const PricingPolicy& p);

 private:
  RpcClient& rpc_;
  std::string token_;
};

}  // namespace tickets
