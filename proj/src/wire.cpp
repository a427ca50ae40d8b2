#include "tickets/wire.hpp"

#include <httplib.h>

#include <sodium.h>

namespace tickets {

namespace {

constexpr std::string_view kMessageMagic = "TKM";
constexpr std::string_view kReplyMagic = "TKR";
constexpr std::uint8_t kPolicyGet = 0;
constexpr std::uint8_t kPolicySet = 1;

bool token_matches(std::string_view expected, std::string_view got) {
  return !expected.empty() && expected.size() == got.size() &&
         sodium_memcmp(expected.data(), got.data(), got.size()) == 0;
}

Error malformed() {
  return make_error(ErrorCode::kProtocolError, "malformed body");
}

// Decodes a request body with `parse`, then hands the value to `run`.
template <typename Parse, typename Run>
Handler handler(Parse parse, Run run) {
  return [parse, run](ByteView body) -> Result<Bytes> {
    auto req = decode_with(body, parse);
    if (!req) return malformed();
    return run(*req);
  };
}

Bytes empty_body() { return {}; }

ChargePhase read_phase(Reader& r) {
  std::uint8_t p = r.u8();
  if (p != 1 && p != 2) throw DecodeError("bad phase");
  return static_cast<ChargePhase>(p);
}

Error error_from_reply(const Reply& r) {
  auto code = error_from_name(r.error);
  if (!code) return make_error(ErrorCode::kProtocolError, r.error + " " + r.detail);
  return make_error(*code, r.detail);
}

// Decodes a reply body, mapping failure to a protocol error.
template <typename Fn>
auto parse_reply(const Result<Bytes>& body, Fn fn)
    -> Result<decltype(fn(std::declval<Reader&>()))> {
  if (!body) return body.error();
  auto v = decode_with(*body, fn);
  if (!v) return make_error(ErrorCode::kProtocolError, "malformed reply body");
  return std::move(*v);
}

}  // namespace

Bytes encode(const ProtocolMessage& m) {
  Writer w;
  w.raw(as_view(kMessageMagic))
      .u32(m.version)
      .str(m.endpoint)
      .bytes(m.body)
      .bytes(m.correlation_id);
  return std::move(w).take();
}

Result<ProtocolMessage> decode_message(ByteView in) {
  std::optional<std::uint32_t> bad_version;
  auto m = decode_with(in, [&](Reader& r) {
    r.expect_raw(as_view(kMessageMagic));
    ProtocolMessage out;
    out.version = r.u32();
    if (out.version != kProtocolVersion) {
      bad_version = out.version;
      throw DecodeError("version");
    }
    out.endpoint = r.str();
    out.body = r.bytes();
    out.correlation_id = r.bytes();
    return out;
  });
  if (bad_version) {
    return make_error(ErrorCode::kProtocolError,
                      "unsupported version " + std::to_string(*bad_version));
  }
  if (!m) return make_error(ErrorCode::kProtocolError, "malformed message");
  return std::move(*m);
}

Bytes encode(const Reply& r) {
  Writer w;
  w.raw(as_view(kReplyMagic))
      .u32(r.version)
      .bytes(r.correlation_id)
      .u8(r.ok ? 1 : 0)
      .str(r.error)
      .str(r.detail)
      .bytes(r.body);
  return std::move(w).take();
}

Result<Reply> decode_reply(ByteView in) {
  auto r = decode_with(in, [](Reader& rd) {
    rd.expect_raw(as_view(kReplyMagic));
    Reply out;
    out.version = rd.u32();
    if (out.version != kProtocolVersion) throw DecodeError("version");
    out.correlation_id = rd.bytes();
    std::uint8_t ok = rd.u8();
    if (ok > 1) throw DecodeError("bad flag");
    out.ok = ok == 1;
    out.error = rd.str();
    out.detail = rd.str();
    out.body = rd.bytes();
    return out;
  });
  if (!r) return make_error(ErrorCode::kProtocolError, "malformed reply");
  return std::move(*r);
}

std::uint64_t MessageRecorder::begin(std::string_view endpoint,
                                     ByteView request) {
  std::lock_guard lock(mu_);
  std::uint64_t seq = next_++;
  entries_[seq] = TranscriptEntry{seq, std::string(endpoint),
                                  Bytes(request.begin(), request.end()), {}};
  return seq;
}

void MessageRecorder::end(std::uint64_t seq, ByteView reply) {
  std::lock_guard lock(mu_);
  entries_[seq].reply.assign(reply.begin(), reply.end());
}

std::vector<TranscriptEntry> MessageRecorder::entries() const {
  std::lock_guard lock(mu_);
  std::vector<TranscriptEntry> out;
  for (const auto& [seq, e] : entries_) out.push_back(e);
  return out;
}

std::size_t MessageRecorder::size() const {
  std::lock_guard lock(mu_);
  return entries_.size();
}

void Dispatcher::add(std::string_view endpoint, Handler h) {
  handlers_.insert_or_assign(std::string(endpoint), std::move(h));
}

std::vector<std::string> Dispatcher::endpoints() const {
  std::vector<std::string> out;
  for (const auto& [name, h] : handlers_) out.push_back(name);
  return out;
}

Bytes Dispatcher::handle(ByteView request) const {
  auto msg = decode_message(request);
  std::string endpoint = msg ? msg->endpoint : std::string("<malformed>");
  std::uint64_t seq =
      recorder_ != nullptr ? recorder_->begin(endpoint, request) : 0;

  Reply reply;
  if (msg) reply.correlation_id = msg->correlation_id;
  auto fail = [&reply](const Error& e) {
    reply.ok = false;
    reply.error = std::string(error_name(e.code));
    reply.detail = e.detail;
  };

  if (!msg) {
    fail(msg.error());
  } else if (auto it = handlers_.find(msg->endpoint); it == handlers_.end()) {
    fail(make_error(ErrorCode::kUnknownEndpoint, msg->endpoint));
  } else {
    try {
      auto out = it->second(msg->body);
      if (out) {
        reply.body = std::move(*out);
      } else {
        fail(out.error());
      }
    } catch (const std::exception& e) {
      fail(make_error(ErrorCode::kInternal, e.what()));
    }
  }
  Bytes encoded = encode(reply);
  if (recorder_ != nullptr) recorder_->end(seq, encoded);
  return encoded;
}

void bind_pca(Dispatcher& d, PrivacyCa& pca) {
  d.add(endpoint::kPcaRegister,
        handler(
            [](Reader& r) {
              Bytes ek = r.bytes();
              return std::pair{std::move(ek), r.str()};
            },
            [&pca](const std::pair<Bytes, std::string>& req) -> Result<Bytes> {
              auto id = pca.register_platform(req.first, req.second);
              if (!id) return id.error();
              return to_bytes(*id);
            }));

  struct RequestBody {
    Bytes aik_public;
    GroupId g;
    PlatformEvidence evidence;
  };
  d.add(endpoint::kPcaRequest,
        handler(
            [](Reader& r) {
              RequestBody b;
              b.aik_public = r.bytes();
              b.g = r.u32();
              b.evidence.ek_public = r.bytes();
              b.evidence.supplementary = r.labels();
              return b;
            },
            [&pca](const RequestBody& b) -> Result<Bytes> {
              auto ch = pca.request_credential(b.aik_public, b.g, b.evidence);
              if (!ch) return ch.error();
              Writer w;
              w.bytes(ch->encrypted_nonce).i64(ch->expires);
              return std::move(w).take();
            }));

  d.add(endpoint::kPcaComplete,
        handler(
            [](Reader& r) {
              ChallengeResponse resp;
              resp.nonce = r.bytes();
              resp.signature = r.bytes();
              return resp;
            },
            [&pca](const ChallengeResponse& resp) -> Result<Bytes> {
              auto blob = pca.complete_handshake(resp);
              if (!blob) return blob.error();
              Writer w;
              w.bytes(*blob);
              return std::move(w).take();
            }));

  d.add(endpoint::kPcaResolve,
        handler(
            [](Reader& r) {
              Digest id = r.digest();
              return std::pair{id, r.str()};
            },
            [&pca](const std::pair<Digest, std::string>& req) -> Result<Bytes> {
              auto rec = pca.resolve_identity(req.first, req.second);
              if (!rec) return rec.error();
              return encode(*rec);
            }));

  struct BlacklistBody {
    Digest platform_id;
    bool flag;
    std::string token;
  };
  d.add(endpoint::kPcaBlacklist,
        handler(
            [](Reader& r) {
              BlacklistBody b;
              b.platform_id = r.digest();
              std::uint8_t f = r.u8();
              if (f > 1) throw DecodeError("bad flag");
              b.flag = f == 1;
              b.token = r.str();
              return b;
            },
            [&pca](const BlacklistBody& b) -> Result<Bytes> {
              if (!pca.check_authority(b.token)) {
                return make_error(ErrorCode::kForbidden);
              }
              auto st = pca.blacklist(b.platform_id, b.flag);
              if (!st) return st.error();
              return empty_body();
            }));

  d.add(endpoint::kPcaCharge,
        handler(
            [](Reader& r) {
              Digest id = r.digest();
              return std::pair{id, r.str()};
            },
            [&pca](const std::pair<Digest, std::string>& req) -> Result<Bytes> {
              if (!pca.check_authority(req.second)) {
                return make_error(ErrorCode::kForbidden);
              }
              auto receipt = pca.charge_for_ticket(req.first);
              if (!receipt) return receipt.error();
              return encode(*receipt);
            }));

  // Standing reveals platform state behind a pseudonym: RS-only.
  d.add(endpoint::kPcaStanding,
        handler(
            [](Reader& r) {
              Digest id = r.digest();
              return std::pair{id, r.str()};
            },
            [&pca](const std::pair<Digest, std::string>& req) -> Result<Bytes> {
              if (!pca.check_authority(req.second)) {
                return make_error(ErrorCode::kForbidden);
              }
              auto revoked = pca.ticket_revoked(req.first);
              if (!revoked) return revoked.error();
              return Bytes{static_cast<std::uint8_t>(*revoked ? 1 : 0)};
            }));
}

void bind_rs(Dispatcher& d, ReputationSystem& rs, std::string admin_token) {
  d.add(endpoint::kRsSubmit,
        handler(
            [](Reader& r) {
              Bytes payload = r.bytes();
              return std::pair{std::move(payload), r.bytes()};
            },
            [&rs](const std::pair<Bytes, Bytes>& req) -> Result<Bytes> {
              auto ack = rs.submit_encoded(req.first, req.second);
              if (!ack) return ack.error();
              return encode(*ack);
            }));

  d.add(endpoint::kRsScore,
        handler([](Reader& r) { return r.str(); },
                [&rs](const std::string& subject) -> Result<Bytes> {
                  auto score = rs.aggregate(subject);
                  Writer w;
                  w.u8(score ? 1 : 0);
                  if (score) {
                    w.str(numerator(score->exact).str())
                        .str(denominator(score->exact).str())
                        .u64(score->count);
                  }
                  return std::move(w).take();
                }));

  d.add(endpoint::kRsAdminGroups,
        handler(
            [](Reader& r) {
              std::string token = r.str();
              GroupPolicies groups;
              std::uint32_t n = r.u32();
              for (std::uint32_t i = 0; i < n; ++i) {
                GroupId g = r.u32();
                if (!groups.empty() && g <= groups.rbegin()->first) {
                  throw DecodeError("groups not ordered");
                }
                GroupPolicy p;
                p.verification_key = r.bytes();
                std::int64_t num = r.i64();
                std::int64_t den = r.i64();
                if (den <= 0) throw DecodeError("bad impact");
                p.impact = Rational(num, den);
                groups.emplace(g, std::move(p));
              }
              return std::pair{std::move(token), std::move(groups)};
            },
            [&rs, admin_token](const std::pair<std::string, GroupPolicies>& req)
                -> Result<Bytes> {
              if (!token_matches(admin_token, req.first)) {
                return make_error(ErrorCode::kForbidden);
              }
              auto st = rs.configure_groups(req.second);
              if (!st) return st.error();
              return empty_body();
            }));
}

void bind_cp(Dispatcher& d, ChargingProvider& cp, std::string admin_token) {
  struct ChargeBody {
    std::string token;
    std::string account;
    GroupId g;
    ChargePhase phase;
    bool dry_run;
  };
  d.add(endpoint::kCpCharge,
        handler(
            [](Reader& r) {
              ChargeBody b;
              b.token = r.str();
              b.account = r.str();
              b.g = r.u32();
              b.phase = read_phase(r);
              std::uint8_t dry = r.u8();
              if (dry > 1) throw DecodeError("bad flag");
              b.dry_run = dry == 1;
              return b;
            },
            [&cp, admin_token](const ChargeBody& b) -> Result<Bytes> {
              if (!token_matches(admin_token, b.token)) {
                return make_error(ErrorCode::kForbidden);
              }
              if (b.dry_run) {
                auto amount = cp.authorize_ticket(b.account, b.g, b.phase);
                if (!amount) return amount.error();
                Writer w;
                w.i64(*amount);
                return std::move(w).take();
              }
              auto receipt = cp.charge_ticket(b.account, b.g, b.phase);
              if (!receipt) return receipt.error();
              return encode(*receipt);
            }));

  // Balance movements would let an observer link ratings to accounts.
  d.add(endpoint::kCpBalance,
        handler(
            [](Reader& r) {
              std::string token = r.str();
              return std::pair{std::move(token), r.str()};
            },
            [&cp, admin_token](const std::pair<std::string, std::string>& req)
                -> Result<Bytes> {
              if (!token_matches(admin_token, req.first)) {
                return make_error(ErrorCode::kForbidden);
              }
              auto b = cp.balance(req.second);
              if (!b) return b.error();
              Writer w;
              w.i64(*b);
              return std::move(w).take();
            }));

  struct PolicyBody {
    std::uint8_t op;
    std::string token;
    Bytes policy;
  };
  d.add(endpoint::kCpPolicy,
        handler(
            [](Reader& r) {
              PolicyBody b;
              b.op = r.u8();
              if (b.op != kPolicyGet && b.op != kPolicySet) {
                throw DecodeError("bad op");
              }
              b.token = r.str();
              b.policy = r.bytes();
              return b;
            },
            [&cp, admin_token](const PolicyBody& b) -> Result<Bytes> {
              if (b.op == kPolicySet) {
                if (!token_matches(admin_token, b.token)) {
                  return make_error(ErrorCode::kForbidden);
                }
                auto p = decode_policy(b.policy);
                if (!p) return malformed();
                cp.set_policy(std::move(*p));
              }
              return encode(cp.policy());
            }));
}

std::string_view service_of(std::string_view endpoint) {
  return endpoint.substr(0, endpoint.find('/'));
}

void InProcTransport::attach(std::string service, const Dispatcher* d) {
  routes_.insert_or_assign(std::move(service), d);
}

Result<Bytes> InProcTransport::exchange(std::string_view endpoint,
                                        ByteView request) {
  auto it = routes_.find(service_of(endpoint));
  if (it == routes_.end()) {
    return make_error(ErrorCode::kTransportError,
                      "no route for " + std::string(endpoint));
  }
  return it->second->handle(request);
}

Result<std::unique_ptr<SocketServer>> SocketServer::start(const Dispatcher& d,
                                                          int port) {
  std::unique_ptr<SocketServer> s(new SocketServer());
  s->server_ = std::make_unique<httplib::Server>();
  s->server_->Post("/rpc", [&d](const httplib::Request& req,
                                httplib::Response& res) {
    Bytes out = d.handle(as_view(req.body));
    res.set_content(std::string(out.begin(), out.end()),
                    "application/octet-stream");
  });
  if (port == 0) {
    s->port_ = s->server_->bind_to_any_port("127.0.0.1");
    if (s->port_ <= 0) {
      return make_error(ErrorCode::kTransportError, "cannot bind");
    }
  } else {
    if (!s->server_->bind_to_port("127.0.0.1", port)) {
      return make_error(ErrorCode::kTransportError,
                        "cannot bind port " + std::to_string(port));
    }
    s->port_ = port;
  }
  httplib::Server* raw = s->server_.get();
  s->thread_ = std::thread([raw] { raw->listen_after_bind(); });
  raw->wait_until_ready();
  return s;
}

SocketServer::~SocketServer() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

void SocketTransport::attach(std::string service, int port) {
  ports_.insert_or_assign(std::move(service), port);
}

Result<Bytes> SocketTransport::exchange(std::string_view endpoint,
                                        ByteView request) {
  auto it = ports_.find(service_of(endpoint));
  if (it == ports_.end()) {
    return make_error(ErrorCode::kTransportError,
                      "no route for " + std::string(endpoint));
  }
  httplib::Client cli("127.0.0.1", it->second);
  cli.set_connection_timeout(5);
  cli.set_read_timeout(30);
  auto res = cli.Post("/rpc",
                      std::string(request.begin(), request.end()),
                      "application/octet-stream");
  if (!res) {
    return make_error(ErrorCode::kTransportError,
                      httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    return make_error(ErrorCode::kTransportError,
                      "http status " + std::to_string(res->status));
  }
  return Bytes(res->body.begin(), res->body.end());
}

void FaultyTransport::fail_at(std::uint64_t exchange_no, Fault f) {
  faults_[exchange_no] = f;
}

Result<Bytes> FaultyTransport::exchange(std::string_view endpoint,
                                        ByteView request) {
  std::uint64_t n = ++count_;
  auto it = faults_.find(n);
  if (it != faults_.end() && it->second == Fault::kDropRequest) {
    return make_error(ErrorCode::kTransportError, "request lost");
  }
  auto reply = inner_.exchange(endpoint, request);
  if (it != faults_.end() && it->second == Fault::kDropReply) {
    return make_error(ErrorCode::kTransportError, "reply lost");
  }
  return reply;
}

RpcClient::RpcClient(Transport& transport, std::string party)
    : transport_(transport), party_(std::move(party)) {}

Result<Bytes> RpcClient::call(std::string_view endpoint, Bytes body) {
  ProtocolMessage m;
  m.endpoint = std::string(endpoint);
  m.body = std::move(body);
  Writer corr;
  corr.str(party_).u64(++sent_);
  m.correlation_id = std::move(corr).take();

  auto raw = transport_.exchange(endpoint, encode(m));
  if (!raw) return raw.error();
  auto reply = decode_reply(*raw);
  if (!reply) return reply.error();
  if (reply->correlation_id != m.correlation_id) {
    return make_error(ErrorCode::kProtocolError, "correlation id mismatch");
  }
  if (!reply->ok) return error_from_reply(*reply);
  return std::move(reply->body);
}

Result<Digest> RemotePcaClient::register_platform(ByteView ek_public,
                                                  std::string_view account) {
  Writer w;
  w.bytes(ek_public).str(account);
  return parse_reply(rpc_.call(endpoint::kPcaRegister, std::move(w).take()),
                     [](Reader& r) { return r.digest(); });
}

Result<Challenge> RemotePcaClient::request_credential(
    ByteView aik_public, GroupId g, const PlatformEvidence& evidence) {
  Writer w;
  w.bytes(aik_public).u32(g).bytes(evidence.ek_public).labels(
      evidence.supplementary);
  return parse_reply(rpc_.call(endpoint::kPcaRequest, std::move(w).take()),
                     [](Reader& r) {
                       Challenge c;
                       c.encrypted_nonce = r.bytes();
                       c.expires = r.i64();
                       return c;
                     });
}

Result<Bytes> RemotePcaClient::complete_handshake(const ChallengeResponse& resp) {
  Writer w;
  w.bytes(resp.nonce).bytes(resp.signature);
  return parse_reply(rpc_.call(endpoint::kPcaComplete, std::move(w).take()),
                     [](Reader& r) { return r.bytes(); });
}

Result<Ack> RemoteRsClient::submit(const RatingPayload& payload,
                                   const CredentialChain& chain) {
  Writer w;
  w.bytes(encode(payload)).bytes(encode(chain));
  auto body = rpc_.call(endpoint::kRsSubmit, std::move(w).take());
  if (!body) return body.error();
  auto ack = decode_ack(*body);
  if (!ack) return make_error(ErrorCode::kProtocolError, "malformed ack");
  return *ack;
}

Result<ChargeReceipt> RemoteChargingLink::charge_ticket(std::string_view account,
                                                        GroupId g,
                                                        ChargePhase phase) {
  Writer w;
  w.str(token_).str(account).u32(g).u8(static_cast<std::uint8_t>(phase)).u8(0);
  auto body = rpc_.call(endpoint::kCpCharge, std::move(w).take());
  if (!body) return body.error();
  auto receipt = decode_receipt(*body);
  if (!receipt) return make_error(ErrorCode::kProtocolError, "malformed receipt");
  return *receipt;
}

Result<Amount> RemoteChargingLink::authorize_ticket(std::string_view account,
                                                    GroupId g,
                                                    ChargePhase phase) {
  Writer w;
  w.str(token_).str(account).u32(g).u8(static_cast<std::uint8_t>(phase)).u8(1);
  return parse_reply(rpc_.call(endpoint::kCpCharge, std::move(w).take()),
                     [](Reader& r) { return r.i64(); });
}

Result<ChargeReceipt> RemotePcaLink::charge_ex_post(const Digest& aik_id) {
  Writer w;
  w.digest(aik_id).str(token_);
  auto body = rpc_.call(endpoint::kPcaCharge, std::move(w).take());
  if (!body) return body.error();
  auto receipt = decode_receipt(*body);
  if (!receipt) return make_error(ErrorCode::kProtocolError, "malformed receipt");
  return *receipt;
}

Result<bool> RemotePcaLink::ticket_revoked(const Digest& aik_id) {
  Writer w;
  w.digest(aik_id).str(token_);
  return parse_reply(rpc_.call(endpoint::kPcaStanding, std::move(w).take()),
                     [](Reader& r) {
                       std::uint8_t f = r.u8();
                       if (f > 1) throw DecodeError("bad flag");
                       return f == 1;
                     });
}

Result<IdentityRecord> OperatorClient::resolve(const Digest& aik_id) {
  Writer w;
  w.digest(aik_id).str(token_);
  auto body = rpc_.call(endpoint::kPcaResolve, std::move(w).take());
  if (!body) return body.error();
  auto rec = decode_identity_record(*body);
  if (!rec) return make_error(ErrorCode::kProtocolError, "malformed record");
  return *rec;
}

Status OperatorClient::blacklist(const Digest& platform_id, bool flag) {
  Writer w;
  w.digest(platform_id).u8(flag ? 1 : 0).str(token_);
  auto body = rpc_.call(endpoint::kPcaBlacklist, std::move(w).take());
  if (!body) return body.error();
  return {};
}

Result<std::optional<WeightedScore>> OperatorClient::score(
    std::string_view subject) {
  Writer w;
  w.str(subject);
  return parse_reply(
      rpc_.call(endpoint::kRsScore, std::move(w).take()),
      [](Reader& r) -> std::optional<WeightedScore> {
        std::uint8_t has = r.u8();
        if (has > 1) throw DecodeError("bad flag");
        if (has == 0) return std::nullopt;
        std::string num = r.str();
        std::string den = r.str();
        std::uint64_t count = r.u64();
        try {
          using boost::multiprecision::cpp_int;
          ExactRational q(cpp_int{num}, cpp_int{den});
          return WeightedScore{q, count};
        } catch (const std::exception&) {
          throw DecodeError("bad rational");
        }
      });
}

Status OperatorClient::configure_rs_groups(const GroupPolicies& groups) {
  Writer w;
  w.str(token_).u32(static_cast<std::uint32_t>(groups.size()));
  for (const auto& [g, p] : groups) {
    w.u32(g).bytes(p.verification_key).i64(p.impact.numerator()).i64(
        p.impact.denominator());
  }
  auto body = rpc_.call(endpoint::kRsAdminGroups, std::move(w).take());
  if (!body) return body.error();
  return {};
}

Result<Amount> OperatorClient::balance(std::string_view account) {
  Writer w;
  w.str(token_).str(account);
  return parse_reply(rpc_.call(endpoint::kCpBalance, std::move(w).take()),
                     [](Reader& r) { return r.i64(); });
}

Result<PricingPolicy> OperatorClient::policy() {
  Writer w;
  w.u8(kPolicyGet).str("").bytes(Bytes{});
  auto body = rpc_.call(endpoint::kCpPolicy, std::move(w).take());
  if (!body) return body.error();
  auto p = decode_policy(*body);
  if (!p) return make_error(ErrorCode::kProtocolError, "malformed policy");
  return *p;
}

Status OperatorClient::set_policy(const PricingPolicy& p) {
  Writer w;
  w.u8(kPolicySet).str(token_).bytes(encode(p));
  auto body = rpc_.call(endpoint::kCpPolicy, std::move(w).take());
  if (!body) return body.error();
  return {};
}

}  // namespace tickets
