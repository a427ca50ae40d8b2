#include "tickets/scenario.hpp"

#include <charconv>
#include <map>
#include <set>
#include <sstream>

namespace tickets {

std::string_view tamper_name(TamperMode m) {
  switch (m) {
    case TamperMode::kFlipSignature:
      return "flip-signature";
    case TamperMode::kWrongRs:
      return "wrong-rs";
    case TamperMode::kForeignGroup:
      return "foreign-group";
    case TamperMode::kAlterScore:
      return "alter-score";
  }
  return "?";
}

std::optional<TamperMode> parse_tamper(std::string_view s) {
  for (auto m : {TamperMode::kFlipSignature, TamperMode::kWrongRs,
                 TamperMode::kForeignGroup, TamperMode::kAlterScore}) {
    if (tamper_name(m) == s) return m;
  }
  return std::nullopt;
}

std::string Step::describe() const {
  std::ostringstream o;
  switch (kind) {
    case Kind::kAcquire:
      o << "acquire " << agent << ' ' << group << ' ' << ticket;
      break;
    case Kind::kRedeem:
      o << "redeem " << agent << ' ' << ticket << ' ' << subject << ' '
        << score;
      if (!comment.empty()) o << ' ' << comment;
      break;
    case Kind::kTamper:
      o << "tamper " << agent << ' ' << ticket << ' ' << subject << ' '
        << score << ' ' << tamper_name(tamper);
      break;
    case Kind::kBlacklist:
      o << "blacklist " << agent << ' ' << (flag ? "on" : "off");
      break;
    case Kind::kAdvance:
      o << "advance " << seconds;
      break;
  }
  return o.str();
}

namespace {

Error line_error(int line, std::string msg) {
  return Error{ErrorCode::kConfigError,
               "line " + std::to_string(line) + ": " + std::move(msg)};
}

template <typename T>
std::optional<T> parse_int(std::string_view s) {
  T v{};
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) return std::nullopt;
  return v;
}

std::optional<Rational> parse_rational(std::string_view s) {
  auto slash = s.find('/');
  auto num = parse_int<std::int64_t>(s.substr(0, slash));
  if (!num) return std::nullopt;
  std::int64_t den = 1;
  if (slash != std::string_view::npos) {
    auto d = parse_int<std::int64_t>(s.substr(slash + 1));
    if (!d || *d <= 0) return std::nullopt;
    den = *d;
  }
  return Rational(*num, den);
}

std::vector<std::string> tokens(std::string_view line) {
  std::vector<std::string> out;
  std::istringstream in{std::string(line)};
  for (std::string t; in >> t;) out.push_back(std::move(t));
  return out;
}

// Parses a directive line into `s`; `line` is 1-based.
Status parse_line(Scenario& s, const std::vector<std::string>& t, int line) {
  auto& c = s.config;
  const std::string& kw = t[0];
  auto need = [&](std::size_t lo, std::size_t hi) -> Status {
    if (t.size() < lo || t.size() > hi) {
      return line_error(line, "wrong number of arguments for '" + kw + "'");
    }
    return {};
  };
  auto amount = [&](const std::string& v,
                    std::string_view what) -> Result<Amount> {
    auto a = parse_int<Amount>(v);
    if (!a) return line_error(line, std::string(what) + " is not an integer");
    return *a;
  };

  if (kw == "seed") {
    if (auto st = need(2, 2); !st) return st;
    auto v = parse_int<std::uint64_t>(t[1]);
    if (!v) return line_error(line, "seed is not an unsigned integer");
    c.seed = *v;
  } else if (kw == "rs-id") {
    if (auto st = need(2, 2); !st) return st;
    c.rs.rs_id = t[1];
  } else if (kw == "scale") {
    if (auto st = need(3, 3); !st) return st;
    auto lo = parse_int<std::int32_t>(t[1]);
    auto hi = parse_int<std::int32_t>(t[2]);
    if (!lo || !hi || *lo > *hi) return line_error(line, "bad scale");
    c.rs.scale = RatingScale{*lo, *hi};
  } else if (kw == "token") {
    if (auto st = need(2, 2); !st) return st;
    c.authority_token = t[1];
  } else if (kw == "group") {
    // group <g> price <n> impact <p/q> [class <label>]
    if (t.size() != 6 && t.size() != 8) {
      return line_error(line, "expected: group <g> price <n> impact <p/q> "
                              "[class <label>]");
    }
    auto g = parse_int<GroupId>(t[1]);
    if (!g || *g != c.groups.size() + 1) {
      return line_error(line, "groups must be numbered 1, 2, ... in order");
    }
    if (t[2] != "price" || t[4] != "impact" ||
        (t.size() == 8 && t[6] != "class")) {
      return line_error(line, "expected: group <g> price <n> impact <p/q> "
                              "[class <label>]");
    }
    auto p = amount(t[3], "price");
    if (!p) return p.error();
    auto impact = parse_rational(t[5]);
    if (!impact || *impact <= 0) {
      return line_error(line, "impact must be a positive rational");
    }
    GroupConfig gc{*p, *impact, t.size() == 8 ? t[7] : "group-" + t[1]};
    c.groups.push_back(std::move(gc));
  } else if (kw == "policy") {
    if (t.size() < 2) return line_error(line, "policy kind missing");
    const std::string& k = t[1];
    if (k == "flat" || k == "free") {
      if (auto st = need(2, 2); !st) return st;
      c.policy = k == "flat" ? PricingPolicy::Kind::kFlat
                             : PricingPolicy::Kind::kFree;
    } else if (k == "increasing") {
      if (t.size() != 4 || t[2] != "step") {
        return line_error(line, "expected: policy increasing step <n>");
      }
      auto v = amount(t[3], "step");
      if (!v) return v.error();
      c.policy = PricingPolicy::Kind::kIncreasing;
      c.step = *v;
    } else if (k == "reverse") {
      if (t.size() != 4 || t[2] != "incentive") {
        return line_error(line, "expected: policy reverse incentive <n>");
      }
      auto v = amount(t[3], "incentive");
      if (!v) return v.error();
      c.policy = PricingPolicy::Kind::kReverse;
      c.incentive = *v;
    } else if (k == "frequency") {
      if (t.size() != 6 || t[2] != "step" || t[4] != "window") {
        return line_error(line,
                          "expected: policy frequency step <n> window <s>");
      }
      auto v = amount(t[3], "step");
      if (!v) return v.error();
      auto w = amount(t[5], "window");
      if (!w) return w.error();
      c.policy = PricingPolicy::Kind::kFrequency;
      c.step = *v;
      c.window = *w;
    } else {
      return line_error(line, "unknown policy '" + k + "'");
    }
  } else if (kw == "shares") {
    if (auto st = need(4, 4); !st) return st;
    auto a = parse_rational(t[1]);
    auto b = parse_rational(t[2]);
    auto r = parse_rational(t[3]);
    if (!a || !b || !r) return line_error(line, "shares must be rationals");
    c.shares = RevenueShares{*a, *b, *r};
  } else if (kw == "charging") {
    if (auto st = need(2, 2); !st) return st;
    const std::string& m = t[1];
    if (m == "acquisition") {
      c.charging = {true, false};
    } else if (m == "ex_post") {
      c.charging = {false, true};
    } else if (m == "both") {
      c.charging = {true, true};
    } else if (m == "none") {
      c.charging = {false, false};
    } else {
      return line_error(line, "unknown charging mode '" + m + "'");
    }
  } else if (kw == "blacklist-policy") {
    if (auto st = need(2, 2); !st) return st;
    if (t[1] != "honor" && t[1] != "ignore") {
      return line_error(line, "expected honor or ignore");
    }
    c.rs.honor_blacklist = t[1] == "honor";
  } else if (kw == "challenge-ttl") {
    if (auto st = need(2, 2); !st) return st;
    auto v = amount(t[1], "ttl");
    if (!v) return v.error();
    c.challenge_ttl = *v;
  } else if (kw == "agent") {
    // agent <name> balance <n> [limit <l>]
    if ((t.size() != 4 && t.size() != 6) || t[2] != "balance" ||
        (t.size() == 6 && t[4] != "limit")) {
      return line_error(line, "expected: agent <name> balance <n> "
                              "[limit <l>]");
    }
    AgentSpec a{t[1], 0, 0};
    auto b = amount(t[3], "balance");
    if (!b) return b.error();
    a.balance = *b;
    if (t.size() == 6) {
      auto l = amount(t[5], "limit");
      if (!l) return l.error();
      a.credit_limit = *l;
    }
    s.agents.push_back(std::move(a));
  } else if (kw == "acquire") {
    if (auto st = need(4, 4); !st) return st;
    Step st{};
    st.kind = Step::Kind::kAcquire;
    st.line = line;
    st.agent = t[1];
    auto g = parse_int<GroupId>(t[2]);
    if (!g) return line_error(line, "group is not an integer");
    st.group = *g;
    st.ticket = t[3];
    s.steps.push_back(std::move(st));
  } else if (kw == "redeem" || kw == "tamper") {
    bool tamper = kw == "tamper";
    if (tamper) {
      if (auto st = need(6, 6); !st) return st;
    } else if (t.size() < 5) {
      return line_error(line, "expected: redeem <agent> <ticket> <subject> "
                              "<score> [comment]");
    }
    Step st{};
    st.kind = tamper ? Step::Kind::kTamper : Step::Kind::kRedeem;
    st.line = line;
    st.agent = t[1];
    st.ticket = t[2];
    st.subject = t[3];
    auto score = parse_int<std::int32_t>(t[4]);
    if (!score) return line_error(line, "score is not an integer");
    st.score = *score;
    if (tamper) {
      auto m = parse_tamper(t[5]);
      if (!m) return line_error(line, "unknown tamper mode '" + t[5] + "'");
      st.tamper = *m;
    } else {
      for (std::size_t i = 5; i < t.size(); ++i) {
        if (i > 5) st.comment += ' ';
        st.comment += t[i];
      }
    }
    s.steps.push_back(std::move(st));
  } else if (kw == "blacklist") {
    if (auto st = need(3, 3); !st) return st;
    if (t[2] != "on" && t[2] != "off") {
      return line_error(line, "expected on or off");
    }
    Step st{};
    st.kind = Step::Kind::kBlacklist;
    st.line = line;
    st.agent = t[1];
    st.flag = t[2] == "on";
    s.steps.push_back(std::move(st));
  } else if (kw == "advance") {
    if (auto st = need(2, 2); !st) return st;
    auto v = parse_int<Timestamp>(t[1]);
    if (!v || *v < 0) return line_error(line, "advance needs seconds >= 0");
    Step st{};
    st.kind = Step::Kind::kAdvance;
    st.line = line;
    st.seconds = *v;
    s.steps.push_back(std::move(st));
  } else {
    return line_error(line, "unknown directive '" + kw + "'");
  }
  return {};
}

}  // namespace

Result<Scenario> parse_scenario(std::string_view text) {
  Scenario s;
  s.config.charging = {true, false};
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    auto t = tokens(line);
    if (t.empty()) continue;
    if (auto st = parse_line(s, t, line_no); !st) return st.error();
  }
  if (auto st = validate(s); !st) return st.error();
  return s;
}

Status validate(const Scenario& s) {
  const auto& c = s.config;
  if (c.groups.empty()) {
    return make_error(ErrorCode::kConfigError, "no groups declared");
  }
  if (auto st = c.shares.validate(); !st) {
    return make_error(ErrorCode::kConfigError, st.error().detail);
  }
  if (c.authority_token.empty()) {
    return make_error(ErrorCode::kConfigError, "empty token");
  }
  if (c.challenge_ttl <= 0) {
    return make_error(ErrorCode::kConfigError, "challenge-ttl must be > 0");
  }
  if (c.policy == PricingPolicy::Kind::kFrequency && c.window <= 0) {
    return make_error(ErrorCode::kConfigError, "frequency window must be > 0");
  }
  std::set<std::string, std::less<>> agents;
  for (const auto& a : s.agents) {
    if (!agents.insert(a.name).second) {
      return make_error(ErrorCode::kConfigError, "duplicate agent " + a.name);
    }
    if (a.credit_limit < 0) {
      return make_error(ErrorCode::kConfigError,
                        "negative credit limit for " + a.name);
    }
  }
  std::set<std::pair<std::string, std::string>> tickets;
  for (const auto& st : s.steps) {
    if (st.kind != Step::Kind::kAdvance && !agents.contains(st.agent)) {
      return line_error(st.line, "unknown agent '" + st.agent + "'");
    }
    switch (st.kind) {
      case Step::Kind::kAcquire:
        if (st.group == 0 || st.group > c.groups.size()) {
          return line_error(st.line,
                            "unknown group " + std::to_string(st.group));
        }
        if (!tickets.emplace(st.agent, st.ticket).second) {
          return line_error(st.line, "ticket label '" + st.ticket +
                                         "' already used by " + st.agent);
        }
        break;
      case Step::Kind::kRedeem:
      case Step::Kind::kTamper:
        if (!tickets.contains({st.agent, st.ticket})) {
          return line_error(st.line, "ticket '" + st.ticket +
                                         "' is never acquired by " + st.agent);
        }
        break;
      default:
        break;
    }
  }
  return {};
}

std::string demo_scenario_text() {
  return R"(# Demo: three agents, two groups, increasing prices, charging at
# acquisition and after redemption.
seed 42
rs-id market
scale 1 5
group 1 price 100 impact 1 class basic
group 2 price 250 impact 3 class verified
policy increasing step 10
shares 1/2 3/10 1/5
charging both
blacklist-policy honor
agent alice balance 2000
agent bob balance 2000
agent carol balance 150

acquire alice 1 a1
acquire alice 2 a2
acquire bob 1 b1
redeem alice a1 widget 5 arrived early
redeem bob b1 widget 3
redeem alice a2 gadget 4
# second use of the same ticket
redeem alice a1 widget 1
# carol cannot afford a verified ticket
acquire carol 2 c1
acquire carol 1 c2
tamper carol c2 widget 1 flip-signature
redeem carol c2 widget 2
advance 60
blacklist bob on
acquire bob 1 b2
)";
}

// --- transcript ---

namespace {

std::string short_hash(ByteView data) {
  Digest d = sha256(data);
  return to_hex(ByteView(d.data(), 8));
}

}  // namespace

Bytes encode(const Transcript& t) {
  Writer w;
  w.raw(as_view("TKT1"));
  w.u64(t.seed);
  w.u32(static_cast<std::uint32_t>(t.messages.size()));
  for (const auto& m : t.messages) {
    w.u64(m.seq).str(m.endpoint).bytes(m.request).bytes(m.reply);
  }
  w.u32(static_cast<std::uint32_t>(t.steps.size()));
  for (const auto& s : t.steps) {
    w.u32(static_cast<std::uint32_t>(s.index))
        .str(s.step)
        .u8(s.ok ? 1 : 0)
        .str(s.outcome);
  }
  w.u32(static_cast<std::uint32_t>(t.balances.size()));
  for (const auto& [name, bal] : t.balances) w.str(name).i64(bal);
  w.i64(t.revenue.cp).i64(t.revenue.pca).i64(t.revenue.rs);
  w.u64(t.spent_tickets).u64(t.stored_ratings).u64(t.pending_ex_post);
  w.u32(static_cast<std::uint32_t>(t.scores.size()));
  for (const auto& s : t.scores) {
    w.str(s.subject).u8(s.score ? 1 : 0);
    if (s.score) {
      w.str(numerator(*s.score).str()).str(denominator(*s.score).str());
    }
    w.u64(s.count);
  }
  w.u8(t.ledgers_consistent ? 1 : 0);
  return std::move(w).take();
}

std::string render_text(const Transcript& t) {
  std::ostringstream o;
  o << "seed " << t.seed << "\n\nmessages (" << t.messages.size() << ")\n";
  for (const auto& m : t.messages) {
    o << "  #" << m.seq << ' ' << m.endpoint << " req " << m.request.size()
      << "B " << short_hash(m.request) << " reply " << m.reply.size() << "B "
      << short_hash(m.reply) << '\n';
  }
  o << "\nsteps\n";
  for (const auto& s : t.steps) {
    o << "  [" << s.index << "] " << s.step << "\n      -> "
      << (s.ok ? "ok " : "FAILED ") << s.outcome << '\n';
  }
  o << "\nbalances\n";
  for (const auto& [name, bal] : t.balances) {
    o << "  " << name << ' ' << bal << '\n';
  }
  o << "\nrevenue cp " << t.revenue.cp << " pca " << t.revenue.pca << " rs "
    << t.revenue.rs << " total " << t.revenue.total() << '\n';
  o << "spent tickets " << t.spent_tickets << "\nstored ratings "
    << t.stored_ratings << "\npending ex-post charges " << t.pending_ex_post
    << "\n\nscores\n";
  for (const auto& s : t.scores) {
    o << "  " << s.subject << ' ';
    if (s.score) {
      o << *s.score << " (" << static_cast<double>(*s.score) << ") from "
        << s.count << " ratings\n";
    } else {
      o << "no ratings\n";
    }
  }
  o << "\nledgers " << (t.ledgers_consistent ? "consistent" : "INCONSISTENT")
    << '\n';
  return o.str();
}

// --- chain files ---

namespace {

constexpr std::string_view kChainFileHeader = "tickets-chain-file v1";

}  // namespace

std::string write_chain_file(const std::vector<ChainBundle>& bundles) {
  std::string out(kChainFileHeader);
  out += '\n';
  for (const auto& b : bundles) {
    Writer w;
    w.u32(static_cast<std::uint32_t>(b.registry.size()));
    for (const auto& [g, key] : b.registry) w.u32(g).bytes(key);
    w.bytes(b.payload).bytes(b.chain);
    out += to_hex(w.data());
    out += '\n';
  }
  return out;
}

Result<std::vector<ChainBundle>> parse_chain_file(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line) || line != kChainFileHeader) {
    return make_error(ErrorCode::kMalformedBlob, "missing chain file header");
  }
  std::vector<ChainBundle> out;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto raw = from_hex(line);
    auto bundle = raw ? decode_with(*raw, [](Reader& r) {
      ChainBundle b;
      std::uint32_t n = r.u32();
      for (std::uint32_t i = 0; i < n; ++i) {
        GroupId g = r.u32();
        b.registry[g] = r.bytes();
      }
      b.payload = r.bytes();
      b.chain = r.bytes();
      return b;
    })
                      : std::nullopt;
    if (!bundle) {
      return make_error(ErrorCode::kMalformedBlob,
                        "line " + std::to_string(line_no) + ": bad bundle");
    }
    out.push_back(std::move(*bundle));
  }
  return out;
}

BundleCheck check_bundle(const ChainBundle& b) {
  BundleCheck out;
  auto chain = decode_chain(b.chain);
  if (!chain) return out;  // default report is not valid
  out.report = verify_chain(*chain, b.registry);
  out.payload_matches =
      decode_payload(b.payload).has_value() && chain->rating.entity == b.payload;
  return out;
}

// --- runner ---

namespace {

std::string failure(const Error& e) {
  std::string s(error_name(e.code));
  if (!e.detail.empty()) s += ": " + e.detail;
  return s;
}

}  // namespace

Result<RunResult> run_scenario(const Scenario& s, const RunOptions& opts) {
  if (auto st = validate(s); !st) return st.error();
  DeploymentConfig config = s.config;
  if (opts.transport) config.transport = *opts.transport;
  if (opts.seed) config.seed = *opts.seed;
  if (opts.state_dir) config.state_dir = *opts.state_dir;

  // Key material for the foreign-group tamper comes from the same seed, so
  // tampered runs stay reproducible.
  Drbg foreign_rng = config.seed ? Drbg::from_u64(*config.seed).fork("foreign")
                                 : Drbg();
  auto dep_or = Deployment::create(config);
  if (!dep_or) return dep_or.error();
  Deployment& dep = **dep_or;

  for (const auto& a : s.agents) {
    auto h = dep.add_agent(a.name, a.balance, a.credit_limit);
    if (!h) return h.error();
  }

  RunResult result;
  Transcript& t = result.transcript;
  t.seed = config.seed.value_or(0);
  std::map<std::pair<std::string, std::string>, std::uint64_t> tickets;
  std::set<std::string> subjects;
  const GroupRegistry registry = dep.pca().group_registry();

  for (std::size_t i = 0; i < s.steps.size(); ++i) {
    const Step& st = s.steps[i];
    StepOutcome out{i + 1, st.describe(), false, {}};
    AgentHandle* h = st.kind == Step::Kind::kAdvance ? nullptr
                                                     : dep.agent(st.agent);
    switch (st.kind) {
      case Step::Kind::kAcquire: {
        auto id = h->agent->acquire_ticket(st.group);
        if (id) {
          tickets[{st.agent, st.ticket}] = *id;
          out.ok = true;
          out.outcome = "ticket " + st.ticket + " issued for group " +
                        std::to_string(st.group);
        } else {
          out.outcome = failure(id.error());
        }
        break;
      }
      case Step::Kind::kRedeem:
      case Step::Kind::kTamper: {
        subjects.insert(st.subject);
        auto it = tickets.find({st.agent, st.ticket});
        if (it == tickets.end()) {
          out.outcome = "no ticket " + st.ticket + " (acquisition failed)";
          break;
        }
        std::string rs_id = config.rs.rs_id;
        bool tampered = st.kind == Step::Kind::kTamper;
        if (tampered && st.tamper == TamperMode::kWrongRs) {
          rs_id = "not-" + rs_id;
        }
        auto payload =
            h->agent->make_payload(st.subject, st.score, rs_id, st.comment);
        ChainBundle captured;
        ChainTamper hook = [&](RatingPayload& p, CredentialChain& c) {
          if (tampered) {
            switch (st.tamper) {
              case TamperMode::kFlipSignature:
                c.rating.signature[0] ^= 0x01;
                break;
              case TamperMode::kWrongRs:
                break;
              case TamperMode::kForeignGroup: {
                KeyPair foreign = generate_keypair(foreign_rng);
                if (auto fake = certify(foreign, c.aik.entity, c.aik.meta)) {
                  c.aik = std::move(*fake);
                }
                break;
              }
              case TamperMode::kAlterScore:
                p.score = p.score == config.rs.scale.max ? config.rs.scale.min
                                                         : config.rs.scale.max;
                break;
            }
          }
          captured = ChainBundle{registry, encode(p), encode(c)};
        };
        auto ack = h->agent->redeem_ticket(it->second, payload, hook);
        if (ack) {
          out.ok = true;
          out.outcome = "accepted, receipt " + std::to_string(ack->receipt_no) +
                        ", group " + std::to_string(ack->group);
          result.accepted.push_back(std::move(captured));
        } else {
          out.outcome = failure(ack.error());
        }
        break;
      }
      case Step::Kind::kBlacklist: {
        auto r = dep.operator_client().blacklist(h->platform_id, st.flag);
        out.ok = r.ok();
        out.outcome = r ? std::string(st.flag ? "blacklisted" : "reinstated")
                        : failure(r.error());
        break;
      }
      case Step::Kind::kAdvance:
        dep.clock().advance(st.seconds);
        out.ok = true;
        out.outcome = "clock at " + std::to_string(dep.clock().now());
        break;
    }
    t.steps.push_back(std::move(out));
  }

  for (const auto& subject : subjects) {
    auto score = dep.operator_client().score(subject);
    if (!score) return score.error();
    SubjectScore ss{subject, std::nullopt, 0};
    if (*score) {
      ss.score = (*score)->exact;
      ss.count = (*score)->count;
    }
    t.scores.push_back(std::move(ss));
  }

  if (auto st = dep.checkpoint(); !st) return st.error();

  t.messages = dep.recorder().entries();
  Amount charged = 0;
  bool consistent = true;
  for (const auto& a : dep.cp().accounts()) {
    t.balances.emplace_back(a.id, a.balance);
    charged += a.initial_balance - a.balance;
    consistent = consistent && replay_balance(a) == a.balance;
  }
  t.revenue = dep.cp().revenue();
  t.ledgers_consistent = consistent && charged == t.revenue.total();
  t.spent_tickets = dep.rs().spent_count();
  t.stored_ratings = dep.rs().records().size();
  t.pending_ex_post = dep.rs().pending_charges();
  return result;
}

}  // namespace tickets
