#include "qbc/scenario.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "qbc/dump.hpp"
#include "qbc/error.hpp"
#include "qbc/fork.hpp"
#include "qbc/qtoken.hpp"

namespace qbc::scenario {

using nlohmann::json;

namespace {

[[noreturn]] void invalid(const std::string& what) { throw Error(Errc::ConfigInvalid, what); }

void only_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) invalid(where + " must be an object");
  for (const auto& [key, value] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
      invalid("unknown key '" + key + "' in " + where);
  }
}

const json& need(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) invalid("missing key '" + std::string(key) + "' in " + where);
  return j.at(key);
}

std::uint64_t as_uint(const json& v, const std::string& what) {
  if (!v.is_number_unsigned()) invalid(what + " must be a non-negative integer");
  return v.get<std::uint64_t>();
}

double as_double(const json& v, const std::string& what) {
  if (!v.is_number()) invalid(what + " must be a number");
  return v.get<double>();
}

NodeId as_node(const json& v, const std::string& what, std::size_t nodes) {
  const auto id = as_uint(v, what);
  if (id >= nodes) invalid(what + " refers to unknown node " + std::to_string(id));
  return static_cast<NodeId>(id);
}

Action parse_action(const json& a, std::size_t idx, const net::NetworkConfig& nc) {
  const std::string where = "script[" + std::to_string(idx) + "]";
  if (!a.is_object()) invalid(where + " must be an object");
  const json& kind = need(a, "action", where);
  if (!kind.is_string()) invalid(where + ".action must be a string");
  const std::string k = kind.get<std::string>();
  Action act;
  act.tick = as_uint(need(a, "tick", where), where + ".tick");
  auto node_at = [&](const char* key) { return as_node(need(a, key, where), where + "." + key, nc.nodes); };

  if (k == "send") {
    only_keys(a, {"action", "tick", "from", "to", "amount"}, where);
    act.kind = ActionKind::Send;
    act.from = node_at("from");
    act.to = node_at("to");
    act.amount = as_uint(need(a, "amount", where), where + ".amount");
    if (act.amount == 0) invalid(where + ".amount must be positive");
  } else if (k == "double_spend") {
    only_keys(a, {"action", "tick", "from", "to_a", "to_b", "amount"}, where);
    act.kind = ActionKind::DoubleSpend;
    act.from = node_at("from");
    act.to = node_at("to_a");
    act.to_b = node_at("to_b");
    act.amount = as_uint(need(a, "amount", where), where + ".amount");
    if (act.amount == 0) invalid(where + ".amount must be positive");
    if (act.to == act.to_b) invalid(where + ": to_a and to_b must differ");
    if (act.to_b == act.from) invalid(where + ": to_b must differ from the sender");
  } else if (k == "partition") {
    only_keys(a, {"action", "tick", "nodes", "duration"}, where);
    act.kind = ActionKind::Partition;
    const json& members = need(a, "nodes", where);
    if (!members.is_array() || members.empty()) invalid(where + ".nodes must be a non-empty array");
    for (const auto& m : members) act.members.push_back(as_node(m, where + ".nodes", nc.nodes));
    act.duration = as_uint(need(a, "duration", where), where + ".duration");
    if (act.duration == 0) invalid(where + ".duration must be positive");
  } else if (k == "tamper") {
    only_keys(a, {"action", "tick", "node", "block", "target", "coord", "delta"}, where);
    act.kind = ActionKind::Tamper;
    act.node = node_at("node");
    act.block = static_cast<Index>(as_uint(need(a, "block", where), where + ".block"));
    if (act.block < 1) invalid(where + ".block is 1-based");
    const json& t = need(a, "target", where);
    const std::string target = t.is_string() ? t.get<std::string>() : "";
    if (target == "preliminary")
      act.target = TamperTarget::Preliminary;
    else if (target == "disclosed")
      act.target = TamperTarget::Disclosed;
    else if (target == "lifted")
      act.target = TamperTarget::Lifted;
    else
      invalid(where + ".target must be preliminary, disclosed or lifted");
    act.coord = static_cast<Index>(as_uint(need(a, "coord", where), where + ".coord"));
    const Index limit = act.target == TamperTarget::Lifted ? nc.m_max : nc.n;
    if (act.coord >= limit) invalid(where + ".coord out of range");
    act.delta = as_double(need(a, "delta", where), where + ".delta");
    if (act.delta == 0.0) invalid(where + ".delta must be nonzero");
  } else if (k == "fork_check") {
    only_keys(a, {"action", "tick"}, where);
    act.kind = ActionKind::ForkCheck;
  } else if (k == "mint_token") {
    only_keys(a, {"action", "tick", "node", "block", "owner"}, where);
    act.kind = ActionKind::MintToken;
    act.node = node_at("node");
    act.to = node_at("owner");
    act.block = static_cast<Index>(as_uint(need(a, "block", where), where + ".block"));
  } else if (k == "forge_token") {
    only_keys(a, {"action", "tick", "token", "coord", "delta"}, where);
    act.kind = ActionKind::ForgeToken;
    act.token = as_uint(need(a, "token", where), where + ".token");
    act.coord = static_cast<Index>(as_uint(need(a, "coord", where), where + ".coord"));
    if (act.coord >= nc.m_max) invalid(where + ".coord out of range");
    act.delta = as_double(need(a, "delta", where), where + ".delta");
  } else if (k == "transfer_token") {
    only_keys(a, {"action", "tick", "token", "to"}, where);
    act.kind = ActionKind::TransferToken;
    act.token = as_uint(need(a, "token", where), where + ".token");
    act.to = node_at("to");
  } else {
    invalid(where + ": unknown action '" + k + "'");
  }
  return act;
}

struct DoubleSpendRecord {
  TxId a;
  TxId b;
};

struct TamperRecord {
  NodeId node;
  Index block;
};

class Runner {
 public:
  explicit Runner(const Config& config) : config_(config), net_(config.network) {}

  RunReport run();

 private:
  void apply(const Action& act);
  void double_spend(const Action& act);
  void check_invariants();
  void fail(std::string what) { report_.failures.push_back(std::move(what)); }

  const Config& config_;
  net::SimNetwork net_;
  RunReport report_;
  std::vector<DoubleSpendRecord> double_spends_;
  std::vector<TamperRecord> tampers_;
  std::set<NodeId> tampered_;
  qtoken::TokenMachine machine_;
  std::vector<qtoken::Token> tokens_;
  std::size_t forks_resolved_ = 0;
  std::size_t fork_checks_ = 0;
  std::size_t forgeries_detected_ = 0;
  std::size_t transfers_ = 0;
  bool stalled_ = false;
};

void Runner::double_spend(const Action& act) {
  net::NodeState& sender = net_.node(act.from);
  const auto set_a = net::create_transaction(sender, act.to, act.amount, net_.clock());
  const Transaction& pay_a = set_a.front();
  Transaction pay_b{act.from, {act.to_b}, act.amount, pay_a.sources, {}, net_.clock()};
  pay_b = signed_copy(pay_b, sender.signing_secret);
  std::vector<Transaction> set_b{pay_b};
  if (set_a.size() > 1) set_b.push_back(set_a[1]);
  double_spends_.push_back({tx_id(pay_a), tx_id(pay_b)});

  // The sender keeps neither spend. to_b hears the second spend first;
  // everyone else hears only the first.
  for (const auto& tx : set_b) net_.send(act.to_b, net::Message{net::MessageKind::Transaction, act.from, tx, {}, {}});
  for (const auto& tx : set_a) {
    for (const auto& peer : net_.nodes())
      if (peer.id != act.from) net_.send(peer.id, net::Message{net::MessageKind::Transaction, act.from, tx, {}, {}});
  }
  net_.events().add(net_.clock(), act.from, "double_spend", net::digest_hex(serialize(pay_b)));
}

void Runner::apply(const Action& act) {
  switch (act.kind) {
    case ActionKind::Send:
      net_.submit_payment(act.from, act.to, act.amount);
      break;
    case ActionKind::DoubleSpend:
      double_spend(act);
      break;
    case ActionKind::Partition:
      net_.partition(act.members, act.duration);
      break;
    case ActionKind::Tamper: {
      auto& chain = net_.node(act.node).chain;
      const cd delta(act.delta, 0.0);
      if (act.target == TamperTarget::Preliminary)
        chain.tamper_preliminary(act.block, act.coord, delta);
      else if (act.target == TamperTarget::Disclosed)
        chain.tamper_block(act.block, act.coord, delta);
      else
        chain.tamper_block(act.block, chain.params().n + act.coord, delta);
      tampers_.push_back({act.node, act.block});
      tampered_.insert(act.node);
      net_.events().add(net_.clock(), act.node, "tampered", net::digest_hex(std::to_string(act.block)));
      break;
    }
    case ActionKind::ForkCheck: {
      ++fork_checks_;
      const auto rep = fork::fork_check(net_, tampered_);
      forks_resolved_ += rep.reconciled.size();
      for (NodeId id : rep.failed) fail("fork reconciliation refused for node " + std::to_string(raw(id)));
      break;
    }
    case ActionKind::MintToken: {
      tokens_.push_back(qtoken::mint_token(machine_, net_.node(act.node).chain, act.block, act.to));
      net_.events().add(net_.clock(), act.to, "token_minted", net::digest_hex(tokens_.back().serial));
      break;
    }
    case ActionKind::ForgeToken: {
      if (act.token >= tokens_.size()) throw Error(Errc::InvalidToken, "no token #" + std::to_string(act.token));
      qtoken::Token forged = tokens_[act.token];
      forged.qstate(act.coord) += cd(act.delta, 0.0);
      const bool accepted = qtoken::verify_token(machine_, forged);
      if (accepted)
        fail("forged token #" + std::to_string(act.token) + " passed verification");
      else
        ++forgeries_detected_;
      net_.events().add(net_.clock(), std::nullopt, accepted ? "forgery_accepted" : "forgery_detected",
                        net::digest_hex(forged.serial));
      break;
    }
    case ActionKind::TransferToken: {
      if (act.token >= tokens_.size()) throw Error(Errc::InvalidToken, "no token #" + std::to_string(act.token));
      const qtoken::Token old = tokens_[act.token];
      tokens_[act.token] = qtoken::transfer_token(machine_, old, act.to);
      ++transfers_;
      if (qtoken::verify_token(machine_, old)) fail("retired token still verifies");
      net_.events().add(net_.clock(), act.to, "token_transferred", net::digest_hex(tokens_[act.token].serial));
      break;
    }
  }
}

RunReport Runner::run() {
  std::vector<const Action*> pending;
  for (const auto& a : config_.script) pending.push_back(&a);
  std::stable_sort(pending.begin(), pending.end(), [](const Action* x, const Action* y) { return x->tick < y->tick; });
  const Tick last = pending.empty() ? 0 : pending.back()->tick;
  const Tick cap = last + 1000;

  std::size_t next = 0;
  while (true) {
    net_.deliver_due();
    while (next < pending.size() && pending[next]->tick <= net_.clock()) {
      const Action& act = *pending[next++];
      try {
        apply(act);
      } catch (const Error& e) {
        report_.runtime_failure = true;
        fail("action at tick " + std::to_string(act.tick) + " failed: " + e.what());
        net_.events().add(net_.clock(), std::nullopt, "action_failed", net::digest_hex(std::string(e.what())));
      }
    }
    net_.consensus_step();
    if (next == pending.size() && net_.quiescent()) break;
    if (net_.clock() >= cap) {
      stalled_ = true;
      fail("run did not settle within 1000 ticks of the last scripted action");
      break;
    }
    net_.advance_clock();
  }

  check_invariants();
  report_.events_jsonl = net_.events().jsonl();
  for (const auto& nd : net_.nodes()) report_.ledgers.push_back(dump::write_ledger(nd.chain, nd.id));
  report_.summary["failures"] = report_.failures;
  report_.summary["invariant_failures"] = report_.failures.size();
  return std::move(report_);
}

void Runner::check_invariants() {
  json& s = report_.summary;
  s["name"] = config_.name;
  s["seed"] = config_.network.seed;
  s["ticks"] = net_.clock();
  s["stalled"] = stalled_;
  s["blocks_confirmed"] = net_.events().count("block_confirmed");
  s["forks_resolved"] = forks_resolved_;
  s["fork_checks"] = fork_checks_;

  const Amount genesis = net_.genesis_supply();
  s["supply"] = genesis;

  std::vector<const net::NodeState*> honest;
  for (const auto& nd : net_.nodes()) {
    const std::string who = "node " + std::to_string(raw(nd.id));
    if (tampered_.contains(nd.id)) continue;
    honest.push_back(&nd);
    const auto rep = ledger::validate_chain(nd.chain, &nd.key);
    if (!rep.ok()) {
      fail(who + " fails validation at block " + std::to_string(*rep.first_invalid_index) + ": " + rep.reason);
      continue;
    }
    if (!(UtxoView::from_chain(nd.chain) == nd.utxo_view)) fail(who + " holds a stale output view");
    if (nd.utxo_view.supply() != genesis)
      fail(who + " supply " + std::to_string(nd.utxo_view.supply()) + " != " + std::to_string(genesis));
    if (!nd.inbox.empty()) fail(who + " has unapplied committed blocks");
  }

  for (std::size_t k = 1; k < honest.size(); ++k) {
    if (honest[k]->chain.preliminaries() != honest[0]->chain.preliminaries()) {
      fail("nodes " + std::to_string(raw(honest[0]->id)) + " and " + std::to_string(raw(honest[k]->id)) +
           " disagree on the disclosed record");
    }
  }

  std::size_t detections = 0;
  json first_invalid = json::object();
  for (NodeId id : tampered_) {
    const auto& nd = net_.node(id);
    Index earliest = 0;
    for (const auto& t : tampers_)
      if (t.node == id && (earliest == 0 || t.block < earliest)) earliest = t.block;
    const auto rep = ledger::validate_chain(nd.chain, &nd.key);
    if (rep.ok()) {
      fail("tampering on node " + std::to_string(raw(id)) + " went undetected");
      first_invalid[std::to_string(raw(id))] = nullptr;
      continue;
    }
    first_invalid[std::to_string(raw(id))] = *rep.first_invalid_index;
    if (*rep.first_invalid_index <= earliest)
      ++detections;
    else
      fail("node " + std::to_string(raw(id)) + " flagged block " + std::to_string(*rep.first_invalid_index) +
           " after the tampered block " + std::to_string(earliest));
  }
  s["tamper_detections"] = detections;
  s["first_invalid_index"] = first_invalid;

  json ds = json::array();
  for (const auto& rec : double_spends_) {
    json entry;
    entry["a"] = rec.a.hex();
    entry["b"] = rec.b.hex();
    std::set<std::string> outcomes;
    for (const auto* nd : honest) {
      const bool ca = nd->utxo_view.is_confirmed(rec.a);
      const bool cb = nd->utxo_view.is_confirmed(rec.b);
      outcomes.insert(ca && cb ? "both" : ca ? "a" : cb ? "b" : "none");
    }
    if (outcomes.size() == 1 && (*outcomes.begin() == "a" || *outcomes.begin() == "b"))
      entry["confirmed"] = *outcomes.begin();
    else {
      entry["confirmed"] = "inconsistent";
      fail("double spend " + rec.a.hex() + "/" + rec.b.hex() + " did not resolve to exactly one confirmation");
    }
    ds.push_back(entry);
  }
  s["double_spends"] = ds;

  json tokens;
  tokens["minted"] = tokens_.size();
  tokens["transfers"] = transfers_;
  tokens["forgeries_detected"] = forgeries_detected_;
  std::size_t live_ok = 0;
  for (const auto& t : tokens_) {
    if (qtoken::verify_token(machine_, t))
      ++live_ok;
    else
      fail("token " + t.serial + " no longer verifies");
  }
  tokens["live_verified"] = live_ok;
  const bool corr = qtoken::correspondence_holds(machine_);
  tokens["correspondence"] = corr;
  if (!corr) fail("token registry correspondence violated");
  s["tokens"] = tokens;
}

}  // namespace

Config parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    invalid(std::string("config is not valid JSON: ") + e.what());
  }
  try {
    only_keys(j,
              {"name", "seed", "nodes", "n", "m_max", "sample_size", "approve_threshold", "block_size",
               "delivery_prob", "latency", "genesis_grants", "script"},
              "config");
    Config c;
    if (j.contains("name")) {
      if (!j.at("name").is_string()) invalid("name must be a string");
      c.name = j.at("name").get<std::string>();
    }
    auto& nc = c.network;
    nc.seed = as_uint(need(j, "seed", "config"), "seed");
    nc.nodes = as_uint(need(j, "nodes", "config"), "nodes");
    if (j.contains("n")) nc.n = static_cast<Index>(as_uint(j.at("n"), "n"));
    if (j.contains("m_max")) nc.m_max = static_cast<Index>(as_uint(j.at("m_max"), "m_max"));
    nc.consensus.sample_size = as_uint(need(j, "sample_size", "config"), "sample_size");
    if (j.contains("approve_threshold")) nc.consensus.approve_threshold = as_double(j.at("approve_threshold"), "approve_threshold");
    if (j.contains("block_size")) nc.consensus.block_size = as_uint(j.at("block_size"), "block_size");
    if (j.contains("delivery_prob")) nc.delivery_prob = as_double(j.at("delivery_prob"), "delivery_prob");
    if (j.contains("latency")) {
      const json& l = j.at("latency");
      only_keys(l, {"min", "max"}, "latency");
      nc.latency.min = as_uint(need(l, "min", "latency"), "latency.min");
      nc.latency.max = as_uint(need(l, "max", "latency"), "latency.max");
    }
    const json& grants = need(j, "genesis_grants", "config");
    if (!grants.is_array()) invalid("genesis_grants must be an array");
    for (std::size_t i = 0; i < grants.size(); ++i) {
      const std::string where = "genesis_grants[" + std::to_string(i) + "]";
      only_keys(grants[i], {"to", "amount"}, where);
      const auto to = as_uint(need(grants[i], "to", where), where + ".to");
      if (to > 0xFFFFFFFEull) invalid(where + ".to out of range");
      nc.genesis_grants.push_back({static_cast<NodeId>(to), as_uint(need(grants[i], "amount", where), where + ".amount")});
    }
    nc.validate();

    if (j.contains("script")) {
      const json& script = j.at("script");
      if (!script.is_array()) invalid("script must be an array");
      for (std::size_t i = 0; i < script.size(); ++i) c.script.push_back(parse_action(script[i], i, nc));
    }
    return c;
  } catch (const json::exception& e) {
    invalid(std::string("config: ") + e.what());
  }
}

Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) invalid("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

RunReport run_scenario(const Config& config) {
  Runner runner(config);
  return runner.run();
}

void write_outputs(const RunReport& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto write = [&](const std::filesystem::path& p, const std::string& body) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw Error(Errc::InvalidParams, "cannot write " + p.string());
    out << body;
  };
  write(dir / "events.jsonl", report.events_jsonl);
  for (std::size_t i = 0; i < report.ledgers.size(); ++i)
    write(dir / ("ledger_node" + std::to_string(i) + ".json"), report.ledgers[i]);
  write(dir / "summary.json", report.summary.dump(2) + "\n");
}

}  // namespace qbc::scenario
