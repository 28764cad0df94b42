#include "qbc/network.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <json.hpp>

#include "qbc/crypto.hpp"
#include "qbc/error.hpp"

namespace qbc::net {

namespace {

std::string node_label(NodeId id) { return std::to_string(raw(id)); }

std::string tx_digest(const Transaction& tx) { return digest_hex(serialize(tx)); }

std::string block_digest(const StateVector& prelim) {
  try {
    return digest_hex(encoding::decode_bytes(prelim));
  } catch (const Error&) {
    return "malformed";
  }
}

Bytes proposal_payload(std::uint64_t round, NodeId proposer, const std::vector<NodeId>& voters,
                       const StateVector& prelim) {
  Bytes out;
  auto put = [&out](std::uint64_t v, int width) {
    for (int i = width - 1; i >= 0; --i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  };
  put(round, 8);
  put(raw(proposer), 4);
  put(voters.size(), 2);
  for (NodeId v : voters) put(raw(v), 4);
  const Bytes body = encoding::decode_bytes(prelim);
  out.insert(out.end(), body.begin(), body.end());
  return out;
}

bool shares_source(const Transaction& a, const Transaction& b) {
  if (a.sender != b.sender) return false;
  for (const TxId& s : a.sources)
    if (std::find(b.sources.begin(), b.sources.end(), s) != b.sources.end()) return true;
  return false;
}

}  // namespace

void NetworkConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(Errc::ConfigInvalid, what); };
  if (nodes < 2) fail("nodes must be at least 2");
  if (nodes >= raw(kMintId)) fail("too many nodes");
  if (n < 1) fail("n must be positive");
  if (m_max < 1 || (m_max & (m_max - 1)) != 0) fail("m_max must be a power of two");
  if (consensus.sample_size < 1) fail("sample_size must be positive");
  if (consensus.sample_size > nodes - 1) fail("sample_size must not exceed nodes - 1");
  if (!(consensus.approve_threshold > 0.0 && consensus.approve_threshold <= 1.0))
    fail("approve_threshold must lie in (0, 1]");
  if (consensus.block_size < 1) fail("block_size must be positive");
  if (!(delivery_prob >= 0.0 && delivery_prob <= 1.0)) fail("delivery_prob must lie in [0, 1]");
  if (latency.min < 1 || latency.max < latency.min) fail("latency must satisfy 1 <= min <= max");
  if (genesis_grants.empty()) fail("at least one genesis grant is required");
  for (const auto& g : genesis_grants) {
    if (raw(g.to) >= nodes) fail("genesis grant to unknown node " + node_label(g.to));
    if (g.amount == 0) fail("genesis grant amounts must be positive");
  }
}

bool NodeState::in_log(const TxId& id) const {
  return std::any_of(log.begin(), log.end(), [&](const LogEntry& e) { return e.id == id; });
}

std::vector<Transaction> NodeState::log_txs() const {
  std::vector<Transaction> out;
  out.reserve(log.size());
  for (const auto& e : log) out.push_back(e.tx);
  return out;
}

Verdict verify_transaction(const Transaction& tx, const NodeState& node, const KeyRegistry& registry) {
  const auto pending = node.log_txs();
  return verify_transaction(tx, node, registry, pending);
}

Verdict verify_transaction(const Transaction& tx, const NodeState& node, const KeyRegistry& registry,
                           std::span<const Transaction> pending) {
  if (!is_well_formed(tx)) return {1, "malformed transaction"};
  try {
    if (!verify_signature(tx, registry)) return {1, "bad signature"};
  } catch (const Error& e) {
    if (e.code() != Errc::UnknownSigner) throw;
    return {1, e.what()};
  }

  auto find_source = [&](const TxId& id) -> const Transaction* {
    if (const Transaction* t = node.utxo_view.confirmed_tx(id)) return t;
    for (const auto& p : pending)
      if (tx_id(p) == id) return &p;
    return nullptr;
  };
  for (const TxId& src : tx.sources) {
    const Transaction* s = find_source(src);
    if (s && std::find(s->receivers.begin(), s->receivers.end(), tx.sender) == s->receivers.end())
      return {2, "sender is not a receiver of source " + src.hex()};
  }

  if (tx.is_coinbase()) return {3, "grants are only valid in the genesis block"};
  for (const TxId& src : tx.sources)
    if (!node.utxo_view.is_confirmed(src)) return {3, "source " + src.hex() + " is not confirmed"};

  switch (check_redemption(tx, node.utxo_view, pending)) {
    case Redemption::Ok:
      return {};
    case Redemption::AlreadyConfirmed:
      return {4, "already confirmed"};
    case Redemption::Conflict:
      return {4, "source already redeemed"};
    case Redemption::Overdrawn:
      return {4, "sources overdrawn"};
  }
  return {4, "unreachable"};
}

std::vector<Transaction> create_transaction(const NodeState& node, NodeId receiver, Amount amount, Tick now) {
  if (amount == 0) throw Error(Errc::InvalidParams, "payment amount must be positive");
  std::vector<TxId> claimed;
  for (const auto& e : node.log)
    if (e.tx.sender == node.id) claimed.insert(claimed.end(), e.tx.sources.begin(), e.tx.sources.end());

  std::vector<TxId> sources;
  Amount total = 0;
  for (const auto& ref : node.utxo_view.unspent_of(node.id)) {
    if (total >= amount) break;
    if (std::find(claimed.begin(), claimed.end(), ref.tx) != claimed.end()) continue;
    sources.push_back(ref.tx);
    total += ref.output.value;
  }
  if (total < amount)
    throw Error(Errc::InsufficientFunds, "node " + node_label(node.id) + " holds " + std::to_string(total) +
                                             " spendable, needs " + std::to_string(amount));

  std::vector<Transaction> out;
  Transaction pay{node.id, {receiver}, amount, sources, {}, now};
  out.push_back(signed_copy(pay, node.signing_secret));
  if (total > amount) {
    Transaction change{node.id, {node.id}, total - amount, sources, {}, now};
    out.push_back(signed_copy(change, node.signing_secret));
  }
  return out;
}

ConflictDecision handle_conflict(NodeState& node, const Transaction& first, const Transaction& second) {
  if (!shares_source(first, second)) return ConflictDecision::KeepBoth;
  // Everything already logged was seen before `second`.
  std::vector<Transaction> pending = node.log_txs();
  if (!node.in_log(tx_id(first))) pending.push_back(first);
  if (check_redemption(second, node.utxo_view, pending) == Redemption::Ok) return ConflictDecision::KeepBoth;
  node.rejected.insert(tx_id(second));
  return ConflictDecision::KeepFirst;
}

void EventLog::add(Tick tick, std::optional<NodeId> node, std::string event, std::string digest) {
  records_.push_back({tick, node, std::move(event), std::move(digest)});
}

std::size_t EventLog::count(const std::string& event) const {
  return static_cast<std::size_t>(
      std::count_if(records_.begin(), records_.end(), [&](const EventRecord& r) { return r.event == event; }));
}

std::string EventLog::jsonl() const {
  std::string out;
  for (const auto& r : records_) {
    nlohmann::json j;
    j["tick"] = r.tick;
    if (r.node)
      j["node"] = raw(*r.node);
    else
      j["node"] = nullptr;
    j["event"] = r.event;
    j["payload_digest"] = r.payload_digest;
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::string digest_hex(const Bytes& payload) {
  const auto d = crypto::sha256(payload);
  return to_hex(d.data(), 8);
}

std::string digest_hex(const std::string& payload) { return digest_hex(Bytes(payload.begin(), payload.end())); }

SimNetwork::SimNetwork(NetworkConfig config) : config_(std::move(config)), rng_(config_.seed) {
  config_.validate();
  chain_params_ = ledger::ChainParams::make(config_.n, config_.m_max);

  const Bytes mint_secret = rng_.bytes(32);
  registry_.register_key(kMintId, mint_secret);
  for (const auto& g : config_.genesis_grants)
    genesis_.push_back(signed_copy(Transaction{kMintId, {g.to}, g.amount, {}, {}, 0}, mint_secret));
  StateVector genesis_block;
  try {
    genesis_block = encoding::encode_preliminary_block(genesis_, config_.n);
  } catch (const Error& e) {
    throw Error(Errc::ConfigInvalid, std::string("genesis grants do not fit in one block: ") + e.what());
  }

  nodes_.reserve(config_.nodes);
  for (std::size_t i = 0; i < config_.nodes; ++i) {
    const double theta = rng_.uniform(0.0, std::numbers::pi);
    NodeState node{static_cast<NodeId>(i), ledger::Chain(chain_params_), ledger::EncryptionKey(theta),
                   {}, {}, {}, {}, {}, rng_.bytes(32)};
    registry_.register_key(node.id, node.signing_secret);
    ledger::chain_append(node.chain, genesis_block, node.key);
    node.utxo_view = UtxoView::from_chain(node.chain);
    nodes_.push_back(std::move(node));
  }
  events_.add(0, std::nullopt, "genesis", block_digest(genesis_block));
}

NodeState& SimNetwork::node(NodeId id) {
  if (raw(id) >= nodes_.size()) throw Error(Errc::IndexOutOfRange, "unknown node " + node_label(id));
  return nodes_[raw(id)];
}

const NodeState& SimNetwork::node(NodeId id) const {
  if (raw(id) >= nodes_.size()) throw Error(Errc::IndexOutOfRange, "unknown node " + node_label(id));
  return nodes_[raw(id)];
}

Amount SimNetwork::genesis_supply() const {
  Amount total = 0;
  for (const auto& g : genesis_) total += g.amount;
  return total;
}

Tick SimNetwork::sample_latency() { return rng_.between(config_.latency.min, config_.latency.max); }

void SimNetwork::enqueue(NodeId target, const Message& msg, Tick at) {
  Event ev{at, next_seq_++, target, msg};
  if (is_partitioned(target) || is_partitioned(msg.origin))
    held_.push_back(std::move(ev));
  else
    queue_.emplace(std::make_pair(ev.time, ev.seq), std::move(ev));
}

void SimNetwork::broadcast(NodeId origin, const Message& msg) {
  Message m = msg;
  m.origin = origin;
  for (const auto& peer : nodes_) {
    if (peer.id == origin) continue;
    if (!rng_.bernoulli(config_.delivery_prob)) {
      events_.add(clock_, peer.id, "message_dropped", m.kind == MessageKind::Transaction ? tx_digest(m.tx) : "");
      continue;
    }
    enqueue(peer.id, m, clock_ + sample_latency());
  }
}

void SimNetwork::broadcast_reliable(NodeId origin, const Message& msg) {
  Message m = msg;
  m.origin = origin;
  for (const auto& peer : nodes_)
    if (peer.id != origin) enqueue(peer.id, m, clock_ + sample_latency());
}

void broadcast(SimNetwork& net, NodeId origin, const Message& payload) { net.broadcast(origin, payload); }

void SimNetwork::send(NodeId target, const Message& msg) { enqueue(target, msg, clock_ + sample_latency()); }

bool SimNetwork::commits_in_flight() const {
  return std::any_of(queue_.begin(), queue_.end(),
                     [](const auto& kv) { return kv.second.msg.kind == MessageKind::Commit; });
}

bool SimNetwork::is_partitioned(NodeId id) const {
  auto it = partitioned_until_.find(id);
  return it != partitioned_until_.end() && clock_ < it->second;
}

void SimNetwork::partition(const std::vector<NodeId>& members, Tick duration) {
  for (NodeId id : members) {
    node(id);
    Tick& until = partitioned_until_[id];
    until = std::max(until, clock_ + duration);
    events_.add(clock_, id, "partitioned", digest_hex(std::to_string(clock_ + duration)));
  }
  // Anything already queued to or from a partitioned node waits for the heal.
  for (auto it = queue_.begin(); it != queue_.end();) {
    if (is_partitioned(it->second.target) || is_partitioned(it->second.msg.origin)) {
      held_.push_back(std::move(it->second));
      it = queue_.erase(it);
    } else {
      ++it;
    }
  }
}

void SimNetwork::advance_clock() {
  ++clock_;
  std::vector<NodeId> healed;
  for (auto it = partitioned_until_.begin(); it != partitioned_until_.end();) {
    if (clock_ >= it->second) {
      healed.push_back(it->first);
      it = partitioned_until_.erase(it);
    } else {
      ++it;
    }
  }
  if (healed.empty()) return;
  for (NodeId id : healed) events_.add(clock_, id, "healed", "");
  std::vector<Event> still_held;
  for (auto& ev : held_) {
    if (is_partitioned(ev.target) || is_partitioned(ev.msg.origin)) {
      still_held.push_back(std::move(ev));
      continue;
    }
    ev.time = clock_ + sample_latency();
    ev.seq = next_seq_++;
    queue_.emplace(std::make_pair(ev.time, ev.seq), std::move(ev));
  }
  held_ = std::move(still_held);
}

void SimNetwork::deliver_due() {
  while (!queue_.empty() && queue_.begin()->first.first <= clock_) {
    Event ev = std::move(queue_.begin()->second);
    queue_.erase(queue_.begin());
    deliver(ev);
  }
}

void SimNetwork::deliver(const Event& ev) {
  NodeState& target = node(ev.target);
  switch (ev.msg.kind) {
    case MessageKind::Transaction:
      receive_transaction(target, ev.msg.tx);
      break;
    case MessageKind::Commit:
      receive_commit(target, ev.msg.preliminary);
      break;
    case MessageKind::WrongTxNotice:
      for (const TxId& id : ev.msg.flagged) {
        auto it = std::find_if(target.log.begin(), target.log.end(), [&](const LogEntry& e) { return e.id == id; });
        if (it == target.log.end()) continue;
        // Notice only: move the flagged entry back rather than dropping it.
        LogEntry e = std::move(*it);
        target.log.erase(it);
        target.log.push_back(std::move(e));
      }
      events_.add(clock_, target.id, "wrong_tx_notice", digest_hex(std::to_string(ev.msg.flagged.size())));
      break;
  }
}

void SimNetwork::step() {
  advance_clock();
  deliver_due();
  consensus_step();
}

void SimNetwork::receive_transaction(NodeState& node, const Transaction& tx) {
  const TxId id = tx_id(tx);
  const std::string digest = tx_digest(tx);
  if (node.utxo_view.is_confirmed(id) || node.in_log(id) || node.rejected.contains(id)) {
    events_.add(clock_, node.id, "tx_duplicate", digest);
    return;
  }
  const Verdict v = verify_transaction(tx, node, registry_);
  if (v.valid()) {
    node.log.push_back({tx, id, clock_});
    node.orphans.erase(std::remove(node.orphans.begin(), node.orphans.end(), tx), node.orphans.end());
    events_.add(clock_, node.id, "tx_logged", digest);
    return;
  }
  if (v.rule == 4) {
    for (const auto& e : node.log) {
      if (!shares_source(e.tx, tx)) continue;
      if (handle_conflict(node, e.tx, tx) == ConflictDecision::KeepFirst) {
        events_.add(clock_, node.id, "tx_conflict", digest);
        return;
      }
    }
  }
  if (v.rule == 3 && !tx.sources.empty()) {
    if (std::find(node.orphans.begin(), node.orphans.end(), tx) == node.orphans.end()) node.orphans.push_back(tx);
    events_.add(clock_, node.id, "tx_orphaned", digest);
    return;
  }
  events_.add(clock_, node.id, "tx_invalid_rule" + std::to_string(v.rule), digest);
}

void SimNetwork::receive_commit(NodeState& node, const StateVector& preliminary) {
  node.inbox.push_back(preliminary);
  drain_inbox(node);
}

CommitStatus SimNetwork::apply_commit(NodeState& node, const StateVector& preliminary) {
  std::vector<Transaction> txs;
  try {
    txs = encoding::decode_preliminary_block(preliminary);
  } catch (const Error&) {
    return CommitStatus::Rejected;
  }
  for (const auto& tx : txs) {
    const Verdict v = verify_transaction(tx, node, registry_, txs);
    if (v.rule == 3 && !tx.is_coinbase()) return CommitStatus::Waiting;
    if (!v.valid()) return CommitStatus::Rejected;
  }
  if (node.chain.length() >= node.chain.params().m_max) return CommitStatus::Rejected;
  ledger::chain_append(node.chain, preliminary, node.key);
  for (const auto& tx : txs) node.utxo_view.apply(tx);
  prune_log(node);
  retry_orphans(node);
  return CommitStatus::Applied;
}

void SimNetwork::drain_inbox(NodeState& node) {
  bool progress = true;
  while (progress) {
    progress = false;
    for (std::size_t i = 0; i < node.inbox.size(); ++i) {
      const StateVector prelim = node.inbox[i];
      const CommitStatus status = apply_commit(node, prelim);
      if (status == CommitStatus::Waiting) continue;
      node.inbox.erase(node.inbox.begin() + static_cast<std::ptrdiff_t>(i));
      events_.add(clock_, node.id, status == CommitStatus::Applied ? "commit_applied" : "commit_rejected",
                  block_digest(prelim));
      progress = true;
      break;
    }
  }
}

void SimNetwork::prune_log(NodeState& node) {
  std::vector<LogEntry> kept;
  std::vector<Transaction> kept_txs;
  for (auto& e : node.log) {
    if (node.utxo_view.is_confirmed(e.id)) continue;
    const Verdict v = verify_transaction(e.tx, node, registry_, kept_txs);
    if (!v.valid()) {
      events_.add(clock_, node.id, "tx_evicted", tx_digest(e.tx));
      continue;
    }
    kept_txs.push_back(e.tx);
    kept.push_back(std::move(e));
  }
  node.log = std::move(kept);
}

void SimNetwork::retry_orphans(NodeState& node) {
  std::vector<Transaction> orphans = std::move(node.orphans);
  node.orphans.clear();
  for (const auto& tx : orphans) receive_transaction(node, tx);
}

void SimNetwork::submit(NodeId from, const Transaction& tx) {
  receive_transaction(node(from), tx);
  broadcast(from, Message{MessageKind::Transaction, from, tx, {}, {}});
}

std::vector<Transaction> SimNetwork::submit_payment(NodeId from, NodeId to, Amount amount) {
  node(to);
  auto txs = create_transaction(node(from), to, amount, clock_);
  for (const auto& tx : txs) submit(from, tx);
  return txs;
}

std::optional<NodeId> SimNetwork::next_proposer() {
  const std::size_t count = nodes_.size();
  const std::size_t start = last_proposer_ ? (*last_proposer_ + 1) % count : 0;
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t i = (start + k) % count;
    const NodeState& nd = nodes_[i];
    if (!nd.log.empty() && nd.chain.length() < nd.chain.params().m_max) {
      last_proposer_ = i;
      return nd.id;
    }
  }
  return std::nullopt;
}

std::optional<Decision> SimNetwork::consensus_step() {
  if (commits_in_flight()) return std::nullopt;
  const auto proposer = next_proposer();
  if (!proposer) return std::nullopt;
  return run_consensus_round(*this, *proposer);
}

bool SimNetwork::quiescent() const {
  if (pending_events() != 0) return false;
  return std::all_of(nodes_.begin(), nodes_.end(), [](const NodeState& nd) {
    return nd.log.empty() || nd.chain.length() >= nd.chain.params().m_max;
  });
}

std::vector<NodeId> select_voters(SimNetwork& net, NodeId proposer) {
  const std::size_t k = net.config_.consensus.sample_size;
  std::vector<NodeId> peers;
  for (const auto& nd : net.nodes_)
    if (nd.id != proposer) peers.push_back(nd.id);
  if (k > peers.size())
    throw Error(Errc::SampleTooLarge, "sample size " + std::to_string(k) + " exceeds " +
                                          std::to_string(peers.size()) + " available voters");
  // Partial Fisher-Yates.
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(net.rng_.below(peers.size() - i));
    std::swap(peers[i], peers[j]);
  }
  peers.resize(k);
  return peers;
}

Decision run_consensus_round(SimNetwork& net, NodeId proposer_id) {
  NodeState& proposer = net.node(proposer_id);
  if (proposer.log.empty()) throw Error(Errc::EmptyLog, "node " + node_label(proposer_id) + " has nothing to propose");
  if (proposer.chain.length() >= proposer.chain.params().m_max)
    throw Error(Errc::CapacityExceeded, "chain of node " + node_label(proposer_id) + " is full");

  Decision d;
  const std::size_t take = std::min(net.config_.consensus.block_size, proposer.log.size());
  for (std::size_t i = 0; i < take; ++i) d.txs.push_back(proposer.log[i].tx);
  while (true) {
    try {
      d.preliminary = encoding::encode_preliminary_block(d.txs, net.config_.n);
      break;
    } catch (const Error& e) {
      if (e.code() != Errc::PayloadTooLarge || d.txs.size() == 1) throw;
      d.txs.pop_back();
    }
  }

  const std::uint64_t round = net.next_round_++;
  d.voters = select_voters(net, proposer_id);
  const Bytes payload = proposal_payload(round, proposer_id, d.voters, d.preliminary);
  const Bytes proposal_tag = keyed_tag(proposer.signing_secret, payload);
  const std::string digest = block_digest(d.preliminary);
  net.events_.add(net.clock_, proposer_id, "proposal", digest);

  std::vector<std::size_t> approvals(d.txs.size(), 0);
  for (NodeId vid : d.voters) {
    if (!net.reachable(proposer_id, vid)) {
      net.events_.add(net.clock_, vid, "vote_unreachable", digest);
      continue;
    }
    const NodeState& voter = net.node(vid);
    const Bytes* key = net.registry_.find(proposer_id);
    if (!key || keyed_tag(*key, payload) != proposal_tag) {
      net.events_.add(net.clock_, vid, "vote_bad_proposal", digest);
      continue;
    }
    std::vector<Transaction> pending = voter.log_txs();
    pending.insert(pending.end(), d.txs.begin(), d.txs.end());
    std::string bits;
    for (std::size_t j = 0; j < d.txs.size(); ++j) {
      const bool ok = verify_transaction(d.txs[j], voter, net.registry_, pending).valid();
      if (ok) ++approvals[j];
      bits += ok ? '1' : '0';
    }
    net.events_.add(net.clock_, vid, "vote", digest_hex(digest + bits));
  }

  const double needed = net.config_.consensus.approve_threshold * static_cast<double>(d.voters.size());
  for (std::size_t j = 0; j < d.txs.size(); ++j)
    if (static_cast<double>(approvals[j]) + 1e-9 < needed) d.flagged.push_back(tx_id(d.txs[j]));
  d.accepted = d.flagged.empty();

  if (!d.accepted) {
    net.events_.add(net.clock_, proposer_id, "proposal_rejected", digest);
    for (const TxId& id : d.flagged) {
      auto it = std::find_if(proposer.log.begin(), proposer.log.end(), [&](const LogEntry& e) { return e.id == id; });
      if (it == proposer.log.end()) continue;
      LogEntry e = std::move(*it);
      proposer.log.erase(it);
      proposer.log.push_back(std::move(e));
    }
    net.broadcast(proposer_id, Message{MessageKind::WrongTxNotice, proposer_id, {}, {}, d.flagged});
    return d;
  }

  const CommitStatus status = net.apply_commit(proposer, d.preliminary);
  if (status != CommitStatus::Applied)
    throw Error(Errc::ChainMismatch, "proposer could not apply its own accepted block");
  net.events_.add(net.clock_, proposer_id, "block_confirmed", digest);
  net.broadcast_reliable(proposer_id, Message{MessageKind::Commit, proposer_id, {}, d.preliminary, {}});
  return d;
}

}  // namespace qbc::net
