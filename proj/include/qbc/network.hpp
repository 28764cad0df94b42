#pragma once

// Deterministic discrete-event simulation of the peer network.
//
// Time advances in integer ticks. Within a tick the simulator delivers due
// messages in (delivery time, sequence number) order, then the scenario
// driver runs scripted actions, then at most one consensus round runs.
// Transactions are broadcast with per-recipient delivery probability and
// sampled latency. Committed blocks are broadcast to every peer (latency
// still applies); a new round starts only once no commit is in flight, so
// rounds are sequential. Partitioned nodes neither send nor receive: their
// messages are held and rescheduled with fresh latency when the partition
// ends, which may reorder them.

#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "qbc/encoding.hpp"
#include "qbc/ledger.hpp"
#include "qbc/rng.hpp"
#include "qbc/signing.hpp"
#include "qbc/utxo.hpp"

namespace qbc::net {

struct Grant {
  NodeId to{};
  Amount amount = 0;
};

struct LatencyModel {
  Tick min = 1;
  Tick max = 1;
};

struct ConsensusConfig {
  std::size_t sample_size = 1;      // voters drawn per proposal
  double approve_threshold = 1.0;   // fraction of sampled voters that must approve each transaction
  std::size_t block_size = 4;       // max transactions per preliminary block
};

struct NetworkConfig {
  std::uint64_t seed = 0;
  std::size_t nodes = 0;
  Index n = 256;
  Index m_max = 16;
  ConsensusConfig consensus;
  double delivery_prob = 1.0;
  LatencyModel latency;
  std::vector<Grant> genesis_grants;

  /// Throws ConfigInvalid.
  void validate() const;
};

struct LogEntry {
  Transaction tx;
  TxId id;
  Tick received = 0;
};

struct NodeState {
  NodeId id{};
  ledger::Chain chain;
  ledger::EncryptionKey key;
  std::vector<LogEntry> log;          // verified, unconfirmed; arrival order
  UtxoView utxo_view;                 // derived from chain
  std::vector<StateVector> inbox;     // committed preliminaries waiting for their sources
  std::vector<Transaction> orphans;   // transactions whose sources are not confirmed here yet
  std::set<TxId> rejected;            // lost a first-seen conflict locally
  Bytes signing_secret;

  bool in_log(const TxId& id) const;
  std::vector<Transaction> log_txs() const;
};

struct Verdict {
  int rule = 0;  // 0 = valid, otherwise the first violated rule (1..4)
  std::string detail;

  bool valid() const { return rule == 0; }
};

/// Rules, in order: (1) properly signed by the sender; (2) the sender is a
/// receiver of every source; (3) every source is confirmed in the node's
/// chain; (4) no source is redeemed by the chain or by `pending` beyond its
/// value. Without `pending` the node's log is used.
Verdict verify_transaction(const Transaction& tx, const NodeState& node, const KeyRegistry& registry);
Verdict verify_transaction(const Transaction& tx, const NodeState& node, const KeyRegistry& registry,
                           std::span<const Transaction> pending);

/// Oldest-first source selection over outputs not already claimed by the
/// node's log. Returns the payment and, when the sources exceed the amount,
/// a change transaction back to the sender; both list the same sources.
std::vector<Transaction> create_transaction(const NodeState& node, NodeId receiver, Amount amount, Tick now);

enum class ConflictDecision { KeepFirst, KeepBoth };

/// First-seen rule: `first` arrived earlier. If `second` cannot be honoured
/// alongside `first` it is marked rejected locally.
ConflictDecision handle_conflict(NodeState& node, const Transaction& first, const Transaction& second);

enum class MessageKind { Transaction, Commit, WrongTxNotice };

struct Message {
  MessageKind kind = MessageKind::Transaction;
  NodeId origin{};
  Transaction tx;               // Transaction
  StateVector preliminary;      // Commit
  std::vector<TxId> flagged;    // WrongTxNotice
};

struct EventRecord {
  Tick tick = 0;
  std::optional<NodeId> node;
  std::string event;
  std::string payload_digest;
};

class EventLog {
 public:
  void add(Tick tick, std::optional<NodeId> node, std::string event, std::string digest);
  const std::vector<EventRecord>& records() const { return records_; }
  std::size_t count(const std::string& event) const;
  /// One JSON object per line: {tick, node, event, payload_digest}.
  std::string jsonl() const;

 private:
  std::vector<EventRecord> records_;
};

/// First 8 bytes of SHA-256, hex.
std::string digest_hex(const Bytes& payload);
std::string digest_hex(const std::string& payload);

struct Decision {
  bool accepted = false;
  std::vector<NodeId> voters;
  std::vector<Transaction> txs;
  StateVector preliminary;
  std::vector<TxId> flagged;  // transactions that missed the approval threshold
};

enum class CommitStatus { Applied, Waiting, Rejected };

class SimNetwork {
 public:
  explicit SimNetwork(NetworkConfig config);

  const NetworkConfig& config() const { return config_; }
  ledger::ChainParams chain_params() const { return chain_params_; }
  Tick clock() const { return clock_; }
  SimRng& rng() { return rng_; }
  const KeyRegistry& registry() const { return registry_; }
  EventLog& events() { return events_; }
  const EventLog& events() const { return events_; }

  std::vector<NodeState>& nodes() { return nodes_; }
  const std::vector<NodeState>& nodes() const { return nodes_; }
  NodeState& node(NodeId id);
  const NodeState& node(NodeId id) const;
  const std::vector<Transaction>& genesis() const { return genesis_; }
  Amount genesis_supply() const;

  /// Queues a copy for every other node with probability delivery_prob.
  void broadcast(NodeId origin, const Message& msg);
  /// Queues a copy for every other node.
  void broadcast_reliable(NodeId origin, const Message& msg);
  void send(NodeId target, const Message& msg);

  std::size_t pending_events() const { return queue_.size() + held_.size(); }
  bool commits_in_flight() const;

  /// Advances the clock one tick and lifts expired partitions.
  void advance_clock();
  /// Delivers every queued message due at or before the current tick.
  void deliver_due();
  /// advance_clock + deliver_due + consensus_step.
  void step();

  void partition(const std::vector<NodeId>& members, Tick duration);
  bool is_partitioned(NodeId id) const;
  bool reachable(NodeId a, NodeId b) const { return !is_partitioned(a) && !is_partitioned(b); }

  /// Logs locally (subject to verification) and broadcasts.
  void submit(NodeId from, const Transaction& tx);
  /// create_transaction + submit for each result.
  std::vector<Transaction> submit_payment(NodeId from, NodeId to, Amount amount);

  void receive_transaction(NodeState& node, const Transaction& tx);
  void receive_commit(NodeState& node, const StateVector& preliminary);
  CommitStatus apply_commit(NodeState& node, const StateVector& preliminary);

  /// Round-robin over nodes with a non-empty log and spare chain capacity.
  std::optional<NodeId> next_proposer();
  /// Runs one consensus round unless a commit is still in flight.
  std::optional<Decision> consensus_step();

  bool quiescent() const;

  friend Decision run_consensus_round(SimNetwork& net, NodeId proposer);
  friend std::vector<NodeId> select_voters(SimNetwork& net, NodeId proposer);

 private:
  struct Event {
    Tick time = 0;
    std::uint64_t seq = 0;
    NodeId target{};
    Message msg;
  };

  void enqueue(NodeId target, const Message& msg, Tick at);
  Tick sample_latency();
  void deliver(const Event& ev);
  void drain_inbox(NodeState& node);
  void prune_log(NodeState& node);
  void retry_orphans(NodeState& node);

  NetworkConfig config_;
  ledger::ChainParams chain_params_;
  SimRng rng_;
  KeyRegistry registry_;
  EventLog events_;
  std::vector<NodeState> nodes_;
  std::vector<Transaction> genesis_;
  Tick clock_ = 0;
  std::uint64_t next_seq_ = 0;
  std::uint64_t next_round_ = 0;
  std::optional<std::size_t> last_proposer_;
  std::map<std::pair<Tick, std::uint64_t>, Event> queue_;
  std::vector<Event> held_;
  std::map<NodeId, Tick> partitioned_until_;
};

/// Free-function form of SimNetwork::broadcast.
void broadcast(SimNetwork& net, NodeId origin, const Message& payload);

/// Uniform sample without replacement of sample_size peers, excluding the
/// proposer, drawn from the run RNG.
std::vector<NodeId> select_voters(SimNetwork& net, NodeId proposer);

/// Propose, vote, decide. On acceptance the proposer appends the block and
/// broadcasts it; on rejection a wrong-transaction notice is broadcast and
/// the flagged transactions move to the back of the proposer's log.
Decision run_consensus_round(SimNetwork& net, NodeId proposer);

}  // namespace qbc::net
