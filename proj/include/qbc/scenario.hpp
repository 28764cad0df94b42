#pragma once

// Scripted end-to-end runs: parse a JSON scenario, drive the simulator tick
// by tick, check end-of-run invariants and produce the event log, per-node
// ledger dumps and a summary.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "qbc/network.hpp"

namespace qbc::scenario {

enum class ActionKind { Send, Partition, Tamper, ForkCheck, DoubleSpend, MintToken, ForgeToken, TransferToken };

enum class TamperTarget { Preliminary, Disclosed, Lifted };

struct Action {
  ActionKind kind = ActionKind::Send;
  Tick tick = 0;
  // send / double_spend
  NodeId from{};
  NodeId to{};
  NodeId to_b{};
  Amount amount = 0;
  // partition
  std::vector<NodeId> members;
  Tick duration = 0;
  // tamper
  NodeId node{};
  Index block = 0;
  TamperTarget target = TamperTarget::Disclosed;
  Index coord = 0;
  double delta = 0.0;
  // tokens: mint uses node (machine's ledger), block and to (owner);
  // forge and transfer refer to a token by mint order.
  std::size_t token = 0;
};

struct Config {
  std::string name;
  net::NetworkConfig network;
  std::vector<Action> script;
};

/// Throws ConfigInvalid on syntax errors, unknown keys, bad types or values.
Config parse_config(const std::string& text);
Config load_config(const std::filesystem::path& path);

struct RunReport {
  nlohmann::json summary;
  std::string events_jsonl;
  std::vector<std::string> ledgers;  // one dump per node, in node order
  std::vector<std::string> failures;
  bool runtime_failure = false;

  /// 0 success, 1 runtime or invariant failure.
  int exit_code() const { return failures.empty() && !runtime_failure ? 0 : 1; }
};

RunReport run_scenario(const Config& config);

/// events.jsonl, ledger_node<i>.json, summary.json.
void write_outputs(const RunReport& report, const std::filesystem::path& dir);

}  // namespace qbc::scenario
