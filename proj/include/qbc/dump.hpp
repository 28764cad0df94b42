#pragma once

// Ledger dump: a JSON document with chain parameters and one record per
// block {index, timestamp, disclosed, encrypted, tx_list}. Complex numbers
// are [re, im] pairs printed with 17 significant digits. The encryption
// key has no field in this schema.

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "qbc/encoding.hpp"
#include "qbc/ledger.hpp"

namespace qbc::dump {

/// printf("%.17g") with "-0" normalized to "0".
std::string format_double(double x);
/// "[[re,im],[re,im],...]"
std::string complex_array(const StateVector& v);
StateVector parse_complex_array(const nlohmann::json& j);

nlohmann::json tx_to_json(const Transaction& tx);
Transaction tx_from_json(const nlohmann::json& j);

struct BlockRecord {
  Index index = 0;
  Tick timestamp = 0;
  StateVector disclosed;
  StateVector encrypted;
  std::vector<Transaction> txs;
};

struct LedgerDump {
  std::optional<std::uint32_t> node;
  ledger::ChainParams params;
  std::vector<BlockRecord> blocks;
};

std::string write_ledger(const ledger::Chain& chain, std::optional<NodeId> node = std::nullopt);
/// Throws MalformedDump on syntax or schema errors.
LedgerDump parse_ledger(const std::string& text);
LedgerDump load_ledger(const std::string& path);

/// Human-readable listing of the disclosed record.
std::string pretty(const LedgerDump& d);

struct DiffReport {
  std::vector<std::string> differences;
  bool identical() const { return differences.empty(); }
};

/// Structural comparison of the disclosed records (params, block count,
/// disclosed amplitudes within tol, transaction lists).
DiffReport diff(const LedgerDump& a, const LedgerDump& b, double tol = 1e-9);

}  // namespace qbc::dump
