#include "qbc/dump.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "qbc/error.hpp"

namespace qbc::dump {

using nlohmann::json;

std::string format_double(double x) {
  if (x == 0.0) return "0";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string complex_array(const StateVector& v) {
  std::string s = "[";
  for (Index i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += '[';
    s += format_double(v(i).real());
    s += ',';
    s += format_double(v(i).imag());
    s += ']';
  }
  s += ']';
  return s;
}

StateVector parse_complex_array(const json& j) {
  if (!j.is_array()) throw Error(Errc::MalformedDump, "expected an array of [re, im] pairs");
  StateVector v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto& e = j[i];
    if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number())
      throw Error(Errc::MalformedDump, "amplitude " + std::to_string(i) + " is not an [re, im] pair");
    v(static_cast<Index>(i)) = cd(e[0].get<double>(), e[1].get<double>());
  }
  return v;
}

json tx_to_json(const Transaction& tx) {
  json receivers = json::array();
  for (NodeId r : tx.receivers) receivers.push_back(raw(r));
  json sources = json::array();
  for (const TxId& s : tx.sources) sources.push_back(s.hex());
  return json{{"id", tx_id(tx).hex()},
              {"sender", raw(tx.sender)},
              {"receivers", receivers},
              {"amount", tx.amount},
              {"sources", sources},
              {"timestamp", tx.timestamp},
              {"signature", to_hex(tx.signature)}};
}

Transaction tx_from_json(const json& j) {
  try {
    Transaction tx;
    tx.sender = NodeId{j.at("sender").get<std::uint32_t>()};
    for (const auto& r : j.at("receivers")) tx.receivers.push_back(NodeId{r.get<std::uint32_t>()});
    tx.amount = j.at("amount").get<Amount>();
    for (const auto& s : j.at("sources")) tx.sources.push_back(TxId::from_hex(s.get<std::string>()));
    tx.timestamp = j.at("timestamp").get<Tick>();
    tx.signature = from_hex(j.at("signature").get<std::string>());
    return tx;
  } catch (const json::exception& e) {
    throw Error(Errc::MalformedDump, std::string("transaction record: ") + e.what());
  } catch (const Error& e) {
    throw Error(Errc::MalformedDump, e.what());
  }
}

std::string write_ledger(const ledger::Chain& chain, std::optional<NodeId> node) {
  const auto& p = chain.params();
  std::ostringstream os;
  os << "{\n  \"format\": \"qbc-ledger/1\",\n";
  if (node) os << "  \"node\": " << raw(*node) << ",\n";
  os << "  \"params\": {\"n\": " << p.n << ", \"m_max\": " << p.m_max << ", \"q\": " << p.q
     << ", \"r\": " << format_double(p.r) << "},\n";
  os << "  \"blocks\": [";
  for (Index i = 1; i <= chain.length(); ++i) {
    const auto& enc = chain.blocks()[static_cast<std::size_t>(i - 1)];
    json txs = json::array();
    Tick stamp = 0;
    try {
      for (const auto& tx : ledger::read_block(chain, i)) txs.push_back(tx_to_json(tx));
      stamp = ledger::block_timestamp(chain, i);
    } catch (const Error&) {
      // An undecodable (tampered) record is dumped with an empty transaction list.
      txs = json::array();
    }
    os << (i > 1 ? ",\n" : "\n");
    os << "    {\"index\": " << i << ", \"timestamp\": " << stamp
       << ",\n     \"disclosed\": " << complex_array(enc.head(p.n))
       << ",\n     \"encrypted\": " << complex_array(enc.tail(p.m_max)) << ",\n     \"tx_list\": " << txs.dump()
       << "}";
  }
  os << (chain.length() ? "\n  ]\n}\n" : "]\n}\n");
  return os.str();
}

LedgerDump parse_ledger(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(Errc::MalformedDump, e.what());
  }
  try {
    if (j.at("format").get<std::string>() != "qbc-ledger/1") throw Error(Errc::MalformedDump, "unknown format tag");
    LedgerDump d;
    if (j.contains("node")) d.node = j.at("node").get<std::uint32_t>();
    const auto& p = j.at("params");
    d.params = ledger::ChainParams::make(p.at("n").get<Index>(), p.at("m_max").get<Index>());
    for (const auto& b : j.at("blocks")) {
      BlockRecord rec;
      rec.index = b.at("index").get<Index>();
      rec.timestamp = b.at("timestamp").get<Tick>();
      rec.disclosed = parse_complex_array(b.at("disclosed"));
      rec.encrypted = parse_complex_array(b.at("encrypted"));
      if (rec.disclosed.size() != d.params.n || rec.encrypted.size() != d.params.m_max)
        throw Error(Errc::MalformedDump, "block " + std::to_string(rec.index) + " has wrong dimensions");
      for (const auto& t : b.at("tx_list")) rec.txs.push_back(tx_from_json(t));
      if (rec.index != static_cast<Index>(d.blocks.size()) + 1)
        throw Error(Errc::MalformedDump, "block indices are not consecutive");
      d.blocks.push_back(std::move(rec));
    }
    return d;
  } catch (const json::exception& e) {
    throw Error(Errc::MalformedDump, e.what());
  } catch (const Error& e) {
    if (e.code() == Errc::MalformedDump) throw;
    throw Error(Errc::MalformedDump, e.what());
  }
}

LedgerDump load_ledger(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::MalformedDump, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_ledger(ss.str());
}

std::string pretty(const LedgerDump& d) {
  std::ostringstream os;
  os << "ledger";
  if (d.node) os << " of node " << *d.node;
  os << ": n=" << d.params.n << " m_max=" << d.params.m_max << " r=" << format_double(d.params.r) << ", "
     << d.blocks.size() << " block(s)\n";
  for (const auto& b : d.blocks) {
    os << "  block " << b.index << " @" << b.timestamp << "  |disclosed|=" << format_double(b.disclosed.norm())
       << "  |encrypted|=" << format_double(b.encrypted.norm()) << "\n";
    for (const auto& tx : b.txs) {
      os << "    " << tx_id(tx).hex() << "  ";
      if (tx.is_coinbase())
        os << "grant";
      else
        os << raw(tx.sender);
      os << " ->";
      for (NodeId r : tx.receivers) os << ' ' << raw(r);
      os << "  amount " << tx.amount << "  t=" << tx.timestamp << "\n";
    }
  }
  return os.str();
}

DiffReport diff(const LedgerDump& a, const LedgerDump& b, double tol) {
  DiffReport rep;
  if (a.params.n != b.params.n || a.params.m_max != b.params.m_max) {
    rep.differences.push_back("chain parameters differ");
    return rep;
  }
  if (a.blocks.size() != b.blocks.size())
    rep.differences.push_back("block count " + std::to_string(a.blocks.size()) + " vs " +
                              std::to_string(b.blocks.size()));
  const std::size_t common = std::min(a.blocks.size(), b.blocks.size());
  for (std::size_t i = 0; i < common; ++i) {
    const auto& x = a.blocks[i];
    const auto& y = b.blocks[i];
    const double gap = (x.disclosed - y.disclosed).cwiseAbs().maxCoeff();
    if (gap > tol)
      rep.differences.push_back("block " + std::to_string(i + 1) + ": disclosed parts differ by " +
                                format_double(gap));
    if (x.txs != y.txs) rep.differences.push_back("block " + std::to_string(i + 1) + ": transaction lists differ");
  }
  return rep;
}

}  // namespace qbc::dump
