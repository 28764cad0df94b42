#include "qbc/utxo.hpp"

#include <algorithm>

#include "qbc/error.hpp"

namespace qbc {

SpendKey spend_key(const Transaction& tx) {
  SpendKey k{tx.sender, tx.sources};
  std::sort(k.sources.begin(), k.sources.end());
  return k;
}

UtxoView UtxoView::from_chain(const ledger::Chain& chain) {
  UtxoView view;
  for (Index i = 1; i <= chain.length(); ++i)
    for (const auto& tx : ledger::read_block(chain, i)) view.apply(tx);
  return view;
}

void UtxoView::apply(const Transaction& tx) {
  const TxId id = tx_id(tx);
  if (!tx.is_coinbase()) {
    const SpendKey key = spend_key(tx);
    auto it = pools_.find(key);
    if (it == pools_.end()) {
      Pool pool;
      for (const TxId& src : tx.sources) {
        auto outs = unspent_.find(src);
        if (outs == unspent_.end() || !outs->second.contains(tx.sender))
          throw Error(Errc::ChainMismatch, "transaction " + id.hex() + " redeems a missing output");
        pool.capacity += outs->second.at(tx.sender).value;
        outs->second.erase(tx.sender);
        if (outs->second.empty()) unspent_.erase(outs);
      }
      it = pools_.emplace(key, pool).first;
    }
    if (it->second.remaining() < tx.total_out())
      throw Error(Errc::ChainMismatch, "transaction " + id.hex() + " overdraws its sources");
    it->second.spent += tx.total_out();
  }
  confirmed_.emplace(id, tx);
  for (NodeId r : tx.receivers) unspent_[id][r] = Output{r, tx.amount, next_seq_++};
}

const Transaction* UtxoView::confirmed_tx(const TxId& id) const {
  auto it = confirmed_.find(id);
  return it == confirmed_.end() ? nullptr : &it->second;
}

std::optional<Amount> UtxoView::unspent_value(const TxId& tx, NodeId owner) const {
  auto it = unspent_.find(tx);
  if (it == unspent_.end()) return std::nullopt;
  auto jt = it->second.find(owner);
  if (jt == it->second.end()) return std::nullopt;
  return jt->second.value;
}

const Pool* UtxoView::pool(const SpendKey& key) const {
  auto it = pools_.find(key);
  return it == pools_.end() ? nullptr : &it->second;
}

std::vector<OutputRef> UtxoView::unspent_of(NodeId owner) const {
  std::vector<OutputRef> out;
  for (const auto& [id, outs] : unspent_) {
    auto it = outs.find(owner);
    if (it != outs.end()) out.push_back({id, it->second});
  }
  std::sort(out.begin(), out.end(), [](const OutputRef& a, const OutputRef& b) { return a.output.seq < b.output.seq; });
  return out;
}

Amount UtxoView::balance(NodeId owner) const {
  Amount total = 0;
  for (const auto& ref : unspent_of(owner)) total += ref.output.value;
  return total;
}

Amount UtxoView::supply() const {
  Amount total = 0;
  for (const auto& [id, outs] : unspent_)
    for (const auto& [owner, o] : outs) total += o.value;
  for (const auto& [key, pool] : pools_) total += pool.remaining();
  return total;
}

Redemption check_redemption(const Transaction& tx, const UtxoView& view, std::span<const Transaction> pending) {
  const TxId id = tx_id(tx);
  if (view.is_confirmed(id)) return Redemption::AlreadyConfirmed;
  const SpendKey key = spend_key(tx);

  Amount available = 0;
  if (const Pool* pool = view.pool(key)) {
    available = pool->remaining();
  } else {
    for (const TxId& src : tx.sources) {
      const auto v = view.unspent_value(src, tx.sender);
      if (!v) return Redemption::Conflict;
      available += *v;
    }
  }

  Amount drawn = 0;
  std::vector<TxId> counted;
  for (const auto& other : pending) {
    if (other.sender != tx.sender || other.is_coinbase()) continue;
    const TxId oid = tx_id(other);
    if (oid == id || std::find(counted.begin(), counted.end(), oid) != counted.end()) continue;
    counted.push_back(oid);
    const SpendKey okey = spend_key(other);
    if (okey == key) {
      drawn += other.total_out();
      continue;
    }
    for (const TxId& s : okey.sources)
      if (std::binary_search(key.sources.begin(), key.sources.end(), s)) return Redemption::Conflict;
  }
  if (drawn > available || tx.total_out() > available - drawn) return Redemption::Overdrawn;
  return Redemption::Ok;
}

}  // namespace qbc
