#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace qbc {

enum class Errc {
  DimensionMismatch,
  NonFinite,
  LinearDependence,
  NotPSD,
  RadiusTooSmall,
  CapacityExceeded,
  PivotFailure,
  NotOrthonormal,
  NotOrthogonal,
  InvalidParams,
  IndexOutOfRange,
  NotPowerOfTwoDim,
  PayloadTooLarge,
  MalformedEncoding,
  EmptyBlock,
  NotUnitNorm,
  InsufficientFunds,
  UnknownSigner,
  SampleTooLarge,
  EmptyLog,
  ChainMismatch,
  TransactionSetMismatch,
  UnconfirmedBlock,
  AlreadyMinted,
  NoValueForOwner,
  InvalidToken,
  Unauthorized,
  ConfigInvalid,
  MalformedDump,
};

std::string_view to_string(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace qbc
