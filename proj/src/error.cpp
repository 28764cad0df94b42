#include "qbc/error.hpp"

namespace qbc {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::NonFinite: return "NonFinite";
    case Errc::LinearDependence: return "LinearDependence";
    case Errc::NotPSD: return "NotPSD";
    case Errc::RadiusTooSmall: return "RadiusTooSmall";
    case Errc::CapacityExceeded: return "CapacityExceeded";
    case Errc::PivotFailure: return "PivotFailure";
    case Errc::NotOrthonormal: return "NotOrthonormal";
    case Errc::NotOrthogonal: return "NotOrthogonal";
    case Errc::InvalidParams: return "InvalidParams";
    case Errc::IndexOutOfRange: return "IndexOutOfRange";
    case Errc::NotPowerOfTwoDim: return "NotPowerOfTwoDim";
    case Errc::PayloadTooLarge: return "PayloadTooLarge";
    case Errc::MalformedEncoding: return "MalformedEncoding";
    case Errc::EmptyBlock: return "EmptyBlock";
    case Errc::NotUnitNorm: return "NotUnitNorm";
    case Errc::InsufficientFunds: return "InsufficientFunds";
    case Errc::UnknownSigner: return "UnknownSigner";
    case Errc::SampleTooLarge: return "SampleTooLarge";
    case Errc::EmptyLog: return "EmptyLog";
    case Errc::ChainMismatch: return "ChainMismatch";
    case Errc::TransactionSetMismatch: return "TransactionSetMismatch";
    case Errc::UnconfirmedBlock: return "UnconfirmedBlock";
    case Errc::AlreadyMinted: return "AlreadyMinted";
    case Errc::NoValueForOwner: return "NoValueForOwner";
    case Errc::InvalidToken: return "InvalidToken";
    case Errc::Unauthorized: return "Unauthorized";
    case Errc::ConfigInvalid: return "ConfigInvalid";
    case Errc::MalformedDump: return "MalformedDump";
  }
  return "Unknown";
}

}  // namespace qbc
