#include "waytrain/error.hpp"

namespace waytrain {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::ContractViolation: return "contract-violation";
    case ErrorCode::InsufficientData: return "insufficient-data";
    case ErrorCode::Ordering: return "ordering";
    case ErrorCode::State: return "state";
    case ErrorCode::PhotoRequired: return "photo-required";
    case ErrorCode::NotFound: return "not-found";
    case ErrorCode::Validation: return "validation";
    case ErrorCode::Precondition: return "precondition";
    case ErrorCode::IncompleteNegotiation: return "incomplete-negotiation";
    case ErrorCode::NoDecisionPoints: return "no-decision-points";
    case ErrorCode::Classification: return "classification";
    case ErrorCode::Integrity: return "integrity";
    case ErrorCode::SyncPolicy: return "sync-policy";
    case ErrorCode::Transparency: return "transparency";
    case ErrorCode::ConsentRequired: return "consent-required";
    case ErrorCode::ModalityConstraint: return "modality-constraint";
    case ErrorCode::Role: return "role";
    case ErrorCode::Input: return "input";
    case ErrorCode::Profile: return "profile";
    case ErrorCode::Conflict: return "conflict";
    case ErrorCode::FeedUnavailable: return "feed-unavailable";
    case ErrorCode::Range: return "range";
  }
  return "unknown";
}

void fail(ErrorCode code, const std::string& message) {
  throw Error(code, std::string(to_string(code)) + ": " + message);
}

}  // namespace waytrain
