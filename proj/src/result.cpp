#include "tiermem/result.hpp"

namespace tiermem {

std::string_view to_string(Errc code) {
    switch (code) {
        case Errc::BudgetExceeded: return "BudgetExceeded";
        case Errc::MessageTooLarge: return "MessageTooLarge";
        case Errc::QueueFull: return "QueueFull";
        case Errc::SummaryTooLarge: return "SummaryTooLarge";
        case Errc::EmptyFragment: return "EmptyFragment";
        case Errc::CapacityExceeded: return "CapacityExceeded";
        case Errc::NotFound: return "NotFound";
        case Errc::OutOfOrder: return "OutOfOrder";
        case Errc::IdCollision: return "IdCollision";
        case Errc::EmptyQuery: return "EmptyQuery";
        case Errc::InvalidRange: return "InvalidRange";
        case Errc::EmptyText: return "EmptyText";
        case Errc::DuplicateName: return "DuplicateName";
        case Errc::ParseError: return "ParseError";
        case Errc::ValidationError: return "ValidationError";
        case Errc::ProcessorUnavailable: return "ProcessorUnavailable";
        case Errc::CorruptSnapshot: return "CorruptSnapshot";
        case Errc::InvalidEvent: return "InvalidEvent";
        case Errc::InvalidConfig: return "InvalidConfig";
        case Errc::TooFewFragments: return "TooFewFragments";
        case Errc::CycleDetected: return "CycleDetected";
        case Errc::KeyNotFound: return "KeyNotFound";
        case Errc::Io: return "Io";
    }
    return "Unknown";
}

std::string Error::what() const {
    std::string out{to_string(code)};
    if (!message.empty()) {
        out += ": ";
        out += message;
    }
    return out;
}

}  // namespace tiermem
