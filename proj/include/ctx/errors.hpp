#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

namespace ctx {

enum class Errc {
    // ontology
    DuplicateLayer,
    UnknownAttachmentClass,
    CycleIntroduced,
    DuplicateName,
    UpperLayerImmutable,
    UnknownLayer,
    DanglingDependents,
    UnknownClass,
    // knowledge base
    ValidationFailed,
    ClockSkew,
    UnknownFact,
    MalformedPattern,
    // acquisition
    DuplicateProvider,
    InvalidInterval,
    UnknownProvider,
    StaleEvent,
    UnmappedPayload,
    // reasoner
    RuleValidation,
    NonTermination,
    EmptyConflict,
    // scenario / cli
    ScriptParse,
    UnknownProviderInScript,
    UnknownKind,
    ConfigInvalid,
    IoError,
};

std::string_view errc_name(Errc c);

class Error : public std::runtime_error {
public:
    Error(Errc code, std::string detail)
        : std::runtime_error(std::string(errc_name(code)) + ": " + detail),
          code_(code),
          detail_(std::move(detail)) {}

    Errc code() const noexcept { return code_; }
    const std::string& detail() const noexcept { return detail_; }

private:
    Errc code_;
    std::string detail_;
};

inline std::string_view errc_name(Errc c) {
    switch (c) {
        case Errc::DuplicateLayer: return "DuplicateLayer";
        case Errc::UnknownAttachmentClass: return "UnknownAttachmentClass";
        case Errc::CycleIntroduced: return "CycleIntroduced";
        case Errc::DuplicateName: return "DuplicateName";
        case Errc::UpperLayerImmutable: return "UpperLayerImmutable";
        case Errc::UnknownLayer: return "UnknownLayer";
        case Errc::DanglingDependents: return "DanglingDependents";
        case Errc::UnknownClass: return "UnknownClass";
        case Errc::ValidationFailed: return "ValidationFailed";
        case Errc::ClockSkew: return "ClockSkew";
        case Errc::UnknownFact: return "UnknownFact";
        case Errc::MalformedPattern: return "MalformedPattern";
        case Errc::DuplicateProvider: return "DuplicateProvider";
        case Errc::InvalidInterval: return "InvalidInterval";
        case Errc::UnknownProvider: return "UnknownProvider";
        case Errc::StaleEvent: return "StaleEvent";
        case Errc::UnmappedPayload: return "UnmappedPayload";
        case Errc::RuleValidation: return "RuleValidation";
        case Errc::NonTermination: return "NonTermination";
        case Errc::EmptyConflict: return "EmptyConflict";
        case Errc::ScriptParse: return "ScriptParse";
        case Errc::UnknownProviderInScript: return "UnknownProviderInScript";
        case Errc::UnknownKind: return "UnknownKind";
        case Errc::ConfigInvalid: return "ConfigInvalid";
        case Errc::IoError: return "IoError";
    }
    return "Error";
}

} // namespace ctx
