#pragma once

#include <stdexcept>
#include <string>

namespace tnbp {

enum class ErrorKind {
    DimensionMismatch,
    LegCollision,
    TooLarge,
    MissingPhysicalLeg,
    RegionMismatch,
    OverlappingRegions,
    InvalidNetwork,
    InvalidInput,
    NumericalCollapse,
    DegenerateInnerProduct,
    SingularJacobian,
    NotConverged,
    ZeroLocalFactor,
    BranchCrossing,
    ZeroRegionValue,
    FieldNonzero,
    InsufficientPoints,
    CombinatorialBudgetExceeded,
    CapExceeded,
    PCapExceeded,
};

// Exit-code category used by the CLI.
enum class ErrorClass { Config, Numerical, Budget };

inline const char* error_name(ErrorKind k) {
    switch (k) {
        case ErrorKind::DimensionMismatch: return "DimensionMismatch";
        case ErrorKind::LegCollision: return "LegCollision";
        case ErrorKind::TooLarge: return "TooLarge";
        case ErrorKind::MissingPhysicalLeg: return "MissingPhysicalLeg";
        case ErrorKind::RegionMismatch: return "RegionMismatch";
        case ErrorKind::OverlappingRegions: return "OverlappingRegions";
        case ErrorKind::InvalidNetwork: return "InvalidNetwork";
        case ErrorKind::InvalidInput: return "InvalidInput";
        case ErrorKind::NumericalCollapse: return "NumericalCollapse";
        case ErrorKind::DegenerateInnerProduct: return "DegenerateInnerProduct";
        case ErrorKind::SingularJacobian: return "SingularJacobian";
        case ErrorKind::NotConverged: return "NotConverged";
        case ErrorKind::ZeroLocalFactor: return "ZeroLocalFactor";
        case ErrorKind::BranchCrossing: return "BranchCrossing";
        case ErrorKind::ZeroRegionValue: return "ZeroRegionValue";
        case ErrorKind::FieldNonzero: return "FieldNonzero";
        case ErrorKind::InsufficientPoints: return "InsufficientPoints";
        case ErrorKind::CombinatorialBudgetExceeded: return "CombinatorialBudgetExceeded";
        case ErrorKind::CapExceeded: return "CapExceeded";
        case ErrorKind::PCapExceeded: return "PCapExceeded";
    }
    return "Unknown";
}

inline ErrorClass error_class(ErrorKind k) {
    switch (k) {
        case ErrorKind::TooLarge:
        case ErrorKind::CombinatorialBudgetExceeded:
        case ErrorKind::CapExceeded:
        case ErrorKind::PCapExceeded:
            return ErrorClass::Budget;
        case ErrorKind::NumericalCollapse:
        case ErrorKind::DegenerateInnerProduct:
        case ErrorKind::SingularJacobian:
        case ErrorKind::NotConverged:
        case ErrorKind::ZeroLocalFactor:
        case ErrorKind::BranchCrossing:
        case ErrorKind::ZeroRegionValue:
        case ErrorKind::InsufficientPoints:
            return ErrorClass::Numerical;
        default:
            return ErrorClass::Config;
    }
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(error_name(kind)) + ": " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace tnbp
