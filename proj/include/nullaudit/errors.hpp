#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace nullaudit {

// Parameters outside a generator's domain (stationarity, positivity, ranges).
struct ParameterDomainError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Caller broke a documented precondition.
struct ContractViolation : std::logic_error {
    using std::logic_error::logic_error;
};

// Walk-forward data touched before selection was finalized, or a lookahead rule
// built without its violation marker.
struct ProtocolViolation : std::logic_error {
    using std::logic_error::logic_error;
};

// Calibration archive does not match the workflow being audited.
struct CalibrationMismatch : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IngestionError : std::runtime_error {
    IngestionError(std::size_t row, const std::string& what)
        : std::runtime_error("row " + std::to_string(row) + ": " + what), row_(row) {}
    std::size_t row() const noexcept { return row_; }

private:
    std::size_t row_;
};

}  // namespace nullaudit
