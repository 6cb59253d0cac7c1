#pragma once

#include <stdexcept>

namespace harnacklab {

// Misuse of an operation (bad arguments, shape mismatch, hypothesis violated).
struct ShapeMismatch : std::invalid_argument { using std::invalid_argument::invalid_argument; };
struct DomainError : std::invalid_argument { using std::invalid_argument::invalid_argument; };
struct RegimeError : std::invalid_argument { using std::invalid_argument::invalid_argument; };
struct NonPositiveField : std::invalid_argument { using std::invalid_argument::invalid_argument; };
struct RadiusTooLarge : std::invalid_argument { using std::invalid_argument::invalid_argument; };
struct InfeasibleParams : std::invalid_argument { using std::invalid_argument::invalid_argument; };

// Runtime failures of a solve or a fit.
struct PositivityLost : std::runtime_error { using std::runtime_error::runtime_error; };
struct StabilityViolation : std::runtime_error { using std::runtime_error::runtime_error; };
struct NoConvergence : std::runtime_error { using std::runtime_error::runtime_error; };
struct NonConvergent : std::runtime_error { using std::runtime_error::runtime_error; };
struct SearchFailure : std::runtime_error { using std::runtime_error::runtime_error; };
struct BlowUp : std::runtime_error { using std::runtime_error::runtime_error; };

// Configuration / CLI errors.
struct ParseError : std::invalid_argument { using std::invalid_argument::invalid_argument; };
struct ValidationError : std::invalid_argument { using std::invalid_argument::invalid_argument; };

}  // namespace harnacklab
