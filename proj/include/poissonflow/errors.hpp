#pragma once

#include <stdexcept>
#include <string>

namespace pflow {

/// Input cannot form a valid mass function (negative, non-finite, all-zero,
/// or mass + deficit away from 1).
struct construction_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// A truncation policy could not be satisfied: the support cap was reached
/// before the tail mass dropped below tail_epsilon.
struct truncation_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Parameter outside its mathematical domain.
struct domain_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Caller broke an operation contract (e.g. the preserved-mean precondition
/// of interpolate()); the message names the measured quantity.
struct contract_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// The random ULC sampler could not reach the requested mean on the capped
/// support.
struct sampler_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A verified property failed (used by the CLI layer to select exit code 4).
struct property_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace pflow
