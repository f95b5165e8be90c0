// Exception hierarchy shared by all cg modules.
#pragma once

#include <stdexcept>
#include <string>

namespace cg {

struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Malformed or out-of-contract arguments: shape mismatches, non-finite
// values, unknown enum names, unreadable files.
struct InvalidInput : Error {
    using Error::Error;
};

// A training configuration that cannot run (e.g. no trainable layers).
struct InvalidConfig : Error {
    using Error::Error;
};

// Loss became non-finite during training.
struct TrainingDiverged : Error {
    using Error::Error;
};

// A concept gradient with zero norm was asked to be normalized; the concept
// is locally insensitive at this point and the caller decides what to do.
struct DegenerateConceptGradient : Error {
    using Error::Error;
};

// A zero concept activation vector was passed to the CAV sensitivity score.
struct DegenerateConceptVector : Error {
    using Error::Error;
};

// Probe fitting needs both label classes present.
struct DegenerateLabels : Error {
    using Error::Error;
};

// Target and concept model differ below the attribution layer, so their
// gradients live in different representations.
struct IncompatibleModels : Error {
    using Error::Error;
};

}  // namespace cg
