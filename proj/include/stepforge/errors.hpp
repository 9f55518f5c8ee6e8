#pragma once

#include <stdexcept>
#include <string>

namespace stepforge {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Goal or formula text failed to parse. `position` is a 0-based byte offset
// into the input.
struct ParseError : Error {
    ParseError(const std::string& what, std::size_t position)
        : Error(what + " at position " + std::to_string(position)), position(position) {}
    std::size_t position;
};

// negate() on an external-environment statement without a stored negation.
struct MissingNegation : Error {
    using Error::Error;
};

// A remote backend (policy server, critic server, subprocess env) timed out,
// refused the connection, or returned a malformed body.
struct BackendUnavailable : Error {
    using Error::Error;
};

// A trajectory handed to update_from_trajectories does not replay to Solved.
struct InvalidTrajectory : Error {
    using Error::Error;
};

// extract_path_pairs input does not end at no_goals.
struct NotAProof : Error {
    using Error::Error;
};

// extract_sibling_pairs path does not lie inside the given tree.
struct PathNotInTree : Error {
    using Error::Error;
};

// A proof reconstructed from the search tree failed to replay. Engine bug.
struct ReplayMismatch : Error {
    using Error::Error;
};

// loglinear_fit with fewer than two qualifying buckets.
struct InsufficientData : Error {
    using Error::Error;
};

// A statement and its negation both verified. Hard invariant of the toy
// logic; aborts the round.
struct SoundnessError : Error {
    using Error::Error;
};

}  // namespace stepforge
