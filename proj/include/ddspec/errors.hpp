#pragma once

#include <stdexcept>
#include <string>

namespace ddspec {

// Locked-phase tones passed to an operation that assumes independent phases,
// or the other way around.
struct mode_mismatch_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Design or normal matrix numerically singular.
struct ill_conditioned_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Coherence series never changes sign; the scan has to be extended.
struct not_crossed_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Config or CSV ingestion failure. line is 1-based, 0 when not tied to a line.
struct parse_error : std::runtime_error {
    int line;
    explicit parse_error(const std::string& msg, int line_number = 0)
        : std::runtime_error(line_number > 0 ? "line " + std::to_string(line_number) + ": " + msg
                                             : msg),
          line(line_number) {}
};

}  // namespace ddspec
