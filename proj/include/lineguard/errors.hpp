#pragma once

#include <stdexcept>
#include <string>

namespace lineguard {

/// Malformed input data: bad file contents, out-of-range values, bad flags.
class input_error : public std::runtime_error {
public:
    explicit input_error(const std::string& what) : std::runtime_error(what) {}
};

/// Cross-artifact consistency failure: taxonomy/model/score-file pairing bugs.
class validation_error : public std::runtime_error {
public:
    explicit validation_error(const std::string& what) : std::runtime_error(what) {}
};

/// Calibration cannot proceed, e.g. an empty score stratum.
class calibration_error : public std::runtime_error {
public:
    explicit calibration_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace lineguard
