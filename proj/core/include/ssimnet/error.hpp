#pragma once

#include <stdexcept>
#include <string>

namespace ssimnet {

// Error taxonomy. The CLI maps these onto exit codes:
// usage/config -> 1, data/format -> 2, numeric fault -> 3.
class error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Dimension mismatches, invalid shapes.
class shape_error : public error {
  public:
    using error::error;
};

// Invalid layer geometry, bad config files, bad arguments.
class config_error : public error {
  public:
    using error::error;
};

// Operation called out of sequence (backward without a cached forward).
class state_error : public error {
  public:
    using error::error;
};

// Malformed data files, out-of-range labels, degenerate datasets.
class data_error : public error {
  public:
    using error::error;
};

// Non-finite values where finite ones are required.
class numeric_error : public error {
  public:
    using error::error;
};

}  // namespace ssimnet
