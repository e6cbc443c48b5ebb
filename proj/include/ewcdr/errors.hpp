#pragma once

#include <stdexcept>
#include <string>

namespace ewcdr {

// Shape mismatch between tensors or parameter blocks.
struct shape_error : std::invalid_argument {
    explicit shape_error(const std::string& msg) : std::invalid_argument(msg) {}
};

// A precondition on values failed (bad label, empty dataset, invalid config field, ...).
struct validation_error : std::invalid_argument {
    explicit validation_error(const std::string& msg) : std::invalid_argument(msg) {}
};

// Malformed external data (IDX files, CSV parse-back).
struct format_error : std::runtime_error {
    explicit format_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Continual-learning protocol violated (task trained out of order).
struct protocol_error : std::logic_error {
    explicit protocol_error(const std::string& msg) : std::logic_error(msg) {}
};

// A metric is undefined for the given inputs (zero denominator).
struct metric_error : std::runtime_error {
    explicit metric_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Filesystem failure while emitting reports or artifacts.
struct io_error : std::runtime_error {
    explicit io_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Unparseable or inconsistent run configuration.
struct config_error : std::runtime_error {
    explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace ewcdr
