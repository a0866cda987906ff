#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace tsf {

/// Base type for all tsfactor errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Shape mismatch between operands.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// Invalid run configuration (executor/partition/fan-out counts).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Input values violate a data contract (non-finite entries, negative NMF input,
/// non-monotone timestamps).
class DataError : public Error {
public:
    using Error::Error;
};

/// Filesystem-level failure, message carries the path.
class IoError : public Error {
public:
    using Error::Error;
};

/// Malformed on-disk matrix container (magic/version/dtype).
class FormatError : public Error {
public:
    using Error::Error;
};

/// Payload shorter or longer than the header declares.
class LengthError : public Error {
public:
    using Error::Error;
};

/// Textual input that does not parse; carries the 1-based line number.
class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& what)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const { return line_; }

private:
    std::size_t line_ = 0;
};

/// A task failed inside a stage; names the partition that raised.
class StageError : public Error {
public:
    StageError(std::size_t partition_id, const std::string& what)
        : Error("task on partition " + std::to_string(partition_id) + " failed: " + what),
          partition_id_(partition_id) {}

    std::size_t partition_id() const { return partition_id_; }

private:
    std::size_t partition_id_ = 0;
};

/// Iterative solver ran out of budget; carries the residuals it reached.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, std::vector<double> residuals)
        : Error(what), residuals_(std::move(residuals)) {}

    const std::vector<double>& residuals() const { return residuals_; }

private:
    std::vector<double> residuals_;
};

}  // namespace tsf
