#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace amc {

struct InvalidArgument : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// A digital-only operation was handed an analog/FSK spec (or vice versa).
struct WrongFamily : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Zero-power input where a power reference is required.
struct DegenerateSignal : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::uint64_t offset)
        : std::runtime_error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}

    std::uint64_t offset() const noexcept { return offset_; }

private:
    std::uint64_t offset_;
};

struct StratificationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

class TrainingDivergence : public std::runtime_error {
public:
    explicit TrainingDivergence(const std::string& what, int epoch = -1)
        : std::runtime_error(epoch < 0 ? what : what + " (epoch " + std::to_string(epoch) + ")"), epoch_(epoch) {}

    int epoch() const noexcept { return epoch_; }

private:
    int epoch_;
};

struct GeometryMismatch : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace amc
