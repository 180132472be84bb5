#pragma once

#include <stdexcept>
#include <string>

namespace uoda {

// Tensor/graph shape violations. Message names both offending shapes.
class ShapeError : public std::runtime_error {
public:
    explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

// Precondition violations on public operations (bad labels, empty sets, ...).
class ContractError : public std::invalid_argument {
public:
    explicit ContractError(const std::string& msg) : std::invalid_argument(msg) {}
};

// Config file problems; carries the 1-based line number when known (0 otherwise).
class ConfigError : public std::runtime_error {
public:
    ConfigError(int line, const std::string& msg)
        : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + msg : msg),
          line_(line) {}

    int line() const { return line_; }

private:
    int line_;
};

// Hard abort on non-finite losses. Training never clamps silently.
class TrainingDiverged : public std::runtime_error {
public:
    TrainingDiverged(const std::string& loss_term, long long iteration)
        : std::runtime_error("non-finite value in " + loss_term + " at iteration " +
                             std::to_string(iteration)),
          loss_term_(loss_term),
          iteration_(iteration) {}

    const std::string& loss_term() const { return loss_term_; }
    long long iteration() const { return iteration_; }

private:
    std::string loss_term_;
    long long iteration_;
};

}  // namespace uoda
