#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace agentsim {

// Base for every error the library raises. Callers that only care about
// "something was wrong with the inputs" can catch this.
class SimError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class TraceError : public SimError {
public:
    using SimError::SimError;
};

class ConfigError : public SimError {
public:
    using SimError::SimError;
};

class UnknownCall : public SimError {
public:
    explicit UnknownCall(std::int64_t call)
        : SimError("unknown call " + std::to_string(call)), call_id(call) {}
    std::int64_t call_id;
};

class UnknownClass : public SimError {
public:
    explicit UnknownClass(const std::string& gpu_class)
        : SimError("no latency coefficients for gpu class '" + gpu_class + "'"), gpu_class(gpu_class) {}
    std::string gpu_class;
};

class MissingBandwidthEntry : public SimError {
public:
    MissingBandwidthEntry(const std::string& src, const std::string& dst)
        : SimError("no bandwidth entry for " + src + " -> " + dst), src(src), dst(dst) {}
    std::string src;
    std::string dst;
};

class NoFeasibleDecode : public SimError {
public:
    explicit NoFeasibleDecode(std::int64_t call)
        : SimError("call " + std::to_string(call) + " exceeds the KV capacity of every decode instance"),
          call_id(call) {}
    std::int64_t call_id;
};

class NonPositiveHorizon : public SimError {
public:
    NonPositiveHorizon() : SimError("horizon must be positive") {}
};

class EmptyInput : public SimError {
public:
    EmptyInput() : SimError("empty input") {}
};

class DeadlockDetected : public SimError {
public:
    DeadlockDetected(std::size_t incomplete, double time)
        : SimError("deadlock: " + std::to_string(incomplete) + " calls incomplete with no pending events at t=" +
                   std::to_string(time)),
          incomplete_calls(incomplete) {}
    std::size_t incomplete_calls;
};

// Raised by the decode ledger when an admission would overflow Cap(d).
// Reaching this means the engine or a planner skipped the feasibility scan.
class CapacityViolation : public SimError {
public:
    using SimError::SimError;
};

}  // namespace agentsim
