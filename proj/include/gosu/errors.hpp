#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace gosu {

// Base class for all engine errors. Everything thrown on purpose derives from
// this so callers can catch one type at the CLI boundary.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A document whose normalized text contains zero tokens cannot be chunked.
class EmptyDocumentError : public Error {
public:
    explicit EmptyDocumentError(const std::string& doc_id)
        : Error("document has no tokens after normalization: " + doc_id), doc_id_(doc_id) {}
    const std::string& doc_id() const noexcept { return doc_id_; }

private:
    std::string doc_id_;
};

// Config values that fail validation (window <= overlap, bad enum, ...).
class ConfigError : public Error {
public:
    using Error::Error;
};

// Live backend could not be reached after bounded retries.
class BackendUnavailableError : public Error {
public:
    using Error::Error;
};

// Scripted backend had no fixture for the request fingerprint. Closed-world:
// this always names the fingerprint(s) so the missing files can be authored.
// Parallel fan-outs aggregate every miss of a stage into one instance.
class FixtureMissingError : public Error {
public:
    using Miss = std::pair<std::string, std::string>;  // (task, fingerprint)

    FixtureMissingError(std::string task, std::string fingerprint)
        : FixtureMissingError(std::vector<Miss>{{std::move(task), std::move(fingerprint)}}) {}

    explicit FixtureMissingError(std::vector<Miss> misses)
        : Error(format(misses)), misses_(std::move(misses)) {}

    // First miss, for the common single-request case.
    const std::string& task() const noexcept { return misses_.front().first; }
    const std::string& fingerprint() const noexcept { return misses_.front().second; }

    const std::vector<Miss>& misses() const noexcept { return misses_; }

private:
    static std::string format(const std::vector<Miss>& misses) {
        if (misses.size() == 1) {
            return "no fixture for task '" + misses.front().first + "' fingerprint " +
                   misses.front().second;
        }
        std::string out = std::to_string(misses.size()) + " fixtures missing:";
        for (const Miss& miss : misses) out += "\n  " + miss.first + "/" + miss.second;
        return out;
    }

    std::vector<Miss> misses_;
};

// Backend reported that the completion hit the output-token ceiling.
class OutputTruncatedError : public Error {
public:
    using Error::Error;
};

// Vector operands of different dimension, or an index fed a vector that does
// not match its stored dimension.
class DimensionMismatchError : public Error {
public:
    using Error::Error;
};

// Cosine against a zero-magnitude vector is undefined.
class ZeroVectorError : public Error {
public:
    using Error::Error;
};

// Structured completion did not end with the completion terminator; the
// payload is treated as truncated rather than silently parsed.
class NoTerminatorError : public Error {
public:
    using Error::Error;
};

// Retrieval produced nothing usable (all layers disabled, or every bundle
// empty). Maps to CLI exit code 2.
class NoContextError : public Error {
public:
    using Error::Error;
};

// A pipeline stage failed; wraps the underlying message with the stage label
// so multi-stage builds report where they died.
class StageError : public Error {
public:
    StageError(const std::string& stage, const std::string& what)
        : Error("[" + stage + "] " + what), stage_(stage) {}
    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

}  // namespace gosu
