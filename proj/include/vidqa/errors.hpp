// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace vidqa {

/// Base class for all engine errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Media probing/decoding failures (unreadable file, no video track, ...).
class MediaError : public Error {
public:
    using Error::Error;
};

/// A tool call that failed schema validation. Controller-visible: the
/// message is echoed back to the model so it can self-correct.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// A validated tool call that failed at execution time (out-of-bounds
/// ranges, unparseable tool response). Also controller-visible.
class ToolError : public Error {
public:
    using Error::Error;
};

/// Backend transport/auth failures. `retryable` distinguishes transient
/// transport errors from fatal ones (auth, protocol).
class BackendError : public Error {
public:
    BackendError(const std::string& msg, bool retryable_ = false)
        : Error(msg), retryable(retryable_) {}
    bool retryable;
};

/// A scripted transcript was exhausted or mismatched. This is a test
/// authoring bug, not an engine bug, so it gets its own type.
class ScriptError : public Error {
public:
    using Error::Error;
};

/// Trace file problems: version mismatch, truncation, malformed records.
class TraceError : public Error {
public:
    using Error::Error;
};

} // namespace vidqa
