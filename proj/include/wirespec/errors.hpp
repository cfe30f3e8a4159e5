#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace wirespec {

enum class Errc {
    InvalidPartRef,
    InvalidSpec,
    NoParsableContent,
    MalformedEndpoint,
    RangeShortcut,
    SchemaError,
    DuplicateAlias,
    DuplicateId,
    EmptyInput,
    PrereqFailed,
    UnknownRule,
    ReplayMiss,
    TransportError,
    ProviderError,
    UnknownTokenizer,
    ParseFailure,
    NoBaseSpec,
    UnknownTaskId,
    ConfigError,
    IoError,
};

std::string_view errc_name(Errc code);

// All library failures are reported through this type; the code lets callers
// (CLI exit codes, HTTP status mapping) dispatch without string matching.
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

class ProviderError : public Error {
public:
    ProviderError(int status, std::string body)
        : Error(Errc::ProviderError,
                "provider returned HTTP " + std::to_string(status)),
          status_(status), body_(std::move(body)) {}

    int status() const noexcept { return status_; }
    const std::string& body() const noexcept { return body_; }

private:
    int status_;
    std::string body_;
};

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

} // namespace wirespec
