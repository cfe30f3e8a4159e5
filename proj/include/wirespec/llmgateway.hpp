#pragma once

#include <cstddef>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace wirespec {

/// Decoding parameters. Greedy decoding (temperature 0) unless overridden.
struct GenerationParams {
    double temperature = 0.0;
    int max_tokens = 2048;
    std::vector<std::string> stop_sequences;
    std::string model_id = "unspecified";

    bool operator==(const GenerationParams&) const = default;
};

nlohmann::ordered_json to_json(const GenerationParams& params);
GenerationParams params_from_json(const nlohmann::json& j);

/// SHA-256 (hex) of the prompt together with the decoding parameters.
std::string prompt_digest(std::string_view prompt, const GenerationParams& params);

std::string utc_timestamp();

struct Completion {
    std::string text;
    std::string timestamp;
};

struct TranscriptEntry {
    std::string prompt_digest;
    std::string prompt_text;
    std::string response_text;
    GenerationParams params;
    std::string timestamp;
};

class Transcript {
public:
    static Transcript load(const std::string& path);
    /// Every `*.json` transcript in a directory, in filename order.
    static Transcript load_all(const std::string& path);

    void append(TranscriptEntry entry);
    const TranscriptEntry* find(std::string_view digest) const;
    const std::vector<TranscriptEntry>& entries() const noexcept { return entries_; }

    nlohmann::ordered_json to_json() const;
    void save(const std::string& path) const;

private:
    std::vector<TranscriptEntry> entries_;
};

class Provider {
public:
    virtual ~Provider() = default;
    virtual Completion complete(const std::string& prompt, const GenerationParams& params) = 0;
    virtual std::string describe() const = 0;
};

/// Serves stored responses by digest. Never touches the network.
class ReplayProvider : public Provider {
public:
    ReplayProvider(Transcript transcript, std::string source);

    Completion complete(const std::string& prompt, const GenerationParams& params) override;
    std::string describe() const override { return "replay:" + source_; }

private:
    Transcript transcript_;
    std::string source_;
};

/// Wraps another provider: identical requests are answered from the
/// transcript, new ones are forwarded and appended (and saved when a path is set).
class RecordingProvider : public Provider {
public:
    RecordingProvider(std::shared_ptr<Provider> inner, std::string path);

    Completion complete(const std::string& prompt, const GenerationParams& params) override;
    std::string describe() const override { return "record:" + inner_->describe(); }

    Transcript transcript() const;

private:
    std::shared_ptr<Provider> inner_;
    std::string path_;
    mutable std::mutex mutex_;
    Transcript transcript_;
};

/// Returns queued responses in order, ignoring the prompt. Used to author
/// replay fixtures and in tests; running dry is a ReplayMiss.
class ScriptedProvider : public Provider {
public:
    explicit ScriptedProvider(std::vector<std::string> responses, std::string timestamp = "");

    Completion complete(const std::string& prompt, const GenerationParams& params) override;
    std::string describe() const override { return "scripted"; }

    std::size_t remaining() const;

private:
    mutable std::mutex mutex_;
    std::deque<std::string> responses_;
    std::string timestamp_;
};

/// Request shape for a live endpoint. Placeholders in `body_template`:
/// {{prompt}} {{model}} {{temperature}} {{max_tokens}} {{stop}}, each replaced
/// by its JSON encoding. The credential comes from the environment only.
struct ProviderConfig {
    std::string name;
    std::string endpoint;
    std::string auth_env;
    std::string auth_header = "Authorization";
    std::string auth_prefix = "Bearer ";
    std::map<std::string, std::string> headers;
    std::string body_template;
    std::string response_path;  // dotted path, numeric segments index arrays
    std::string model_id;
    int timeout_seconds = 120;
};

/// Parses the key/value provider file: `[name]` sections with
/// `key = "value"` lines; `header.X = "v"` adds a request header.
std::vector<ProviderConfig> parse_provider_configs(std::string_view text);
std::vector<ProviderConfig> load_provider_configs(const std::string& path);

class HttpProvider : public Provider {
public:
    explicit HttpProvider(ProviderConfig config);

    Completion complete(const std::string& prompt, const GenerationParams& params) override;
    std::string describe() const override { return config_.name; }

    std::string render_body(const std::string& prompt, const GenerationParams& params) const;
    static std::string extract_text(const nlohmann::json& response, std::string_view path);

private:
    ProviderConfig config_;
};

/// Builds a provider from a spec string: "replay:<file-or-dir>" or the name
/// of a configured live provider. A non-empty `record_path` wraps the result.
std::shared_ptr<Provider> make_provider(std::string_view spec,
                                        const std::vector<ProviderConfig>& configs,
                                        const std::string& record_path = "");

/// Convenience: single completion with the standard error contract.
Completion complete(Provider& provider, const std::string& prompt, const GenerationParams& params);

/// Approximate token count. "fallback": words plus punctuation marks;
/// "chars4": ceil(bytes / 4). Throws Error(UnknownTokenizer).
std::size_t count_prompt_tokens(std::string_view prompt, std::string_view tokenizer_id);

} // namespace wirespec
