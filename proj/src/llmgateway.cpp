#include "wirespec/llmgateway.hpp"

#include "wirespec/errors.hpp"

#include <httplib.h>
#include <openssl/evp.h>

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <iomanip>
#include <regex>
#include <sstream>

namespace wirespec {

nlohmann::ordered_json to_json(const GenerationParams& params)
{
    nlohmann::ordered_json j;
    j["model_id"] = params.model_id;
    j["temperature"] = params.temperature;
    j["max_tokens"] = params.max_tokens;
    j["stop_sequences"] = params.stop_sequences;
    return j;
}

GenerationParams params_from_json(const nlohmann::json& j)
{
    GenerationParams p;
    p.model_id = j.value("model_id", p.model_id);
    p.temperature = j.value("temperature", p.temperature);
    p.max_tokens = j.value("max_tokens", p.max_tokens);
    p.stop_sequences = j.value("stop_sequences", std::vector<std::string>{});
    return p;
}

std::string prompt_digest(std::string_view prompt, const GenerationParams& params)
{
    nlohmann::ordered_json key;
    key["prompt"] = prompt;
    key["params"] = to_json(params);
    auto bytes = key.dump();

    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
        throw Error(Errc::IoError, "sha256 failed");
    }
    std::ostringstream hex;
    for (unsigned int i = 0; i < len; ++i) {
        hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
    }
    return hex.str();
}

std::string utc_timestamp()
{
    auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ostringstream out;
    out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return out.str();
}

// --- Transcript -------------------------------------------------------------

Transcript Transcript::load(const std::string& path)
{
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(Errc::SchemaError, "transcript " + path + ": " + e.what());
    }
    if (!doc.is_array()) {
        throw Error(Errc::SchemaError, "transcript " + path + " must be an array");
    }
    Transcript t;
    for (const auto& e : doc) {
        TranscriptEntry entry;
        entry.prompt_text = e.at("prompt_text").get<std::string>();
        entry.response_text = e.at("response_text").get<std::string>();
        entry.params = params_from_json(e.value("params", nlohmann::json::object()));
        entry.timestamp = e.value("timestamp", "");
        entry.prompt_digest = e.value("prompt_digest", "");
        if (entry.prompt_digest.empty()) {
            entry.prompt_digest = prompt_digest(entry.prompt_text, entry.params);
        }
        t.entries_.push_back(std::move(entry));
    }
    return t;
}

Transcript Transcript::load_all(const std::string& path)
{
    namespace fs = std::filesystem;
    if (!fs::is_directory(path)) {
        return load(path);
    }
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(path)) {
        if (e.is_regular_file() && e.path().extension() == ".json") {
            files.push_back(e.path());
        }
    }
    std::sort(files.begin(), files.end());
    Transcript all;
    for (const auto& f : files) {
        for (auto& entry : load(f.string()).entries_) {
            all.entries_.push_back(std::move(entry));
        }
    }
    return all;
}

void Transcript::append(TranscriptEntry entry)
{
    entries_.push_back(std::move(entry));
}

const TranscriptEntry* Transcript::find(std::string_view digest) const
{
    auto it = std::find_if(entries_.begin(), entries_.end(),
                           [&](const TranscriptEntry& e) { return e.prompt_digest == digest; });
    return it == entries_.end() ? nullptr : &*it;
}

nlohmann::ordered_json Transcript::to_json() const
{
    auto arr = nlohmann::ordered_json::array();
    for (const auto& e : entries_) {
        nlohmann::ordered_json j;
        j["prompt_digest"] = e.prompt_digest;
        j["prompt_text"] = e.prompt_text;
        j["response_text"] = e.response_text;
        j["params"] = wirespec::to_json(e.params);
        j["timestamp"] = e.timestamp;
        arr.push_back(std::move(j));
    }
    return arr;
}

void Transcript::save(const std::string& path) const
{
    write_file(path, to_json().dump(2) + "\n");
}

// --- Providers ----------------------------------------------------------------

ReplayProvider::ReplayProvider(Transcript transcript, std::string source)
    : transcript_(std::move(transcript)), source_(std::move(source))
{
}

Completion ReplayProvider::complete(const std::string& prompt, const GenerationParams& params)
{
    auto digest = prompt_digest(prompt, params);
    const auto* entry = transcript_.find(digest);
    if (entry == nullptr) {
        throw Error(Errc::ReplayMiss, "no recorded response for prompt digest " + digest);
    }
    return {entry->response_text, entry->timestamp};
}

RecordingProvider::RecordingProvider(std::shared_ptr<Provider> inner, std::string path)
    : inner_(std::move(inner)), path_(std::move(path))
{
    if (!path_.empty() && std::filesystem::exists(path_)) {
        transcript_ = Transcript::load(path_);
    }
}

Completion RecordingProvider::complete(const std::string& prompt, const GenerationParams& params)
{
    auto digest = prompt_digest(prompt, params);
    {
        std::lock_guard lock(mutex_);
        if (const auto* hit = transcript_.find(digest)) {
            return {hit->response_text, hit->timestamp};
        }
    }
    auto result = inner_->complete(prompt, params);
    if (result.timestamp.empty()) {
        result.timestamp = utc_timestamp();
    }

    std::lock_guard lock(mutex_);
    if (const auto* hit = transcript_.find(digest)) {
        return {hit->response_text, hit->timestamp};
    }
    transcript_.append({digest, prompt, result.text, params, result.timestamp});
    if (!path_.empty()) {
        transcript_.save(path_);
    }
    return result;
}

Transcript RecordingProvider::transcript() const
{
    std::lock_guard lock(mutex_);
    return transcript_;
}

ScriptedProvider::ScriptedProvider(std::vector<std::string> responses, std::string timestamp)
    : responses_(responses.begin(), responses.end()), timestamp_(std::move(timestamp))
{
}

Completion ScriptedProvider::complete(const std::string& prompt, const GenerationParams& params)
{
    std::lock_guard lock(mutex_);
    if (responses_.empty()) {
        throw Error(Errc::ReplayMiss,
                    "scripted responses exhausted at digest " + prompt_digest(prompt, params));
    }
    auto text = std::move(responses_.front());
    responses_.pop_front();
    return {std::move(text), timestamp_};
}

std::size_t ScriptedProvider::remaining() const
{
    std::lock_guard lock(mutex_);
    return responses_.size();
}

// --- Provider configuration -------------------------------------------------------

namespace {

std::string trim_copy(std::string_view s)
{
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) {
        return {};
    }
    auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void config_error(int line, const std::string& what)
{
    throw Error(Errc::ConfigError, "providers config line " + std::to_string(line) + ": " + what);
}

void set_field(ProviderConfig& cfg, const std::string& key, const std::string& value, int line)
{
    static const std::vector<std::string> secret_keys = {"api_key", "apikey", "token", "secret",
                                                         "password", "key"};
    if (std::find(secret_keys.begin(), secret_keys.end(), key) != secret_keys.end()) {
        config_error(line, "credentials must come from the environment (use auth_env)");
    }
    if (key == "endpoint") {
        cfg.endpoint = value;
    } else if (key == "auth_env") {
        cfg.auth_env = value;
    } else if (key == "auth_header") {
        cfg.auth_header = value;
    } else if (key == "auth_prefix") {
        cfg.auth_prefix = value;
    } else if (key == "body_template") {
        cfg.body_template = value;
    } else if (key == "response_path") {
        cfg.response_path = value;
    } else if (key == "model_id") {
        cfg.model_id = value;
    } else if (key == "timeout_seconds") {
        try {
            cfg.timeout_seconds = std::stoi(value);
        } catch (const std::exception&) {
            config_error(line, "timeout_seconds must be an integer");
        }
    } else if (key.rfind("header.", 0) == 0) {
        cfg.headers[key.substr(7)] = value;
    } else {
        config_error(line, "unknown key '" + key + "'");
    }
}

} // namespace

std::vector<ProviderConfig> parse_provider_configs(std::string_view text)
{
    std::vector<std::string> lines;
    {
        std::istringstream in{std::string(text)};
        std::string l;
        while (std::getline(in, l)) {
            lines.push_back(l);
        }
    }

    std::vector<ProviderConfig> out;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        int lineno = static_cast<int>(i + 1);
        auto line = trim_copy(lines[i]);
        if (line.empty() || line[0] == '#') {
            continue;
        }
        if (line.front() == '[') {
            if (line.back() != ']' || line.size() < 3) {
                config_error(lineno, "bad section header");
            }
            ProviderConfig cfg;
            cfg.name = trim_copy(std::string_view(line).substr(1, line.size() - 2));
            out.push_back(std::move(cfg));
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos) {
            config_error(lineno, "expected key = value");
        }
        if (out.empty()) {
            config_error(lineno, "key outside of a [provider] section");
        }
        auto key = trim_copy(std::string_view(line).substr(0, eq));
        auto raw = trim_copy(std::string_view(line).substr(eq + 1));

        std::string value;
        if (raw.rfind("'''", 0) == 0) {
            // Multi-line literal: runs to the closing ''' verbatim.
            std::string rest = raw.substr(3);
            auto close = rest.find("'''");
            if (close != std::string::npos) {
                value = rest.substr(0, close);
            } else {
                value = rest.empty() ? "" : rest + "\n";
                bool closed = false;
                while (++i < lines.size()) {
                    auto at = lines[i].find("'''");
                    if (at != std::string::npos) {
                        value += lines[i].substr(0, at);
                        closed = true;
                        break;
                    }
                    value += lines[i] + "\n";
                }
                if (!closed) {
                    config_error(lineno, "unterminated ''' string");
                }
            }
        } else if (raw.size() >= 2 && raw.front() == '\'' && raw.back() == '\'') {
            value = raw.substr(1, raw.size() - 2);
        } else if (raw.size() >= 2 && raw.front() == '"' && raw.back() == '"') {
            try {
                value = nlohmann::json::parse(raw).get<std::string>();
            } catch (const nlohmann::json::exception&) {
                config_error(lineno, "bad string literal");
            }
        } else {
            value = raw;
        }
        set_field(out.back(), key, value, lineno);
    }

    for (const auto& cfg : out) {
        if (cfg.endpoint.empty() || cfg.body_template.empty() || cfg.response_path.empty()) {
            throw Error(Errc::ConfigError, "provider '" + cfg.name +
                                               "' needs endpoint, body_template and response_path");
        }
    }
    return out;
}

std::vector<ProviderConfig> load_provider_configs(const std::string& path)
{
    return parse_provider_configs(read_file(path));
}

// --- Live HTTP ------------------------------------------------------------------

HttpProvider::HttpProvider(ProviderConfig config) : config_(std::move(config)) {}

std::string HttpProvider::render_body(const std::string& prompt,
                                      const GenerationParams& params) const
{
    const std::vector<std::pair<std::string, std::string>> values = {
        {"{{prompt}}", nlohmann::json(prompt).dump()},
        {"{{model}}", nlohmann::json(params.model_id).dump()},
        {"{{temperature}}", nlohmann::json(params.temperature).dump()},
        {"{{max_tokens}}", nlohmann::json(params.max_tokens).dump()},
        {"{{stop}}", nlohmann::json(params.stop_sequences).dump()},
    };
    std::string out;
    const auto& tpl = config_.body_template;
    for (std::size_t i = 0; i < tpl.size();) {
        bool replaced = false;
        for (const auto& [key, value] : values) {
            if (tpl.compare(i, key.size(), key) == 0) {
                out += value;
                i += key.size();
                replaced = true;
                break;
            }
        }
        if (!replaced) {
            out += tpl[i++];
        }
    }
    return out;
}

std::string HttpProvider::extract_text(const nlohmann::json& response, std::string_view path)
{
    const nlohmann::json* node = &response;
    std::size_t pos = 0;
    while (pos <= path.size()) {
        auto dot = path.find('.', pos);
        auto seg = std::string(path.substr(pos, dot == std::string_view::npos ? std::string_view::npos
                                                                              : dot - pos));
        if (node->is_array()) {
            std::size_t idx = 0;
            try {
                idx = std::stoul(seg);
            } catch (const std::exception&) {
                throw Error(Errc::TransportError, "response path segment '" + seg + "' is not an index");
            }
            if (idx >= node->size()) {
                throw Error(Errc::TransportError, "response path index out of range: " + seg);
            }
            node = &(*node)[idx];
        } else if (node->is_object() && node->contains(seg)) {
            node = &(*node)[seg];
        } else {
            throw Error(Errc::TransportError, "response has no field '" + seg + "'");
        }
        if (dot == std::string_view::npos) {
            break;
        }
        pos = dot + 1;
    }
    if (!node->is_string()) {
        throw Error(Errc::TransportError, "response path does not name a string");
    }
    return node->get<std::string>();
}

Completion HttpProvider::complete(const std::string& prompt, const GenerationParams& params)
{
    static const std::regex url_re(R"(^(https?://[^/]+)(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(config_.endpoint, m, url_re)) {
        throw Error(Errc::ConfigError, "bad endpoint URL for provider " + config_.name);
    }
    auto base = m[1].str();
    auto path = m[2].matched ? m[2].str() : std::string("/");

    httplib::Headers headers;
    for (const auto& [k, v] : config_.headers) {
        headers.emplace(k, v);
    }
    if (!config_.auth_env.empty()) {
        const char* secret = std::getenv(config_.auth_env.c_str());
        if (secret == nullptr || *secret == '\0') {
            throw Error(Errc::ConfigError, "environment variable " + config_.auth_env + " is not set");
        }
        headers.emplace(config_.auth_header, config_.auth_prefix + secret);
    }

    httplib::Client client(base);
    client.set_read_timeout(config_.timeout_seconds, 0);
    client.set_write_timeout(config_.timeout_seconds, 0);
    auto res = client.Post(path, headers, render_body(prompt, params), "application/json");
    if (!res) {
        throw Error(Errc::TransportError,
                    "request to " + config_.name + " failed: " + httplib::to_string(res.error()));
    }
    if (res->status < 200 || res->status >= 300) {
        throw ProviderError(res->status, res->body);
    }
    nlohmann::json body;
    try {
        body = nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::parse_error&) {
        throw Error(Errc::TransportError, "provider " + config_.name + " returned non-JSON body");
    }
    return {extract_text(body, config_.response_path), utc_timestamp()};
}

std::shared_ptr<Provider> make_provider(std::string_view spec,
                                        const std::vector<ProviderConfig>& configs,
                                        const std::string& record_path)
{
    std::shared_ptr<Provider> provider;
    if (spec.rfind("replay:", 0) == 0) {
        auto source = std::string(spec.substr(7));
        provider = std::make_shared<ReplayProvider>(Transcript::load_all(source), source);
    } else {
        auto it = std::find_if(configs.begin(), configs.end(),
                               [&](const ProviderConfig& c) { return c.name == spec; });
        if (it == configs.end()) {
            throw Error(Errc::ConfigError, "unknown provider '" + std::string(spec) + "'");
        }
        provider = std::make_shared<HttpProvider>(*it);
    }
    if (!record_path.empty()) {
        provider = std::make_shared<RecordingProvider>(std::move(provider), record_path);
    }
    return provider;
}

Completion complete(Provider& provider, const std::string& prompt, const GenerationParams& params)
{
    return provider.complete(prompt, params);
}

std::size_t count_prompt_tokens(std::string_view prompt, std::string_view tokenizer_id)
{
    if (tokenizer_id == "chars4") {
        return (prompt.size() + 3) / 4;
    }
    if (tokenizer_id != "fallback") {
        throw Error(Errc::UnknownTokenizer, "unknown tokenizer '" + std::string(tokenizer_id) + "'");
    }
    std::size_t count = 0;
    bool in_word = false;
    for (char ch : prompt) {
        auto c = static_cast<unsigned char>(ch);
        if (std::isspace(c)) {
            in_word = false;
        } else if (std::ispunct(c)) {
            ++count;
            in_word = false;
        } else if (!in_word) {
            ++count;
            in_word = true;
        }
    }
    return count;
}

} // namespace wirespec
