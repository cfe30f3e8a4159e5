#include "support.hpp"

#include <doctest.h>
#include <httplib.h>

#include "wirespec/llmgateway.hpp"

#include <cstdlib>
#include <thread>

using namespace wirespec;

namespace {

Errc error_of(const std::function<void()>& fn)
{
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    return Errc::IoError;
}

// Minimal fake completion endpoint on an ephemeral port.
struct FakeEndpoint {
    httplib::Server server;
    std::thread thread;
    int port = 0;
    std::string last_body;
    std::string last_auth;
    int status = 200;

    FakeEndpoint()
    {
        server.Post("/v1/complete", [this](const httplib::Request& req, httplib::Response& res) {
            last_body = req.body;
            last_auth = req.get_header_value("Authorization");
            res.status = status;
            if (status == 200) {
                res.set_content(R"({"choices":[{"message":{"content":"hello"}}]})", "application/json");
            } else {
                res.set_content("quota exceeded", "text/plain");
            }
        });
        port = server.bind_to_any_port("127.0.0.1");
        thread = std::thread([this] { server.listen_after_bind(); });
        server.wait_until_ready();
    }
    ~FakeEndpoint()
    {
        server.stop();
        thread.join();
    }
};

ProviderConfig fake_config(int port)
{
    ProviderConfig c;
    c.name = "fake";
    c.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/v1/complete";
    c.auth_env = "WIRESPEC_TEST_KEY";
    c.body_template = R"({"model": {{model}}, "prompt": {{prompt}}, "t": {{temperature}}, "n": {{max_tokens}}, "stop": {{stop}}})";
    c.response_path = "choices.0.message.content";
    c.timeout_seconds = 5;
    return c;
}

} // namespace

TEST_CASE("prompt digests cover the prompt and every parameter")
{
    GenerationParams p;
    auto d = prompt_digest("hello", p);
    CHECK(d.size() == 64);
    CHECK(d == prompt_digest("hello", p));
    CHECK(d != prompt_digest("hello!", p));
    auto q = p;
    q.temperature = 0.5;
    CHECK(d != prompt_digest("hello", q));
    q = p;
    q.model_id = "other";
    CHECK(d != prompt_digest("hello", q));
    q = p;
    q.stop_sequences = {"END"};
    CHECK(d != prompt_digest("hello", q));
}

TEST_CASE("params survive JSON")
{
    GenerationParams p{0.3, 512, {"a", "b"}, "m"};
    CHECK(params_from_json(to_json(p)) == p);
}

TEST_CASE("transcripts save, load and replay")
{
    auto dir = testing::scratch_dir("transcript");
    GenerationParams p;
    Transcript t;
    t.append({prompt_digest("q1", p), "q1", "a1", p, "2026-01-01T00:00:00Z"});
    t.save((dir / "t.json").string());

    auto loaded = Transcript::load((dir / "t.json").string());
    REQUIRE(loaded.entries().size() == 1);
    CHECK(loaded.entries()[0].response_text == "a1");

    ReplayProvider replay(loaded, "t");
    auto c = replay.complete("q1", p);
    CHECK(c.text == "a1");
    CHECK(c.timestamp == "2026-01-01T00:00:00Z");
    CHECK(error_of([&] { replay.complete("q2", p); }) == Errc::ReplayMiss);
    std::filesystem::remove_all(dir);
}

TEST_CASE("load_all merges a directory in filename order")
{
    auto dir = testing::scratch_dir("transcripts");
    GenerationParams p;
    Transcript a, b;
    b.append({prompt_digest("b", p), "b", "B", p, ""});
    a.append({prompt_digest("a", p), "a", "A", p, ""});
    b.save((dir / "2.json").string());
    a.save((dir / "1.json").string());
    wirespec::write_file((dir / "notes.txt").string(), "ignored");
    auto all = Transcript::load_all(dir.string());
    REQUIRE(all.entries().size() == 2);
    CHECK(all.entries()[0].response_text == "A");
    std::filesystem::remove_all(dir);
}

TEST_CASE("malformed transcripts are schema errors")
{
    auto dir = testing::scratch_dir("bad-transcript");
    wirespec::write_file((dir / "x.json").string(), "{\"not\": \"a list\"}");
    CHECK(error_of([&] { Transcript::load((dir / "x.json").string()); }) == Errc::SchemaError);
    wirespec::write_file((dir / "x.json").string(), "[");
    CHECK(error_of([&] { Transcript::load((dir / "x.json").string()); }) == Errc::SchemaError);
    std::filesystem::remove_all(dir);
}

TEST_CASE("recording forwards once and then serves from the transcript")
{
    auto dir = testing::scratch_dir("record");
    auto path = (dir / "rec.json").string();
    auto scripted = std::make_shared<ScriptedProvider>(std::vector<std::string>{"first"}, "T0");
    GenerationParams p;
    {
        RecordingProvider rec(scripted, path);
        CHECK(rec.complete("q", p).text == "first");
        CHECK(rec.complete("q", p).text == "first");  // no second scripted response needed
        CHECK(scripted->remaining() == 0);
        CHECK(error_of([&] { rec.complete("other", p); }) == Errc::ReplayMiss);
    }
    auto replay = make_provider("replay:" + path, {});
    CHECK(replay->complete("q", p).text == "first");
    std::filesystem::remove_all(dir);
}

TEST_CASE("provider config file")
{
    auto configs = parse_provider_configs(R"(
# comment
[one]
endpoint = "https://example.invalid/v1"
auth_env = "ONE_KEY"
header.X-Extra = "yes"
response_path = "a.b"
timeout_seconds = 30
body_template = '''
{"p": {{prompt}}}
'''

[two]
endpoint = "http://localhost:1/x"
body_template = '{"p": {{prompt}}}'
response_path = "text"
)");
    REQUIRE(configs.size() == 2);
    CHECK(configs[0].name == "one");
    CHECK(configs[0].headers.at("X-Extra") == "yes");
    CHECK(configs[0].timeout_seconds == 30);
    CHECK(configs[0].body_template.find("{{prompt}}") != std::string::npos);
    CHECK(configs[1].auth_env.empty());

    CHECK(error_of([] { parse_provider_configs("[x]\nendpoint = \"u\"\n"); }) == Errc::ConfigError);
    CHECK(error_of([] { parse_provider_configs("key = \"v\"\n"); }) == Errc::ConfigError);
    CHECK(error_of([] { make_provider("nobody", {}); }) == Errc::ConfigError);
    CHECK_NOTHROW(load_provider_configs(std::string(WIRESPEC_DATA_DIR) + "/../providers.example.toml"));
}

TEST_CASE("body templates substitute JSON-encoded values")
{
    HttpProvider http(fake_config(1));
    GenerationParams p{0.0, 64, {"STOP"}, "m1"};
    auto body = nlohmann::json::parse(http.render_body("say \"hi\"\n", p));
    CHECK(body["prompt"] == "say \"hi\"\n");
    CHECK(body["model"] == "m1");
    CHECK(body["n"] == 64);
    CHECK(body["stop"][0] == "STOP");
}

TEST_CASE("response paths")
{
    auto doc = nlohmann::json::parse(R"({"a": [{"b": "x"}], "n": 3})");
    CHECK(HttpProvider::extract_text(doc, "a.0.b") == "x");
    CHECK(error_of([&] { HttpProvider::extract_text(doc, "a.1.b"); }) == Errc::TransportError);
    CHECK(error_of([&] { HttpProvider::extract_text(doc, "n"); }) == Errc::TransportError);
    CHECK(error_of([&] { HttpProvider::extract_text(doc, "zz"); }) == Errc::TransportError);
}

TEST_CASE("live requests send the credential from the environment only")
{
    FakeEndpoint fake;
    HttpProvider http(fake_config(fake.port));
    ::unsetenv("WIRESPEC_TEST_KEY");
    CHECK(error_of([&] { http.complete("p", {}); }) == Errc::ConfigError);

    ::setenv("WIRESPEC_TEST_KEY", "k-123", 1);
    auto c = http.complete("p", {});
    CHECK(c.text == "hello");
    CHECK(fake.last_auth == "Bearer k-123");
    CHECK(fake.last_body.find("k-123") == std::string::npos);

    fake.status = 429;
    try {
        http.complete("p", {});
        FAIL("expected ProviderError");
    } catch (const ProviderError& e) {
        CHECK(e.status() == 429);
        CHECK(e.body() == "quota exceeded");
    }
    ::unsetenv("WIRESPEC_TEST_KEY");
}

TEST_CASE("unreachable endpoints are transport errors")
{
    auto cfg = fake_config(1);
    cfg.auth_env.clear();
    cfg.timeout_seconds = 1;
    HttpProvider http(cfg);
    CHECK(error_of([&] { http.complete("p", {}); }) == Errc::TransportError);
}

TEST_CASE("token counting")
{
    CHECK(count_prompt_tokens("abcdefgh", "chars4") == 2);
    CHECK(count_prompt_tokens("abcdefghi", "chars4") == 3);
    CHECK(count_prompt_tokens("hello, world!", "fallback") == 4);
    CHECK(count_prompt_tokens("", "fallback") == 0);
    CHECK(error_of([] { count_prompt_tokens("x", "bpe-9000"); }) == Errc::UnknownTokenizer);
}
