#include "support.hpp"

#include <doctest.h>
#include <httplib.h>

#include "wirespec/service.hpp"

#include <atomic>
#include <condition_variable>
#include <thread>

using namespace wirespec;

namespace {

std::string description()
{
    auto s = read_file(testing::data_path("scenarios/refine.txt"));
    while (!s.empty() && s.back() == '\n') {
        s.pop_back();
    }
    return s;
}

// Runs a Service on an ephemeral port for the lifetime of the object.
struct Running {
    Service service;
    std::thread thread;
    int port = 0;

    explicit Running(ServiceConfig cfg) : service(std::move(cfg))
    {
        port = service.bind_any("127.0.0.1");
        thread = std::thread([this] { service.listen_after_bind(); });
        service.wait_until_ready();
    }
    ~Running()
    {
        service.stop();
        thread.join();
    }

    httplib::Client client() const
    {
        httplib::Client c("127.0.0.1", port);
        c.set_read_timeout(30, 0);
        return c;
    }
};

ServiceConfig config_for(const std::filesystem::path& state)
{
    ServiceConfig cfg;
    cfg.state_dir = state.string();
    cfg.provider_factory = [](const std::string& name) -> std::shared_ptr<Provider> {
        if (name == "refine") {
            return make_provider("replay:" + testing::data_path("transcripts/refine.json"), {});
        }
        if (name == "prose") {
            return std::make_shared<ScriptedProvider>(
                std::vector<std::string>{"no", "no", "no", "no"});
        }
        if (name == "down") {
            struct Down : Provider {
                Completion complete(const std::string&, const GenerationParams&) override
                {
                    throw ProviderError(503, "overloaded");
                }
                std::string describe() const override { return "down"; }
            };
            return std::make_shared<Down>();
        }
        throw Error(Errc::ConfigError, "unknown provider '" + name + "'");
    };
    return cfg;
}

nlohmann::json body_of(const httplib::Result& r)
{
    REQUIRE(r);
    return nlohmann::json::parse(r->body);
}

std::string new_session(httplib::Client& c, const std::string& provider)
{
    auto r = c.Post("/sessions", nlohmann::json{{"provider", provider}}.dump(), "application/json");
    REQUIRE(r);
    REQUIRE(r->status == 201);
    return body_of(r)["id"];
}

} // namespace

TEST_CASE("health")
{
    auto dir = testing::scratch_dir("svc-health");
    Running svc(config_for(dir));
    auto c = svc.client();
    auto r = c.Get("/healthz");
    REQUIRE(r);
    CHECK(r->status == 200);
    std::filesystem::remove_all(dir);
}

TEST_CASE("a session generates, refines, exports and survives a restart")
{
    auto dir = testing::scratch_dir("svc-flow");
    std::string id;
    {
        Running svc(config_for(dir));
        auto c = svc.client();
        id = new_session(c, "refine");
        CHECK(id.size() == 16);
        CHECK(std::filesystem::exists(dir / "sessions" / id / "session.json"));

        auto early = c.Get("/sessions/" + id + "/spec");
        REQUIRE(early);
        CHECK(early->status == 404);
        CHECK(body_of(early)["error"] == "NoBaseSpec");

        auto gen = c.Post("/sessions/" + id + "/generate",
                          nlohmann::json{{"description", description()}}.dump(), "application/json");
        REQUIRE(gen);
        REQUIRE(gen->status == 200);
        auto run = body_of(gen);
        CHECK(run["termination"] == "stop_token");
        CHECK(run["turn"] == 1);

        auto erc = c.Get("/sessions/" + id + "/erc");
        REQUIRE(erc);
        CHECK(body_of(erc)["findings"].empty());

        auto spec = c.Get("/sessions/" + id + "/spec");
        REQUIRE(spec);
        CHECK(spec->status == 200);
        CHECK(body_of(spec)["bill_of_materials"].size() == 5);
        CHECK(std::filesystem::exists(dir / "sessions" / id / "turns" / "0001.json"));
    }
    {
        Running svc(config_for(dir));
        CHECK(svc.service.session_count() == 1);
        auto c = svc.client();
        auto sc = testing::load_json("scenarios/refine.json");
        auto ref = c.Post("/sessions/" + id + "/refine",
                          nlohmann::json{{"text", sc["refine"][0]["text"]}}.dump(), "application/json");
        REQUIRE(ref);
        REQUIRE(ref->status == 200);
        CHECK(body_of(ref)["spec"]["bill_of_materials"].size() == 7);

        auto hist = body_of(c.Get("/sessions/" + id));
        REQUIRE(hist["turns"].size() == 2);
        CHECK(hist["turns"][1]["kind"] == "refine");

        auto flat = c.Get("/sessions/" + id + "/export?format=flat");
        REQUIRE(flat);
        CHECK(flat->status == 200);
        CHECK(flat->body.rfind("# flat netlist", 0) == 0);
        auto graph = c.Get("/sessions/" + id + "/export?format=graph");
        REQUIRE(graph);
        CHECK(body_of(graph)["graph"]["nodes"].contains("LED2"));
        auto bad = c.Get("/sessions/" + id + "/export?format=dot");
        REQUIRE(bad);
        CHECK(bad->status == 400);
    }
    std::filesystem::remove_all(dir);
}

TEST_CASE("error mapping")
{
    auto dir = testing::scratch_dir("svc-errors");
    Running svc(config_for(dir));
    auto c = svc.client();

    auto unknown = c.Get("/sessions/0000000000000000/erc");
    REQUIRE(unknown);
    CHECK(unknown->status == 404);

    auto no_provider = c.Post("/sessions", "{}", "application/json");
    REQUIRE(no_provider);
    CHECK(no_provider->status == 400);

    auto bad_provider = c.Post("/sessions", R"({"provider": "nope"})", "application/json");
    REQUIRE(bad_provider);
    CHECK(bad_provider->status == 400);

    auto junk = c.Post("/sessions", "not json", "application/json");
    REQUIRE(junk);
    CHECK(junk->status == 400);

    auto id = new_session(c, "down");
    auto down = c.Post("/sessions/" + id + "/generate", R"({"description": "x"})", "application/json");
    REQUIRE(down);
    CHECK(down->status == 502);
    CHECK(body_of(down)["provider_status"] == 503);
    CHECK(body_of(down)["detail"] == "overloaded");

    auto no_text = c.Post("/sessions/" + id + "/generate", "{}", "application/json");
    REQUIRE(no_text);
    CHECK(no_text->status == 400);

    auto refine_first = c.Post("/sessions/" + id + "/refine", R"({"text": "x"})", "application/json");
    REQUIRE(refine_first);
    CHECK(refine_first->status == 422);

    auto prose = new_session(c, "prose");
    auto failed = c.Post("/sessions/" + prose + "/generate", R"({"description": "x"})", "application/json");
    REQUIRE(failed);
    CHECK(failed->status == 422);
    CHECK(body_of(failed)["error"] == "ParseFailure");
    CHECK(body_of(failed).contains("diagnostics"));
    std::filesystem::remove_all(dir);
}

TEST_CASE("one turn at a time per session")
{
    struct Gate {
        std::mutex m;
        std::condition_variable cv;
        bool entered = false;
        bool release = false;
    };
    auto gate = std::make_shared<Gate>();
    struct Blocking : Provider {
        std::shared_ptr<Gate> gate;
        explicit Blocking(std::shared_ptr<Gate> g) : gate(std::move(g)) {}
        Completion complete(const std::string&, const GenerationParams&) override
        {
            std::unique_lock lock(gate->m);
            gate->entered = true;
            gate->cv.notify_all();
            gate->cv.wait(lock, [&] { return gate->release; });
            throw ProviderError(500, "stopped");
        }
        std::string describe() const override { return "blocking"; }
    };

    auto dir = testing::scratch_dir("svc-busy");
    auto cfg = config_for(dir);
    cfg.provider_factory = [gate](const std::string&) { return std::make_shared<Blocking>(gate); };
    Running svc(cfg);
    auto c = svc.client();
    auto id = new_session(c, "blocking");

    std::thread first([&] {
        auto c2 = svc.client();
        c2.Post("/sessions/" + id + "/generate", R"({"description": "x"})", "application/json");
    });
    {
        std::unique_lock lock(gate->m);
        gate->cv.wait(lock, [&] { return gate->entered; });
    }
    auto second = c.Post("/sessions/" + id + "/generate", R"({"description": "y"})", "application/json");
    REQUIRE(second);
    CHECK(second->status == 409);
    {
        std::lock_guard lock(gate->m);
        gate->release = true;
    }
    gate->cv.notify_all();
    first.join();
    std::filesystem::remove_all(dir);
}

TEST_CASE("static UI directory")
{
    auto dir = testing::scratch_dir("svc-ui");
    std::filesystem::create_directories(dir / "ui");
    write_file((dir / "ui" / "index.html").string(), "<html>studio</html>");
    auto cfg = config_for(dir / "state");
    cfg.ui_dir = (dir / "ui").string();
    {
        Running svc(cfg);
        auto c = svc.client();
        auto r = c.Get("/index.html");
        REQUIRE(r);
        CHECK(r->body.find("studio") != std::string::npos);
        CHECK(c.Get("/healthz")->status == 200);
    }
    cfg.ui_dir = (dir / "missing").string();
    CHECK_THROWS_AS(Service{cfg}, Error);
    std::filesystem::remove_all(dir);
}
