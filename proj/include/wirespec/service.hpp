#pragma once

#include "wirespec/pipeline.hpp"

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

namespace httplib {
class Server;
}

namespace wirespec {

using ProviderFactory = std::function<std::shared_ptr<Provider>(const std::string& name)>;

struct ServiceConfig {
    std::string state_dir = "wirespec-state";
    std::shared_ptr<const KnowledgeBase> kb;
    std::shared_ptr<const PromptTemplate> tpl;
    GenerationParams params{};
    GenerationLimits limits{};
    /// Resolves the `provider` field of POST /sessions. Defaults to
    /// make_provider over `providers`.
    ProviderFactory provider_factory;
    std::vector<ProviderConfig> providers;
    /// Static directory mounted at / (the studio build), if any.
    std::optional<std::string> ui_dir;
};

/// HTTP front end over the pipeline. Sessions are persisted as append-only
/// files under state_dir/sessions/<id>/ and reloaded on construction.
class Service {
public:
    explicit Service(ServiceConfig config);
    ~Service();

    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    /// Registers all routes on `server`.
    void mount(httplib::Server& server);

    /// Blocks serving on host:port. Returns false if the socket could not be bound.
    bool listen(const std::string& host, int port);
    /// Binds an ephemeral port and returns it; serve with listen_after_bind().
    int bind_any(const std::string& host);
    bool listen_after_bind();
    void stop();
    void wait_until_ready() const;

    std::size_t session_count() const;

private:
    struct State;

    std::shared_ptr<State> state_for(const std::string& id) const;
    void restore();

    ServiceConfig config_;
    mutable std::mutex mutex_;
    std::map<std::string, std::shared_ptr<State>> sessions_;
    std::unique_ptr<httplib::Server> server_;
};

} // namespace wirespec
