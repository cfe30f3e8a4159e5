#include "wirespec/service.hpp"

#include "wirespec/errors.hpp"
#include "wirespec/export.hpp"

#include <httplib.h>

#include <algorithm>
#include <filesystem>
#include <iomanip>
#include <random>
#include <sstream>

namespace wirespec {

namespace fs = std::filesystem;

struct Service::State {
    std::string id;
    std::string created_at;
    std::string provider_name;
    fs::path dir;
    std::shared_ptr<const PromptTemplate> tpl;
    std::shared_ptr<Provider> provider;

    std::mutex turn;  // held for the whole of a turn-creating request

    std::mutex data;  // guards everything below
    Session session;
    std::string spec_doc;
    ordered_json erc;
    ordered_json history = ordered_json::array();
};

namespace {

std::string new_token()
{
    static std::mutex m;
    static std::mt19937_64 rng{std::random_device{}()};
    std::lock_guard lock(m);
    std::ostringstream s;
    s << std::hex << std::setw(16) << std::setfill('0') << rng();
    return s.str();
}

int status_for(Errc code)
{
    switch (code) {
    case Errc::ProviderError:
    case Errc::TransportError:
    case Errc::ReplayMiss:
        return 502;
    case Errc::ParseFailure:
    case Errc::NoBaseSpec:
    case Errc::InvalidSpec:
        return 422;
    case Errc::ConfigError:
    case Errc::SchemaError:
        return 400;
    default:
        return 500;
    }
}

void reply_json(httplib::Response& res, int status, const ordered_json& body)
{
    res.status = status;
    res.set_content(body.dump(2) + "\n", "application/json");
}

void reply_error(httplib::Response& res, int status, std::string_view code, const std::string& message)
{
    ordered_json body;
    body["error"] = code;
    body["message"] = message;
    reply_json(res, status, body);
}

void reply_error(httplib::Response& res, const Error& e)
{
    ordered_json body;
    body["error"] = errc_name(e.code());
    body["message"] = e.what();
    if (const auto* pe = dynamic_cast<const ProviderError*>(&e)) {
        body["provider_status"] = pe->status();
        body["detail"] = pe->body();
    }
    if (const auto* gf = dynamic_cast<const GenerationFailed*>(&e)) {
        body["diagnostics"] = to_json(gf->diagnostics());
    }
    reply_json(res, status_for(e.code()), body);
}

nlohmann::json parse_body(const httplib::Request& req)
{
    if (req.body.empty()) {
        return nlohmann::json::object();
    }
    auto j = nlohmann::json::parse(req.body, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        throw Error(Errc::SchemaError, "request body must be a JSON object");
    }
    return j;
}

std::string need_field(const nlohmann::json& body, const char* key)
{
    auto it = body.find(key);
    if (it == body.end() || !it->is_string() || it->get<std::string>().empty()) {
        throw Error(Errc::SchemaError, std::string("request needs a non-empty '") + key + "'");
    }
    return it->get<std::string>();
}

std::shared_ptr<const PromptTemplate> template_from(const nlohmann::json& spec,
                                                    std::shared_ptr<const PromptTemplate> fallback)
{
    if (spec.is_null()) {
        return fallback;
    }
    if (spec.is_string()) {
        return std::make_shared<PromptTemplate>(PromptTemplate::load(spec.get<std::string>()));
    }
    return std::make_shared<PromptTemplate>(PromptTemplate::from_json(spec));
}

std::string turn_stem(int n)
{
    std::ostringstream s;
    s << std::setw(4) << std::setfill('0') << n;
    return s.str();
}

ordered_json history_entry(int index, const std::string& kind, const std::string& text,
                           const ordered_json& run)
{
    ordered_json h;
    h["index"] = index;
    h["kind"] = kind;
    h["user_text"] = text;
    h["iterations"] = run.value("iterations", 0);
    h["termination"] = run.value("termination", "");
    std::size_t errors = 0;
    for (const auto& f : run["erc"]["findings"]) {
        errors += f.value("severity", "") == "error" ? 1 : 0;
    }
    h["erc_errors"] = errors;
    return h;
}

} // namespace

Service::Service(ServiceConfig config)
    : config_(std::move(config)), server_(std::make_unique<httplib::Server>())
{
    if (!config_.kb) {
        config_.kb = std::make_shared<KnowledgeBase>(KnowledgeBase::load(default_kb_path()));
    }
    if (!config_.tpl) {
        config_.tpl = std::make_shared<PromptTemplate>(PromptTemplate::load(default_template_path()));
    }
    if (!config_.provider_factory) {
        config_.provider_factory = [configs = config_.providers](const std::string& name) {
            return make_provider(name, configs);
        };
    }
    fs::create_directories(fs::path(config_.state_dir) / "sessions");
    restore();
    mount(*server_);
}

Service::~Service() = default;

std::size_t Service::session_count() const
{
    std::lock_guard lock(mutex_);
    return sessions_.size();
}

std::shared_ptr<Service::State> Service::state_for(const std::string& id) const
{
    std::lock_guard lock(mutex_);
    auto it = sessions_.find(id);
    return it == sessions_.end() ? nullptr : it->second;
}

void Service::restore()
{
    auto root = fs::path(config_.state_dir) / "sessions";
    std::vector<fs::path> dirs;
    for (const auto& entry : fs::directory_iterator(root)) {
        if (entry.is_directory() && fs::exists(entry.path() / "session.json")) {
            dirs.push_back(entry.path());
        }
    }
    std::sort(dirs.begin(), dirs.end());
    for (const auto& dir : dirs) {
        auto meta = nlohmann::json::parse(read_file((dir / "session.json").string()));
        auto st = std::make_shared<State>();
        st->id = meta.at("id").get<std::string>();
        st->created_at = meta.value("created_at", "");
        st->provider_name = meta.value("provider", "");
        st->dir = dir;
        st->tpl = template_from(meta.value("template", nlohmann::json()), config_.tpl);

        std::vector<fs::path> turns;
        if (fs::exists(dir / "turns")) {
            for (const auto& e : fs::directory_iterator(dir / "turns")) {
                auto name = e.path().filename().string();
                if (name.size() == 9 && name.substr(4) == ".json") {
                    turns.push_back(e.path());
                }
            }
        }
        std::sort(turns.begin(), turns.end());
        for (const auto& t : turns) {
            auto doc = ordered_json::parse(read_file(t.string()));
            st->history.push_back(history_entry(static_cast<int>(st->history.size()) + 1,
                                                doc.value("kind", ""), doc.value("user_text", ""),
                                                doc["run"]));
        }
        if (!turns.empty()) {
            auto last = turns.back();
            auto doc = ordered_json::parse(read_file(last.string()));
            st->erc = doc["run"]["erc"];
            st->spec_doc = read_file(last.replace_extension(".device.json").string());
            // Rebuild a base turn so refine works across restarts.
            GenerationRun run;
            run.description = doc["run"].value("description", "");
            run.spec = parse_device_spec(st->spec_doc).spec;
            st->session.turns.push_back({doc.value("user_text", ""), std::move(run)});
        }
        st->session.id = st->id;
        sessions_.emplace(st->id, std::move(st));
    }
}

void Service::mount(httplib::Server& server)
{
    server.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
        ordered_json body;
        body["status"] = "ok";
        reply_json(res, 200, body);
    });

    server.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) {
        try {
            auto body = parse_body(req);
            auto st = std::make_shared<State>();
            st->provider_name = need_field(body, "provider");
            st->tpl = template_from(body.value("template", nlohmann::json()), config_.tpl);
            st->provider = config_.provider_factory(st->provider_name);
            st->created_at = utc_timestamp();
            {
                std::lock_guard lock(mutex_);
                do {
                    st->id = new_token();
                } while (sessions_.count(st->id) != 0 ||
                         fs::exists(fs::path(config_.state_dir) / "sessions" / st->id));
                st->session.id = st->id;
                st->dir = fs::path(config_.state_dir) / "sessions" / st->id;
                fs::create_directories(st->dir / "turns");
                ordered_json meta;
                meta["id"] = st->id;
                meta["created_at"] = st->created_at;
                meta["provider"] = st->provider_name;
                meta["template"] = body.value("template", nlohmann::json());
                write_file((st->dir / "session.json").string(), meta.dump(2) + "\n");
                sessions_.emplace(st->id, st);
            }
            ordered_json out;
            out["id"] = st->id;
            out["created_at"] = st->created_at;
            out["provider"] = st->provider_name;
            reply_json(res, 201, out);
        } catch (const Error& e) {
            reply_error(res, e);
        }
    });

    auto turn_handler = [this](bool is_refine) {
        return [this, is_refine](const httplib::Request& req, httplib::Response& res) {
            auto st = state_for(req.matches[1]);
            if (!st) {
                reply_error(res, 404, "UnknownSession", "no session '" + req.matches[1].str() + "'");
                return;
            }
            std::unique_lock turn(st->turn, std::try_to_lock);
            if (!turn.owns_lock()) {
                reply_error(res, 409, "TurnInFlight", "a turn is already running on this session");
                return;
            }
            try {
                auto body = parse_body(req);
                auto text = need_field(body, is_refine ? "text" : "description");
                if (!st->provider) {
                    st->provider = config_.provider_factory(st->provider_name);
                }
                Session current;
                {
                    std::lock_guard lock(st->data);
                    current = st->session;
                }
                PipelineContext ctx{*st->provider, *st->tpl, *config_.kb, config_.params,
                                    config_.limits};
                auto next = is_refine ? refine(std::move(current), text, ctx)
                                      : generate_turn(std::move(current), text, ctx);
                const auto& run = next.turns.back().run;
                auto run_json = to_json(run);

                std::lock_guard lock(st->data);
                int index = static_cast<int>(st->history.size()) + 1;
                ordered_json record;
                record["kind"] = is_refine ? "refine" : "generate";
                record["user_text"] = text;
                record["run"] = run_json;
                auto stem = (st->dir / "turns" / turn_stem(index)).string();
                auto spec_doc = render_document(run.spec);
                write_file(stem + ".device.json", spec_doc);
                write_file(stem + ".json", record.dump(2) + "\n");

                st->history.push_back(history_entry(index, record["kind"], text, run_json));
                st->spec_doc = std::move(spec_doc);
                st->erc = run_json["erc"];
                // Older runs are on disk; memory keeps only the base for the next turn.
                next.turns.erase(next.turns.begin(), next.turns.end() - 1);
                st->session = std::move(next);

                run_json["turn"] = index;
                reply_json(res, 200, run_json);
            } catch (const Error& e) {
                reply_error(res, e);
            }
        };
    };
    server.Post(R"(/sessions/([^/]+)/generate)", turn_handler(false));
    server.Post(R"(/sessions/([^/]+)/refine)", turn_handler(true));

    // Read-side endpoints share the lookup and "nothing generated yet" handling.
    auto reader = [this](auto fn) {
        return [this, fn](const httplib::Request& req, httplib::Response& res) {
            auto st = state_for(req.matches[1]);
            if (!st) {
                reply_error(res, 404, "UnknownSession", "no session '" + req.matches[1].str() + "'");
                return;
            }
            try {
                std::lock_guard lock(st->data);
                fn(*st, req, res);
            } catch (const Error& e) {
                reply_error(res, e);
            }
        };
    };
    auto need_spec = [](const State& st, httplib::Response& res) {
        if (st.spec_doc.empty()) {
            reply_error(res, 404, "NoBaseSpec", "session has no generated spec yet");
            return false;
        }
        return true;
    };

    server.Get(R"(/sessions/([^/]+))",
               reader([](State& st, const httplib::Request&, httplib::Response& res) {
                   ordered_json out;
                   out["id"] = st.id;
                   out["created_at"] = st.created_at;
                   out["provider"] = st.provider_name;
                   out["turns"] = st.history;
                   reply_json(res, 200, out);
               }));

    server.Get(R"(/sessions/([^/]+)/spec)",
               reader([need_spec](State& st, const httplib::Request&, httplib::Response& res) {
                   if (need_spec(st, res)) {
                       res.set_content(st.spec_doc, "application/json");
                   }
               }));

    server.Get(R"(/sessions/([^/]+)/erc)",
               reader([need_spec](State& st, const httplib::Request&, httplib::Response& res) {
                   if (need_spec(st, res)) {
                       reply_json(res, 200, st.erc);
                   }
               }));

    server.Get(R"(/sessions/([^/]+)/export)",
               reader([this, need_spec](State& st, const httplib::Request& req,
                                        httplib::Response& res) {
                   if (!need_spec(st, res)) {
                       return;
                   }
                   auto format = req.has_param("format") ? req.get_param_value("format") : "flat";
                   const auto& spec = st.session.turns.back().run.spec;
                   if (format == "flat") {
                       res.set_content(to_flat_netlist(spec, config_.kb.get()), "text/plain");
                   } else if (format == "graph") {
                       res.set_content(to_graph_doc(spec), "application/json");
                   } else {
                       reply_error(res, 400, "BadFormat", "format must be flat or graph");
                   }
               }));

    if (config_.ui_dir) {
        if (!server.set_mount_point("/", *config_.ui_dir)) {
            throw Error(Errc::ConfigError, "UI directory not found: " + *config_.ui_dir);
        }
    }
}

bool Service::listen(const std::string& host, int port)
{
    return server_->listen(host, port);
}

int Service::bind_any(const std::string& host)
{
    return server_->bind_to_any_port(host);
}

bool Service::listen_after_bind()
{
    return server_->listen_after_bind();
}

void Service::stop()
{
    server_->stop();
}

void Service::wait_until_ready() const
{
    server_->wait_until_ready();
}

} // namespace wirespec
