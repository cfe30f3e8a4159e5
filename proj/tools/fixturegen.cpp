// Turns a scripted scenario into replay transcripts: every scripted response
// is pushed through the real pipeline behind a RecordingProvider, so the
// stored digests are exactly the ones a replay run will ask for.
//
//   fixturegen data/scenarios/*.json

#include "wirespec/bench.hpp"
#include "wirespec/pipeline.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace wirespec;

namespace {

nlohmann::json read_json(const fs::path& p)
{
    std::ifstream in(p);
    if (!in) {
        throw Error(Errc::IoError, "cannot read " + p.string());
    }
    return nlohmann::json::parse(in);
}

std::string read_text(const fs::path& p)
{
    std::ifstream in(p);
    if (!in) {
        throw Error(Errc::IoError, "cannot read " + p.string());
    }
    std::string s((std::istreambuf_iterator<char>(in)), {});
    while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) {
        s.pop_back();
    }
    return s;
}

void pipeline_scenario(const nlohmann::json& sc, const fs::path& base, const PromptTemplate& tpl,
                       const KnowledgeBase& kb)
{
    auto out = base / sc.at("transcript").get<std::string>();
    fs::create_directories(out.parent_path());
    fs::remove(out);

    std::vector<std::string> responses = sc.at("responses");
    for (const auto& r : sc.value("refine", nlohmann::json::array())) {
        for (const auto& text : r.at("responses")) {
            responses.push_back(text);
        }
    }
    auto scripted = std::make_shared<ScriptedProvider>(responses, sc.at("timestamp"));
    RecordingProvider recorder(scripted, out.string());

    GenerationLimits limits{sc.value("max_reflections", GenerationLimits{}.max_reflections)};
    PipelineContext ctx{recorder, tpl, kb, GenerationParams{}, limits};
    auto description = read_text(base / sc.at("description_file").get<std::string>());

    auto session = generate_turn(Session{}, description, ctx);
    for (const auto& r : sc.value("refine", nlohmann::json::array())) {
        session = refine(std::move(session), r.at("text"), ctx);
    }
    if (scripted->remaining() != 0) {
        throw Error(Errc::SchemaError, std::to_string(scripted->remaining()) + " scripted responses unused");
    }
    std::cout << out.string() << ": " << recorder.transcript().entries().size() << " entries, "
              << to_string(session.turns.back().run.termination) << "\n";
}

void bench_scenario(const nlohmann::json& sc, const fs::path& base, const PromptTemplate& tpl,
                    const KnowledgeBase& kb)
{
    auto tasks = load_tasks((base / sc.at("tasks").get<std::string>()).string());
    auto dir = base / sc.at("transcripts").get<std::string>();
    fs::remove_all(dir);
    fs::create_directories(dir);

    const auto& responses = sc.at("responses");
    for (const auto& task : tasks) {
        if (!responses.contains(task.id)) {
            throw Error(Errc::UnknownTaskId, "no scripted responses for " + task.id);
        }
        auto scripted = std::make_shared<ScriptedProvider>(
            responses.at(task.id).get<std::vector<std::string>>(), sc.at("timestamp"));
        RecordingProvider recorder(scripted, (dir / (task.id + ".json")).string());
        PipelineContext ctx{recorder, tpl, kb};
        auto run = generate_device(task.description, ctx);
        if (scripted->remaining() != 0) {
            throw Error(Errc::SchemaError, task.id + ": scripted responses unused");
        }
        if (run.termination != Termination::StopToken) {
            std::cerr << "warning: " << task.id << " ended by " << to_string(run.termination) << "\n";
        }
    }
    std::cout << dir.string() << ": " << tasks.size() << " tasks\n";
}

} // namespace

int main(int argc, char** argv)
{
    if (argc < 2) {
        std::cerr << "usage: fixturegen SCENARIO.json...\n";
        return 2;
    }
    try {
        auto kb = KnowledgeBase::load(default_kb_path());
        auto tpl = PromptTemplate::load(default_template_path());
        for (int i = 1; i < argc; ++i) {
            fs::path path = argv[i];
            auto sc = read_json(path);
            auto kind = sc.at("kind").get<std::string>();
            if (kind == "pipeline") {
                pipeline_scenario(sc, path.parent_path(), tpl, kb);
            } else if (kind == "bench") {
                bench_scenario(sc, path.parent_path(), tpl, kb);
            } else {
                throw Error(Errc::SchemaError, path.string() + ": unknown scenario kind '" + kind + "'");
            }
        }
    } catch (const std::exception& e) {
        std::cerr << "fixturegen: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
