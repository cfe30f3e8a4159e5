#include "wirespec/errors.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <sstream>

namespace wirespec {

std::string_view errc_name(Errc code)
{
    switch (code) {
    case Errc::InvalidPartRef: return "InvalidPartRef";
    case Errc::InvalidSpec: return "InvalidSpec";
    case Errc::NoParsableContent: return "NoParsableContent";
    case Errc::MalformedEndpoint: return "MalformedEndpoint";
    case Errc::RangeShortcut: return "RangeShortcut";
    case Errc::SchemaError: return "SchemaError";
    case Errc::DuplicateAlias: return "DuplicateAlias";
    case Errc::DuplicateId: return "DuplicateId";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::PrereqFailed: return "PrereqFailed";
    case Errc::UnknownRule: return "UnknownRule";
    case Errc::ReplayMiss: return "ReplayMiss";
    case Errc::TransportError: return "TransportError";
    case Errc::ProviderError: return "ProviderError";
    case Errc::UnknownTokenizer: return "UnknownTokenizer";
    case Errc::ParseFailure: return "ParseFailure";
    case Errc::NoBaseSpec: return "NoBaseSpec";
    case Errc::UnknownTaskId: return "UnknownTaskId";
    case Errc::ConfigError: return "ConfigError";
    case Errc::IoError: return "IoError";
    }
    return "Unknown";
}

// "-" means standard input, so every file-taking command composes in pipes.
std::string read_file(const std::string& path)
{
    if (path == "-") {
        return std::string(std::istreambuf_iterator<char>(std::cin), {});
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(Errc::IoError, "cannot open " + path);
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, std::string_view content)
{
    if (path == "-") {
        std::cout << content;
        return;
    }
    auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) {
        std::filesystem::create_directories(parent);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(Errc::IoError, "cannot write " + path);
    }
    out << content;
}

} // namespace wirespec
