#pragma once

#include "wirespec/devicespec.hpp"
#include "wirespec/partsdb.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace wirespec {

/// One "NET n: A.x B.y ..." line per net, after a '#' header comment. With a
/// knowledge base, nets holding a supply or ground pin carry a [VCC]/[GND]
/// label. Throws Error(InvalidSpec) for specs that fail validation.
std::string to_flat_netlist(const DeviceSpec& spec, const KnowledgeBase* kb = nullptr);

/// Reads the flat format back into nets. Comments and blank lines are skipped;
/// labels are kept. Throws Error(SchemaError) on malformed lines.
std::vector<Net> parse_flat_netlist(std::string_view text);

/// JSON Graph Format document: one node per part, one undirected edge per
/// connection. Throws Error(InvalidSpec).
std::string to_graph_doc(const DeviceSpec& spec);

} // namespace wirespec
