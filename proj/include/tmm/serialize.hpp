#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "tmm/network.hpp"

namespace tmm {

/// Binary container: magic "TMM1", a little-endian header (kind, component
/// family, patch shape, topology) and then every parameter as a
/// little-endian 64-bit float. Kind 0 marks a shallow (CP) network.
void save_network(std::ostream& out, const Network& net);
void save_network(const std::filesystem::path& path, const Network& net);

/// Throws ParseError on a bad magic, an unknown version or a truncated body.
Network load_network(std::istream& in);
Network load_network(const std::filesystem::path& path);

/// Human-readable dump of architecture and parameters.
std::string network_json(const Network& net);

}  // namespace tmm
