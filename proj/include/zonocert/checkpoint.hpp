#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "zonocert/network.hpp"

namespace zonocert::nn {

struct Checkpoint {
    LayeredNetwork net;
    std::uint64_t seed = 0;
};

// Plain-text network snapshot: layer kinds, shapes, row-major parameters as
// decimal literals, freeze flags and the seed the parameters came from.
// Serialization is canonical, so write -> read -> write is byte-identical.
void write_checkpoint(std::ostream& os, const LayeredNetwork& net, std::uint64_t seed);
void write_checkpoint_file(const std::string& path, const LayeredNetwork& net, std::uint64_t seed);
Checkpoint read_checkpoint(std::istream& is);
Checkpoint read_checkpoint_file(const std::string& path);

// Canonical decimal form used across all artifacts (round-trips exactly).
std::string format_double(double v);

} // namespace zonocert::nn
