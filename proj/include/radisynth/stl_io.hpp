#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "radisynth/mesh.hpp"

namespace radisynth {

// Binary STL: 80-byte header, uint32 triangle count, 50 bytes per triangle
// (normal 3f, vertices 9f, uint16 attribute). Vertices are welded on read by
// exact float-coordinate match so topology checks work afterwards.
TriMesh stl_read(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> stl_write(const TriMesh& mesh);

TriMesh stl_read_file(const std::string& path);
void stl_write_file(const TriMesh& mesh, const std::string& path);

} // namespace radisynth
