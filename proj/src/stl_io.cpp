#include "radisynth/stl_io.hpp"

#include <cstring>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "radisynth/errors.hpp"

namespace radisynth {

namespace {

struct Key {
    float x, y, z;
    bool operator==(const Key& o) const { return x == o.x && y == o.y && z == o.z; }
};
struct KeyHash {
    std::size_t operator()(const Key& k) const {
        std::uint32_t a, b, c;
        std::memcpy(&a, &k.x, 4);
        std::memcpy(&b, &k.y, 4);
        std::memcpy(&c, &k.z, 4);
        std::size_t h = a;
        h = h * 0x9e3779b1u + b;
        h = h * 0x9e3779b1u + c;
        return h;
    }
};

class VertexWelder {
public:
    explicit VertexWelder(TriMesh& mesh) : mesh_(mesh) {}
    int index(float x, float y, float z) {
        Key k{x, y, z};
        auto [it, inserted] = map_.emplace(k, static_cast<int>(mesh_.vertices.size()));
        if (inserted) mesh_.vertices.push_back({x, y, z});
        return it->second;
    }

private:
    TriMesh& mesh_;
    std::unordered_map<Key, int, KeyHash> map_;
};

float read_f32(const std::uint8_t* p) {
    float f;
    std::memcpy(&f, p, 4);
    return f;
}

void put_f32(std::vector<std::uint8_t>& out, float f) {
    std::uint8_t b[4];
    std::memcpy(b, &f, 4);
    out.insert(out.end(), b, b + 4);
}

bool looks_ascii(const std::vector<std::uint8_t>& bytes) {
    // "solid" prefix is not sufficient (some binary exporters use it); require
    // that a "facet" token appears in the body as well
    if (bytes.size() < 6 || std::memcmp(bytes.data(), "solid", 5) != 0) return false;
    std::string head(bytes.begin(), bytes.begin() + std::min<std::size_t>(bytes.size(), 2048));
    return head.find("facet") != std::string::npos;
}

TriMesh read_ascii(const std::vector<std::uint8_t>& bytes) {
    std::istringstream in(std::string(bytes.begin(), bytes.end()));
    TriMesh mesh;
    VertexWelder weld(mesh);
    std::string tok;
    std::vector<int> tri;
    while (in >> tok) {
        if (tok == "vertex") {
            float x, y, z;
            if (!(in >> x >> y >> z))
                throw ParseError("ascii STL: malformed vertex line");
            tri.push_back(weld.index(x, y, z));
            if (tri.size() == 3) {
                mesh.triangles.push_back({tri[0], tri[1], tri[2]});
                tri.clear();
            }
        }
    }
    if (!tri.empty()) throw ParseError("ascii STL: facet with fewer than 3 vertices");
    return mesh;
}

} // namespace

TriMesh stl_read(const std::vector<std::uint8_t>& bytes) {
    if (looks_ascii(bytes)) return read_ascii(bytes);
    if (bytes.size() < 84) {
        std::ostringstream os;
        os << "binary STL truncated: " << bytes.size() << " bytes, need at least 84";
        throw ParseError(os.str());
    }
    std::uint32_t count;
    std::memcpy(&count, bytes.data() + 80, 4);
    std::size_t expect = 84 + static_cast<std::size_t>(count) * 50;
    if (bytes.size() < expect) {
        std::ostringstream os;
        os << "binary STL triangle-count mismatch: header says " << count
           << " triangles (" << expect << " bytes) but file ends at byte " << bytes.size();
        throw ParseError(os.str());
    }
    TriMesh mesh;
    VertexWelder weld(mesh);
    const std::uint8_t* p = bytes.data() + 84;
    for (std::uint32_t i = 0; i < count; ++i, p += 50) {
        std::array<int, 3> tri;
        for (int v = 0; v < 3; ++v) {
            const std::uint8_t* q = p + 12 + 12 * v; // skip normal
            tri[v] = weld.index(read_f32(q), read_f32(q + 4), read_f32(q + 8));
        }
        mesh.triangles.push_back(tri);
    }
    return mesh;
}

std::vector<std::uint8_t> stl_write(const TriMesh& mesh) {
    std::vector<std::uint8_t> out;
    out.reserve(84 + mesh.triangles.size() * 50);
    std::string header = "radisynth binary STL";
    header.resize(80, '\0');
    out.insert(out.end(), header.begin(), header.end());
    std::uint32_t count = static_cast<std::uint32_t>(mesh.triangles.size());
    std::uint8_t cb[4];
    std::memcpy(cb, &count, 4);
    out.insert(out.end(), cb, cb + 4);
    for (const auto& tri : mesh.triangles) {
        const Vec3& a = mesh.vertices[tri[0]];
        const Vec3& b = mesh.vertices[tri[1]];
        const Vec3& c = mesh.vertices[tri[2]];
        Vec3 n = (b - a).cross(c - a);
        double len = n.norm();
        if (len > 0) n = n / len;
        put_f32(out, static_cast<float>(n.x));
        put_f32(out, static_cast<float>(n.y));
        put_f32(out, static_cast<float>(n.z));
        for (const Vec3* v : {&a, &b, &c}) {
            put_f32(out, static_cast<float>(v->x));
            put_f32(out, static_cast<float>(v->y));
            put_f32(out, static_cast<float>(v->z));
        }
        out.push_back(0);
        out.push_back(0);
    }
    return out;
}

TriMesh stl_read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw NotFoundError("cannot open STL file: " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return stl_read(bytes);
}

void stl_write_file(const TriMesh& mesh, const std::string& path) {
    auto bytes = stl_write(mesh);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write STL file: " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
}

} // namespace radisynth
