#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <set>

#include "radisynth/csg.hpp"
#include "radisynth/errors.hpp"
#include "radisynth/specimen.hpp"
#include "radisynth/stl_io.hpp"

using namespace radisynth;

TEST_CASE("tessellate box: 8 vertices, 12 triangles, volume 16000") {
    TriMesh m = tessellate(*csg_box({100, 4, 40}, true));
    CHECK(m.vertices.size() == 8);
    CHECK(m.triangles.size() == 12);
    CHECK(is_watertight(m));
    CHECK(mesh_volume(m) == doctest::Approx(16000.0).epsilon(1e-12));
}

TEST_CASE("tessellate sphere: volume within 2% of analytic") {
    TriMesh m = tessellate(*csg_sphere(0.5, 20));
    CHECK(is_watertight(m));
    double analytic = 4.0 / 3.0 * kPi * 0.5 * 0.5 * 0.5;
    CHECK(std::abs(mesh_volume(m) - analytic) / analytic < 0.02);
}

TEST_CASE("tessellate transformed sphere: volume scales with determinant") {
    TriMesh unit = tessellate(*csg_sphere(1.0, 24));
    Transform t;
    t.scale = {2, 1, 1};
    TriMesh scaled = tessellate(*csg_transform(t, csg_sphere(1.0, 24)));
    CHECK(mesh_volume(scaled) ==
          doctest::Approx(2.0 * mesh_volume(unit)).epsilon(1e-9));
}

TEST_CASE("volume conservation under anisotropic scale") {
    Transform t;
    t.scale = {1.7, 0.3, 2.4};
    t.rotation_deg = {10, 20, 30};
    t.translation = {5, -3, 1};
    TriMesh base = tessellate(*csg_sphere(0.8, 16));
    TriMesh xf = tessellate(*csg_transform(t, csg_sphere(0.8, 16)));
    CHECK(mesh_volume(xf) ==
          doctest::Approx(1.7 * 0.3 * 2.4 * mesh_volume(base)).epsilon(1e-9));
}

TEST_CASE("tessellate rejects boolean nodes naming the path") {
    auto node = csg_boolean(CsgOp::Union, {csg_sphere(1), csg_box({1, 1, 1})});
    CHECK_THROWS_AS(tessellate(*node), UnsupportedConstructError);
}

TEST_CASE("segments below 6 rejected") {
    CHECK_THROWS_AS(tessellate(*csg_sphere(1.0, 4)), ValidationError);
}

TEST_CASE("decompose plate with 3 pores into 4 effective meshes") {
    Material al{"aluminum", 0.15}, air{"air", 0.0};
    std::vector<CsgNodePtr> pores;
    for (double x : {9.24, 3.15, -5.65}) {
        Transform t;
        t.translation = {x, 0, 0};
        t.scale = {0.96, 0.86, 1.31};
        pores.push_back(csg_transform(t, csg_sphere(0.5, 20)));
    }
    auto node = csg_boolean(
        CsgOp::Difference,
        {csg_box({100, 4, 40}, true), csg_boolean(CsgOp::Union, std::move(pores))});
    auto meshes = decompose(*node, al, air);
    REQUIRE(meshes.size() == 4);
    CHECK(meshes[0].material.mu == doctest::Approx(0.15));
    for (int i = 1; i < 4; ++i) {
        CHECK(meshes[i].material.mu == doctest::Approx(-0.15));
        CHECK(is_watertight(meshes[i]));
    }
}

TEST_CASE("decompose with empty defect union yields host only") {
    Material al{"al", 0.1}, air{"air", 0.0};
    auto node = csg_boolean(CsgOp::Difference,
                            {csg_box({10, 2, 10}, true), csg_boolean(CsgOp::Union, {})});
    auto meshes = decompose(*node, al, air);
    CHECK(meshes.size() == 1);
}

TEST_CASE("decompose rejects a pore crossing the host boundary") {
    Material al{"al", 0.1}, air{"air", 0.0};
    Transform t;
    t.translation = {0, 2, 0}; // centered on the y = +2 face of a 4 mm plate
    auto node = csg_boolean(
        CsgOp::Difference,
        {csg_box({100, 4, 40}, true),
         csg_boolean(CsgOp::Union, {csg_transform(t, csg_sphere(0.5, 20))})});
    CHECK_THROWS_AS(decompose(*node, al, air), ContainmentError);
}

TEST_CASE("decompose rejects unsupported patterns") {
    Material al{"al", 0.1}, air{"air", 0.0};
    CHECK_THROWS_AS(decompose(*csg_sphere(1), al, air), UnsupportedConstructError);
    auto inter = csg_boolean(CsgOp::Intersection, {csg_sphere(1), csg_box({1, 1, 1})});
    CHECK_THROWS_AS(decompose(*inter, al, air), UnsupportedConstructError);
}

TEST_CASE("mesh_volume rejects non-watertight meshes listing boundary edges") {
    TriMesh open;
    open.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
    open.triangles = {{0, 1, 2}};
    CHECK_THROWS_AS(mesh_volume(open), TopologyError);
}

TEST_CASE("generate_pore_plate: count, determinism, containment, disjointness") {
    PorePlateParams p;
    p.pore_count = 100;
    Material al{"aluminum", 0.15};
    SpecimenSpec a = generate_pore_plate(p, al, 7);
    SpecimenSpec b = generate_pore_plate(p, al, 7);
    REQUIRE(a.defects.size() == 100);
    CHECK(a.to_json() == b.to_json()); // bit-identical regeneration

    Vec3 half = p.plate_size * 0.5;
    for (const auto& pore : a.defects) {
        Vec3 ext = pore.world_extent();
        CHECK(std::abs(pore.center.x) + ext.x <= half.x - p.margin + 1e-12);
        CHECK(std::abs(pore.center.y) + ext.y <= half.y - p.margin + 1e-12);
        CHECK(std::abs(pore.center.z) + ext.z <= half.z - p.margin + 1e-12);
        CHECK(pore.scale.x >= p.scale_min);
        CHECK(pore.scale.x <= p.scale_max);
        CHECK(pore.rotation_z_deg >= p.rot_min_deg);
        CHECK(pore.rotation_z_deg <= p.rot_max_deg);
    }
    // analytic pairwise disjointness: sample one surface against the other
    for (std::size_t i = 0; i < a.defects.size(); ++i) {
        for (std::size_t j = i + 1; j < a.defects.size(); ++j) {
            const auto& pi = a.defects[i];
            const auto& pj = a.defects[j];
            if ((pi.center - pj.center).norm() > 5) continue;
            for (int s = 0; s < 64; ++s) {
                double th = 2 * kPi * s / 64.0, ph = kPi * ((s * 7) % 64) / 64.0;
                Vec3 unit{std::sin(ph) * std::cos(th), std::sin(ph) * std::sin(th),
                          std::cos(ph)};
                Vec3 surf = pi.center +
                            Mat3::rot_z(pi.rotation_z_deg) * unit.cwise(pi.semi_axes());
                CHECK_FALSE(pj.contains(surf));
            }
        }
    }
}

TEST_CASE("generate_pore_plate: zero pores gives defect-free plate") {
    PorePlateParams p;
    p.pore_count = 0;
    SpecimenSpec s = generate_pore_plate(p, {"al", 0.1}, 1);
    CHECK(s.defects.empty());
}

TEST_CASE("generate_pore_plate: impossible packing raises PackingError") {
    PorePlateParams p;
    p.plate_size = {4, 4, 4};
    p.margin = 0.5;
    p.pore_count = 500;
    p.scale_min = p.scale_max = 2.0; // 1 mm semi-axes in a 3 mm cavity
    CHECK_THROWS_AS(generate_pore_plate(p, {"al", 0.1}, 3), PackingError);
}

TEST_CASE("specimen spec JSON round trip is lossless") {
    PorePlateParams p;
    p.pore_count = 17;
    SpecimenSpec s = generate_pore_plate(p, {"aluminum", 0.15}, 42);
    SpecimenSpec back = SpecimenSpec::from_json(s.to_json());
    CHECK(back.to_json() == s.to_json());
    CHECK(back.defects.size() == 17);
}

TEST_CASE("pores CSV has the fixed header and one row per pore") {
    PorePlateParams p;
    p.pore_count = 2;
    SpecimenSpec s = generate_pore_plate(p, {"al", 0.1}, 5);
    std::string csv = s.pores_csv();
    CHECK(csv.rfind("id,cx,cy,cz,r,sx,sy,sz,rot_deg\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
}

TEST_CASE("generate_fml_stack: thickness sum and exact interfaces") {
    std::vector<LayerSpec> layers = {{{"al", 0.15}, 0.5},
                                     {{"preg", 0.03}, 0.25},
                                     {{"al", 0.15}, 0.5},
                                     {{"preg", 0.03}, 0.25},
                                     {{"al", 0.15}, 0.5}};
    SpecimenSpec s = generate_fml_stack({100, 0, 40}, layers);
    CHECK(s.stack_thickness() == doctest::Approx(2.0));
    auto meshes = specimen_meshes(s, {"air", 0.0});
    REQUIRE(meshes.size() == 5);
    double prev_top = -1.0; // stack starts at -T/2
    for (const auto& m : meshes) {
        Aabb b = m.bounds();
        CHECK(b.lo.y == doctest::Approx(prev_top).epsilon(1e-12));
        prev_top = b.hi.y;
    }
    CHECK(prev_top == doctest::Approx(1.0));
}

TEST_CASE("generate_fml_stack: single layer equals a plain plate") {
    SpecimenSpec s = generate_fml_stack({10, 0, 10}, {{{"al", 0.1}, 2.0}});
    auto meshes = specimen_meshes(s, {"air", 0.0});
    REQUIRE(meshes.size() == 1);
    CHECK(mesh_volume(meshes[0]) == doctest::Approx(200.0));
}

TEST_CASE("generate_fml_stack validates thickness") {
    CHECK_THROWS_AS(generate_fml_stack({10, 0, 10}, {{{"al", 0.1}, 0.0}}),
                    ValidationError);
}

TEST_CASE("STL binary round trip: unit box is exactly 684 bytes") {
    TriMesh box = tessellate(*csg_box({1, 1, 1}, true));
    auto bytes = stl_write(box);
    CHECK(bytes.size() == 80 + 4 + 12 * 50);
    TriMesh back = stl_read(bytes);
    CHECK(back.triangles.size() == 12);
    CHECK(back.vertices.size() == 8);
    CHECK(mesh_volume(back) == doctest::Approx(1.0));
}

TEST_CASE("STL ascii with one facet parses") {
    std::string text =
        "solid t\n facet normal 0 0 1\n  outer loop\n"
        "   vertex 0 0 0\n   vertex 1 0 0\n   vertex 0 1 0\n"
        "  endloop\n endfacet\nendsolid t\n";
    TriMesh m = stl_read({text.begin(), text.end()});
    CHECK(m.triangles.size() == 1);
    CHECK(m.vertices.size() == 3);
}

TEST_CASE("STL round trip preserves tessellated sphere volume") {
    TriMesh m = tessellate(*csg_sphere(0.5, 20));
    TriMesh back = stl_read(stl_write(m));
    CHECK(is_watertight(back));
    CHECK(mesh_volume(back) == doctest::Approx(mesh_volume(m)).epsilon(1e-6));
}

TEST_CASE("STL parse errors carry byte context") {
    std::vector<std::uint8_t> short_file(50, 0);
    CHECK_THROWS_AS(stl_read(short_file), ParseError);
    TriMesh box = tessellate(*csg_box({1, 1, 1}, true));
    auto bytes = stl_write(box);
    bytes.resize(bytes.size() - 10); // truncate mid-triangle
    CHECK_THROWS_AS(stl_read(bytes), ParseError);
}

TEST_CASE("host-with-defects volume audit vs ray-integrated thickness") {
    // DERIVED oracle: integrate material thickness over a dense parallel-ray
    // grid through the plate and compare with mesh volumes.
    PorePlateParams p;
    p.plate_size = {20, 4, 20};
    p.pore_count = 12;
    SpecimenSpec s = generate_pore_plate(p, {"al", 0.15}, 11);
    auto meshes = specimen_meshes(s, {"air", 0.0}, 32);
    double host_vol = mesh_volume(meshes[0]);
    double pore_vol = 0;
    for (std::size_t i = 1; i < meshes.size(); ++i) pore_vol += mesh_volume(meshes[i]);
    double material_vol = host_vol - pore_vol;

    // analytic ray integration on a grid (plate minus exact ellipsoid chords)
    int n = 400;
    double dx = p.plate_size.x / n, dz = p.plate_size.z / n;
    double integrated = 0;
    for (int ix = 0; ix < n; ++ix) {
        for (int iz = 0; iz < n; ++iz) {
            Vec3 o{-p.plate_size.x / 2 + (ix + 0.5) * dx, -10,
                   -p.plate_size.z / 2 + (iz + 0.5) * dz};
            double len = p.plate_size.y;
            for (const auto& pore : s.defects) {
                double t0, t1;
                if (pore.ray_hit(o, {0, 1, 0}, t0, t1)) len -= (t1 - t0);
            }
            integrated += len * dx * dz;
        }
    }
    CHECK(std::abs(material_vol - integrated) / integrated < 0.01);
}
