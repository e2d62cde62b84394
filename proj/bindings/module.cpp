#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "radisynth/features.hpp"
#include "radisynth/image.hpp"
#include "radisynth/pipeline.hpp"
#include "radisynth/workspace.hpp"

namespace py = pybind11;
using namespace radisynth;

namespace {

py::array_t<double> image_to_numpy(const ImageF& img) {
    py::array_t<double> out({img.height, img.width});
    auto r = out.mutable_unchecked<2>();
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) r(y, x) = img.at(x, y);
    return out;
}

py::array_t<double> volume_to_numpy(const Volume& vol) {
    py::array_t<double> out({vol.nz, vol.ny, vol.nx});
    auto r = out.mutable_unchecked<3>();
    for (int z = 0; z < vol.nz; ++z)
        for (int y = 0; y < vol.ny; ++y)
            for (int x = 0; x < vol.nx; ++x) r(z, y, x) = vol.at(x, y, z);
    return out;
}

PointSet points_from_numpy(py::array_t<double, py::array::c_style | py::array::forcecast> pts) {
    if (pts.ndim() != 2 || pts.shape(1) != 2)
        throw py::value_error("points must be an (n, 2) array");
    PointSet out(pts.shape(0));
    auto r = pts.unchecked<2>();
    for (py::ssize_t i = 0; i < pts.shape(0); ++i) out[i] = {r(i, 0), r(i, 1)};
    return out;
}

py::dict entry_to_dict(const ManifestEntry& e) {
    py::dict d;
    d["id"] = e.id;
    d["kind"] = e.kind;
    d["paths"] = e.paths;
    d["parents"] = e.parents;
    d["config_json"] = e.config_json;
    d["created"] = e.created;
    return d;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "synthetic radiography / CT pipeline core";

    // ---- standalone numerics useful without a workspace
    m.def(
        "dbscan",
        [](py::array_t<double, py::array::c_style | py::array::forcecast> pts, double eps,
           int min_pts) {
            auto cs = dbscan(points_from_numpy(pts), eps, min_pts);
            return py::make_tuple(py::cast(cs.labels), cs.cluster_count);
        },
        py::arg("points"), py::arg("eps") = 2.0, py::arg("min_pts") = 5,
        "density clustering; returns (labels, cluster_count), label -1 = noise");

    m.def(
        "fit_ellipse",
        [](py::array_t<double, py::array::c_style | py::array::forcecast> pts) {
            EllipseFit f = fit_ellipse(points_from_numpy(pts));
            py::dict d;
            d["cx"] = f.cx;
            d["cy"] = f.cy;
            d["a"] = f.a;
            d["b"] = f.b;
            d["theta_deg"] = f.theta_deg;
            return d;
        },
        py::arg("points"), "moment-based ellipse fit of a pixel cluster");

    m.def(
        "read_image",
        [](const std::string& path) { return image_to_numpy(read_raw_f32(path)); },
        py::arg("path"), "load a float32 raw image (with JSON sidecar) as (h, w) array");

    m.def(
        "read_volume",
        [](const std::string& path) { return volume_to_numpy(read_volume_f32(path)); },
        py::arg("path"), "load a float32 raw volume as (nz, ny, nx) array");

    // ---- workspace orchestration mirroring the CLI
    py::class_<Workspace>(m, "Workspace")
        .def_static("open", &Workspace::open, py::arg("root"))
        .def_property_readonly("root", &Workspace::root)
        .def("abs_path", &Workspace::abs_path, py::arg("relative"))
        .def("entries",
             [](const Workspace& ws) {
                 py::list out;
                 for (const auto& e : ws.entries()) out.append(entry_to_dict(e));
                 return out;
             })
        .def("verify",
             [](const Workspace& ws) {
                 py::list out;
                 for (const auto& p : ws.verify())
                     out.append(py::make_tuple(p.entry_id, p.message));
                 return out;
             })
        .def(
            "gen_plate",
            [](Workspace& ws, int pores, std::uint64_t seed, int segments) {
                GenPlateParams p;
                p.plate.pore_count = pores;
                p.segments = segments;
                p.seed = seed;
                return cmd_gen_plate(ws, p);
            },
            py::arg("pores") = 100, py::arg("seed") = 1, py::arg("segments") = 20)
        .def(
            "simulate",
            [](Workspace& ws, const std::string& spec_id, int pixels, double pitch_mm,
               double sod_mm, double sdd_mm, int projections, double noise_sigma,
               int segments, std::uint64_t seed, int threads) {
                SimulateParams s;
                s.spec_id = spec_id;
                s.geometry.nx = s.geometry.ny = pixels;
                s.geometry.pitch_mm = pitch_mm;
                s.geometry.sod_mm = sod_mm;
                s.geometry.sdd_mm = sdd_mm;
                s.projections = projections;
                s.noise_sigma = noise_sigma;
                s.segments = segments;
                s.seed = seed;
                return cmd_simulate(ws, s, threads);
            },
            py::arg("spec_id"), py::arg("pixels") = 512, py::arg("pitch_mm") = 0.3,
            py::arg("sod_mm") = 1000, py::arg("sdd_mm") = 1500, py::arg("projections") = 1,
            py::arg("noise_sigma") = 0.0, py::arg("segments") = 20, py::arg("seed") = 1,
            py::arg("threads") = 1)
        .def(
            "recon",
            [](Workspace& ws, const std::string& image_set_id, const std::string& filter,
               double cutoff, int out_n, int threads) {
                FilterSpec f;
                f.kind = filter == "ramp-hann" ? FilterSpec::Kind::RampHann
                                               : FilterSpec::Kind::Ramp;
                f.cutoff = cutoff;
                return cmd_recon(ws, image_set_id, f, out_n, threads);
            },
            py::arg("image_set_id"), py::arg("filter") = "ramp", py::arg("cutoff") = 1.0,
            py::arg("out_n") = 0, py::arg("threads") = 1)
        .def(
            "extract_segments",
            [](Workspace& ws, const std::string& image_set_id, int count,
               double pore_fraction, int segment_size, std::uint64_t seed) {
                return cmd_extract_segments(ws, image_set_id, 0, count, pore_fraction,
                                            segment_size, seed);
            },
            py::arg("image_set_id"), py::arg("count") = 1000,
            py::arg("pore_fraction") = 0.3, py::arg("segment_size") = 20,
            py::arg("seed") = 1)
        .def(
            "train_cnn",
            [](Workspace& ws, const std::string& segments_id, const std::string& arch,
               int epochs, double lr, int batch, std::uint64_t seed) {
                TrainCnnParams p;
                p.segments_id = segments_id;
                p.arch = arch;
                p.epochs = epochs;
                p.learning_rate = lr;
                p.batch_size = batch;
                p.seed = seed;
                return cmd_train_cnn(ws, p);
            },
            py::arg("segments_id"), py::arg("arch") = "20-8-8", py::arg("epochs") = 100,
            py::arg("lr") = 0.2, py::arg("batch") = 16, py::arg("seed") = 1)
        .def(
            "classify",
            [](Workspace& ws, const std::string& model_id, const std::string& image_set_id,
               int index, int threads) {
                return cmd_classify(ws, model_id, image_set_id, index, threads);
            },
            py::arg("model_id"), py::arg("image_set_id"), py::arg("index") = 0,
            py::arg("threads") = 1)
        .def("cluster", &cmd_cluster, py::arg("feature_map_id"), py::arg("tau") = 0.5,
             py::arg("eps") = 2.0, py::arg("min_pts") = 5)
        .def("report", &cmd_report, py::arg("feature_map_id"), py::arg("tau") = 0.5,
             py::arg("eps") = 2.0, py::arg("min_pts") = 5)
        .def("eval", &cmd_eval, py::arg("feature_map_id"), py::arg("tau") = 0.5)
        .def("zslice", &cmd_zslice, py::arg("volume_id"), py::arg("window") = 4,
             py::arg("stride") = 0)
        .def(
            "train_ae",
            [](Workspace& ws, const std::string& profiles_id, int epochs, double lr,
               std::uint64_t seed) {
                TrainAeParams p;
                p.profiles_id = profiles_id;
                p.epochs = epochs;
                p.learning_rate = lr;
                p.seed = seed;
                return cmd_train_ae(ws, p);
            },
            py::arg("profiles_id"), py::arg("epochs") = 300, py::arg("lr") = 0.05,
            py::arg("seed") = 1)
        .def(
            "anomaly",
            [](Workspace& ws, const std::string& model_id, const std::string& volume_id,
               int window, int stride, int threads) {
                return cmd_anomaly(ws, model_id, volume_id, window, stride, std::nullopt,
                                   threads);
            },
            py::arg("model_id"), py::arg("volume_id"), py::arg("window") = 4,
            py::arg("stride") = 0, py::arg("threads") = 1)
        .def(
            "experiment_71",
            [](Workspace& ws, std::uint64_t seed, int pores, int pixels, double pitch_mm,
               const std::string& arch, int segment_count, double pore_fraction,
               int epochs, bool ablation, int threads) {
                Experiment71Params p;
                p.seed = seed;
                p.pores = pores;
                p.image_px = pixels;
                p.pitch_mm = pitch_mm;
                p.arch = arch;
                p.segment_count = segment_count;
                p.pore_fraction = pore_fraction;
                p.epochs = epochs;
                p.ablation = ablation;
                return cmd_experiment_71(ws, p, threads);
            },
            py::arg("seed") = 1, py::arg("pores") = 100, py::arg("pixels") = 512,
            py::arg("pitch_mm") = 0.3, py::arg("arch") = "20-8-8",
            py::arg("segment_count") = 1000, py::arg("pore_fraction") = 0.3,
            py::arg("epochs") = 100, py::arg("ablation") = true, py::arg("threads") = 1);
}
