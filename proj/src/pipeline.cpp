#include "radisynth/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "radisynth/cnn.hpp"
#include "radisynth/errors.hpp"
#include "radisynth/rng.hpp"
#include "radisynth/stl_io.hpp"

namespace radisynth {

using nlohmann::json;

namespace {

std::string short_hash(std::uint64_t h) {
    static const char* hex = "0123456789abcdef";
    std::string s(12, '0');
    for (int i = 0; i < 12; ++i) s[i] = hex[(h >> (4 * (11 - i))) & 0xf];
    return s;
}

std::string make_id(const std::string& kind, const std::string& config_json) {
    std::uint64_t h = hash_bytes(config_json.data(), config_json.size());
    return kind + "-" + short_hash(h);
}

std::uint64_t config_hash_of(const std::string& config_json) {
    return hash_bytes(config_json.data(), config_json.size());
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
    if (!out) throw std::runtime_error("cannot write " + path);
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw NotFoundError("missing file: " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

json geometry_json(const ProjectionGeometry& g) {
    return json::parse(g.to_json());
}

// image-set sidecar for one projection
std::string proj_sidecar(const ProjectionGeometry& g, double noise_sigma, int bits) {
    json j = geometry_json(g);
    j["width"] = g.nx;
    j["height"] = g.ny;
    j["pitch_mm"] = g.pitch_mm;
    j["noise_sigma"] = noise_sigma;
    j["bits"] = bits;
    return j.dump();
}

MaskImage mask_from_image(const ImageF& img) {
    MaskImage m(img.width, img.height);
    for (std::size_t i = 0; i < img.v.size(); ++i) m.v[i] = img.v[i] >= 0.5 ? 1 : 0;
    return m;
}

ImageF image_from_mask(const MaskImage& m) {
    ImageF img(m.width, m.height);
    for (std::size_t i = 0; i < m.v.size(); ++i) img.v[i] = m.v[i];
    return img;
}

std::string proj_name(int i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "proj_%03d", i);
    return buf;
}

std::string truth_name(int i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "truth_%03d", i);
    return buf;
}

} // namespace

void parse_arch(const std::string& arch, int& segment, int& fa, int& fb) {
    char dash1, dash2;
    std::istringstream is(arch);
    if (!(is >> segment >> dash1 >> fa >> dash2 >> fb) || dash1 != '-' || dash2 != '-' ||
        !is.eof())
        throw ValidationError("architecture must look like '20-8-8', got '" + arch + "'");
}

std::string cmd_gen_plate(Workspace& ws, const GenPlateParams& params) {
    json cfg;
    cfg["command"] = "gen-plate";
    cfg["plate_size"] = {params.plate.plate_size.x, params.plate.plate_size.y,
                         params.plate.plate_size.z};
    cfg["pores"] = params.plate.pore_count;
    cfg["poisson"] = params.plate.poisson_count;
    cfg["base_radius"] = params.plate.base_radius;
    cfg["scale"] = {params.plate.scale_min, params.plate.scale_max};
    cfg["margin"] = params.plate.margin;
    cfg["host"] = {{"name", params.host.name}, {"mu", params.host.mu}};
    cfg["segments"] = params.segments;
    cfg["seed"] = params.seed;
    std::string config = cfg.dump();
    std::string id = make_id("spec", config);
    if (const ManifestEntry* hit = ws.find_by_config("spec", config_hash_of(config)))
        return hit->id;

    SpecimenSpec spec = generate_pore_plate(params.plate, params.host, params.seed);
    std::string dir = ws.entry_dir(id);
    write_text(dir + "/spec.json", spec.to_json());
    write_text(dir + "/pores.csv", spec.pores_csv());
    auto meshes = specimen_meshes(spec, Material{"air", 0.0}, params.segments);
    stl_write_file(meshes.front(), dir + "/host.stl");

    ManifestEntry e;
    e.id = id;
    e.kind = "spec";
    e.paths = {id + "/spec.json", id + "/pores.csv", id + "/host.stl"};
    e.config_json = config;
    e.config_hash = config_hash_of(config);
    ws.add_entry(std::move(e));
    return id;
}

std::string cmd_gen_fml(Workspace& ws, const GenFmlParams& params) {
    std::vector<LayerSpec> layers = params.layers;
    if (layers.empty()) {
        for (int i = 0; i < 5; ++i) {
            if (i % 2 == 0)
                layers.push_back({Material{"aluminum", 0.15}, 0.5});
            else
                layers.push_back({Material{"preg", 0.03}, 0.8});
        }
    }
    json cfg;
    cfg["command"] = "gen-fml";
    cfg["width_mm"] = params.width_mm;
    cfg["depth_mm"] = params.depth_mm;
    cfg["layers"] = json::array();
    for (const auto& l : layers)
        cfg["layers"].push_back(
            {{"name", l.material.name}, {"mu", l.material.mu}, {"thickness", l.thickness}});
    std::string config = cfg.dump();
    std::string id = make_id("spec", config);
    if (const ManifestEntry* hit = ws.find_by_config("spec", config_hash_of(config)))
        return hit->id;

    SpecimenSpec spec =
        generate_fml_stack({params.width_mm, 0, params.depth_mm}, layers);
    std::string dir = ws.entry_dir(id);
    write_text(dir + "/spec.json", spec.to_json());
    auto meshes = specimen_meshes(spec, Material{"air", 0.0});
    stl_write_file(meshes.front(), dir + "/layer0.stl");

    ManifestEntry e;
    e.id = id;
    e.kind = "spec";
    e.paths = {id + "/spec.json", id + "/layer0.stl"};
    e.config_json = config;
    e.config_hash = config_hash_of(config);
    ws.add_entry(std::move(e));
    return id;
}

SpecimenSpec load_spec(const Workspace& ws, const std::string& spec_id) {
    const ManifestEntry& e = ws.get(spec_id, "spec");
    return SpecimenSpec::from_json(read_text(ws.abs_path(e.paths.front())));
}

std::string cmd_simulate(Workspace& ws, const SimulateParams& params, int threads) {
    if (params.projections < 1) throw ValidationError("need at least one projection");
    ProjectionGeometry geom = params.geometry;
    double preset_noise = params.noise_sigma;
    int bits = params.bits;
    if (!params.preset.empty()) {
        DevicePreset preset = device_preset(params.preset);
        geom = preset.geometry();
        bits = preset.bits;
    }
    geom.validate();

    json cfg;
    cfg["command"] = "simulate";
    cfg["spec_id"] = params.spec_id;
    cfg["preset"] = params.preset;
    cfg["geometry"] = geometry_json(geom);
    cfg["projections"] = params.projections;
    cfg["start_deg"] = params.start_deg;
    cfg["range_deg"] = params.range_deg;
    cfg["noise_sigma"] = preset_noise;
    cfg["bits"] = bits;
    cfg["segments"] = params.segments;
    cfg["seed"] = params.seed;
    std::string config = cfg.dump();
    std::string id = make_id("imageset", config);
    if (const ManifestEntry* hit = ws.find_by_config("image-set", config_hash_of(config)))
        return hit->id;

    SpecimenSpec spec = load_spec(ws, params.spec_id);
    auto meshes = specimen_meshes(spec, Material{"air", 0.0}, params.segments);

    std::string dir = ws.entry_dir(id);
    ManifestEntry e;
    e.id = id;
    e.kind = "image-set";
    e.parents = {params.spec_id};
    e.config_json = config;
    e.config_hash = config_hash_of(config);

    for (int i = 0; i < params.projections; ++i) {
        ProjectionGeometry g = geom;
        g.angle_deg =
            params.start_deg + i * params.range_deg / params.projections;
        ProjectionImage img = simulate_projection(meshes, g, threads);
        if (preset_noise > 0) {
            NoiseModel noise;
            noise.sigma_rel = preset_noise;
            noise.seed = mix64(params.seed, static_cast<std::uint64_t>(i));
            img = add_noise(img, noise);
        }
        // pass through the detector quantization
        ImageF stored = dequantize(quantize(img, {bits}), bits);
        stored.pitch_mm = g.pitch_mm;
        std::string base = id + "/" + proj_name(i);
        write_raw_f32(stored, ws.abs_path(base + ".raw"),
                      proj_sidecar(g, preset_noise, bits));
        write_png16(stored, ws.abs_path(base + ".png"));
        e.paths.push_back(base + ".raw");
        e.paths.push_back(base + ".raw.json");
        e.paths.push_back(base + ".png");
        if (params.write_truth) {
            MaskImage truth = ground_truth_mask(spec, g);
            std::string tbase = id + "/" + truth_name(i);
            json tj;
            tj["width"] = g.nx;
            tj["height"] = g.ny;
            tj["pitch_mm"] = g.pitch_mm;
            tj["angle_deg"] = g.angle_deg;
            write_raw_f32(image_from_mask(truth), ws.abs_path(tbase + ".raw"), tj.dump());
            write_png8_mask(truth, ws.abs_path(tbase + ".png"));
            e.paths.push_back(tbase + ".raw");
            e.paths.push_back(tbase + ".raw.json");
            e.paths.push_back(tbase + ".png");
        }
    }
    ws.add_entry(std::move(e));
    return id;
}

std::vector<ImageF> load_image_set(const Workspace& ws, const std::string& id, bool truth) {
    const ManifestEntry& e = ws.get(id, "image-set");
    json cfg = json::parse(e.config_json);
    int n = cfg.at("projections");
    std::vector<ImageF> images;
    for (int i = 0; i < n; ++i) {
        std::string base = id + "/" + (truth ? truth_name(i) : proj_name(i)) + ".raw";
        images.push_back(read_raw_f32(ws.abs_path(base)));
    }
    return images;
}

std::string cmd_recon(Workspace& ws, const std::string& image_set_id,
                      const FilterSpec& filter, int out_n, int threads) {
    const ManifestEntry& src = ws.get(image_set_id, "image-set");
    json src_cfg = json::parse(src.config_json);

    json cfg;
    cfg["command"] = "recon";
    cfg["image_set_id"] = image_set_id;
    cfg["filter"] = filter.kind == FilterSpec::Kind::Ramp ? "ramp" : "ramp-hann";
    cfg["cutoff"] = filter.cutoff;
    cfg["out_n"] = out_n;
    std::string config = cfg.dump();
    std::string id = make_id("volume", config);
    if (const ManifestEntry* hit = ws.find_by_config("volume", config_hash_of(config)))
        return hit->id;

    ProjectionGeometry geom = ProjectionGeometry::from_json(src_cfg.at("geometry").dump());
    int n = src_cfg.at("projections");
    std::vector<ProjectionImage> series;
    for (int i = 0; i < n; ++i) {
        ProjectionImage p;
        std::string base = image_set_id + "/" + proj_name(i) + ".raw";
        static_cast<ImageF&>(p) = read_raw_f32(ws.abs_path(base));
        json meta = json::parse(read_sidecar(ws.abs_path(base)));
        p.angle_deg = meta.at("angle_deg");
        series.push_back(std::move(p));
    }
    Volume vol = reconstruct_volume(series, filter, geom, out_n, threads);

    std::string dir = ws.entry_dir(id);
    json vj;
    vj["nx"] = vol.nx;
    vj["ny"] = vol.ny;
    vj["nz"] = vol.nz;
    vj["voxel_mm"] = vol.voxel_mm;
    write_volume_f32(vol, dir + "/volume.raw", vj.dump());
    // middle slice preview, windowed to the value range
    ImageF mid(vol.nx, vol.ny, vol.voxel_mm);
    double hi = 1e-12;
    for (int y = 0; y < vol.ny; ++y)
        for (int x = 0; x < vol.nx; ++x) {
            mid.at(x, y) = vol.at(x, y, vol.nz / 2);
            hi = std::max(hi, mid.at(x, y));
        }
    write_png16(mid, dir + "/slice_mid.png", 0, hi);

    ManifestEntry e;
    e.id = id;
    e.kind = "volume";
    e.parents = {image_set_id};
    e.paths = {id + "/volume.raw", id + "/volume.raw.json", id + "/slice_mid.png"};
    e.config_json = config;
    e.config_hash = config_hash_of(config);
    ws.add_entry(std::move(e));
    return id;
}

std::string cmd_extract_segments(Workspace& ws, const std::string& image_set_id,
                                 int image_index, int count, double pore_fraction,
                                 int segment_size, std::uint64_t seed) {
    json cfg;
    cfg["command"] = "extract-segments";
    cfg["image_set_id"] = image_set_id;
    cfg["image_index"] = image_index;
    cfg["count"] = count;
    cfg["pore_fraction"] = pore_fraction;
    cfg["segment_size"] = segment_size;
    cfg["seed"] = seed;
    std::string config = cfg.dump();
    std::string id = make_id("segments", config);
    if (const ManifestEntry* hit = ws.find_by_config("segments", config_hash_of(config)))
        return hit->id;

    std::string base = image_set_id + "/" + proj_name(image_index) + ".raw";
    std::string tbase = image_set_id + "/" + truth_name(image_index) + ".raw";
    ws.get(image_set_id, "image-set");
    ImageF img = read_raw_f32(ws.abs_path(base));
    MaskImage truth = mask_from_image(read_raw_f32(ws.abs_path(tbase)));
    auto segs = extract_training_segments(img, truth, count, pore_fraction, seed,
                                          segment_size, image_index);

    ModelFile file;
    json header;
    header["kind"] = "segments";
    header["segment_size"] = segment_size;
    header["count"] = static_cast<int>(segs.size());
    json labels = json::array(), xs = json::array(), ys = json::array();
    for (const auto& s : segs) {
        labels.push_back(s.label);
        xs.push_back(s.x);
        ys.push_back(s.y);
    }
    header["labels"] = labels;
    header["xs"] = xs;
    header["ys"] = ys;
    file.header_json = header.dump();
    for (const auto& s : segs)
        for (double v : s.patch) file.payload.push_back(static_cast<float>(v));
    std::string dir = ws.entry_dir(id);
    model_file_write(file, dir + "/segments.bin");

    ManifestEntry e;
    e.id = id;
    e.kind = "segments";
    e.parents = {image_set_id};
    e.paths = {id + "/segments.bin"};
    e.config_json = config;
    e.config_hash = config_hash_of(config);
    ws.add_entry(std::move(e));
    return id;
}

namespace {

std::vector<Segment> load_segments(const Workspace& ws, const std::string& id) {
    const ManifestEntry& e = ws.get(id, "segments");
    ModelFile file = model_file_read(ws.abs_path(e.paths.front()));
    json header = json::parse(file.header_json);
    if (header.at("kind") != "segments")
        throw ParseError("entry '" + id + "' does not hold training segments");
    int count = header.at("count");
    int segment_size = header.at("segment_size");
    std::size_t patch_len = static_cast<std::size_t>(segment_size) * segment_size;
    if (file.payload.size() != patch_len * count)
        throw ParseError("segments payload size mismatch");
    std::vector<Segment> segs(count);
    for (int i = 0; i < count; ++i) {
        segs[i].label = header.at("labels")[i];
        segs[i].x = header.at("xs")[i];
        segs[i].y = header.at("ys")[i];
        segs[i].patch.resize(patch_len);
        for (std::size_t k = 0; k < patch_len; ++k)
            segs[i].patch[k] = file.payload[i * patch_len + k];
    }
    return segs;
}

} // namespace

std::string cmd_train_cnn(Workspace& ws, const TrainCnnParams& params) {
    int segment = 0, fa = 0, fb = 0;
    parse_arch(params.arch, segment, fa, fb);
    json cfg;
    cfg["command"] = "train-cnn";
    cfg["segments_id"] = params.segments_id;
    cfg["arch"] = params.arch;
    cfg["epochs"] = params.epochs;
    cfg["learning_rate"] = params.learning_rate;
    cfg["batch_size"] = params.batch_size;
    cfg["seed"] = params.seed;
    std::string config = cfg.dump();
    std::string id = make_id("model", config);
    if (const ManifestEntry* hit = ws.find_by_config("model", config_hash_of(config)))
        return hit->id;

    auto segs = load_segments(ws, params.segments_id);
    for (const auto& s : segs)
        if (s.patch.size() != static_cast<std::size_t>(segment) * segment)
            throw ShapeError("segment size in '" + params.segments_id +
                             "' does not match architecture " + params.arch);

    CnnModel model = cnn_build(segment, fa, fb, Rng(params.seed).sub("init").next_u64());
    TrainConfig tc;
    tc.learning_rate = params.learning_rate;
    tc.epochs = params.epochs;
    tc.batch_size = params.batch_size;
    tc.seed = Rng(params.seed).sub("shuffle").next_u64();
    auto history = cnn_train_sgd(model, segs, tc);

    std::string dir = ws.entry_dir(id);
    json prov;
    prov["segments_id"] = params.segments_id;
    prov["final_loss"] = history.epochs.back().loss;
    prov["final_accuracy"] = history.epochs.back().accuracy;
    cnn_save(model, dir + "/model.bin", prov.dump());
    write_text(dir + "/history.csv", history.csv());

    ManifestEntry e;
    e.id = id;
    e.kind = "model";
    e.parents = {params.segments_id};
    e.paths = {id + "/model.bin", id + "/history.csv"};
    e.config_json = config;
    e.config_hash = config_hash_of(config);
    ws.add_entry(std::move(e));
    return id;
}

std::string cmd_classify(Workspace& ws, const std::string& model_id,
                         const std::string& image_set_id, int image_index, int threads) {
    json cfg;
    cfg["command"] = "classify";
    cfg["model_id"] = model_id;
    cfg["image_set_id"] = image_set_id;
    cfg["image_index"] = image_index;
    std::string config = cfg.dump();
    std::string id = make_id("featmap", config);
    if (const ManifestEntry* hit = ws.find_by_config("feature-map", config_hash_of(config)))
        return hit->id;

    const ManifestEntry& me = ws.get(model_id, "model");
    CnnModel model = cnn_load(ws.abs_path(me.paths.front()));
    ws.get(image_set_id, "image-set");
    ImageF img =
        read_raw_f32(ws.abs_path(image_set_id + "/" + proj_name(image_index) + ".raw"));
    FeatureMap map = sliding_window_classify(model, img, threads);

    std::string dir = ws.entry_dir(id);
    json sj;
    sj["width"] = map.score.width;
    sj["height"] = map.score.height;
    sj["pitch_mm"] = img.pitch_mm;
    write_raw_f32(map.score, dir + "/score.raw", sj.dump());
    write_png16(map.score, dir + "/score.png");
    write_raw_f32(image_from_mask(map.label), dir + "/label.raw", sj.dump());
    write_png8_mask(map.label, dir + "/label.png");

    ManifestEntry e;
    e.id = id;
    e.kind = "feature-map";
    e.parents = {model_id, image_set_id};
    e.paths = {id + "/score.raw", id + "/score.raw.json", id + "/score.png",
               id + "/label.raw", id + "/label.raw.json", id + "/label.png"};
    e.config_json = config;
    e.config_hash = config_hash_of(config);
    ws.add_entry(std::move(e));
    return id;
}

namespace {

FeatureMap load_feature_map(const Workspace& ws, const std::string& id) {
    const ManifestEntry& e = ws.get(id, "feature-map");
    FeatureMap map;
    map.score = read_raw_f32(ws.abs_path(id + "/score.raw"));
    map.label = mask_from_image(read_raw_f32(ws.abs_path(id + "/label.raw")));
    (void)e;
    return map;
}

} // namespace

std::string cmd_cluster(Workspace& ws, const std::string& feature_map_id, double tau,
                        double eps, int min_pts) {
    json cfg;
    cfg["command"] = "cluster";
    cfg["feature_map_id"] = feature_map_id;
    cfg["tau"] = tau;
    cfg["eps"] = eps;
    cfg["min_pts"] = min_pts;
    std::string config = cfg.dump();
    std::string id = make_id("clusters", config);
    if (const ManifestEntry* hit = ws.find_by_config("report", config_hash_of(config)))
        return hit->id;

    FeatureMap map = load_feature_map(ws, feature_map_id);
    auto thr = threshold_map(map, tau);
    auto cs = dbscan(thr.points, eps, min_pts);
    std::ostringstream os;
    os << "x,y,cluster\n";
    for (std::size_t i = 0; i < thr.points.size(); ++i)
        os << thr.points[i].x << ',' << thr.points[i].y << ',' << cs.labels[i] << '\n';
    std::string dir = ws.entry_dir(id);
    write_text(dir + "/clusters.csv", os.str());

    ManifestEntry e;
    e.id = id;
    e.kind = "report";
    e.parents = {feature_map_id};
    e.paths = {id + "/clusters.csv"};
    e.config_json = config;
    e.config_hash = config_hash_of(config);
    ws.add_entry(std::move(e));
    return id;
}

std::string cmd_fit(Workspace& ws, const std::string& clusters_id) {
    json cfg;
    cfg["command"] = "fit";
    cfg["clusters_id"] = clusters_id;
    std::string config = cfg.dump();
    std::string id = make_id("fit", config);
    if (const ManifestEntry* hit = ws.find_by_config("report", config_hash_of(config)))
        return hit->id;

    const ManifestEntry& ce = ws.get(clusters_id, "report");
    json ccfg = json::parse(ce.config_json);
    if (ccfg.at("command") != "cluster")
        throw ValidationError("entry '" + clusters_id + "' is not a cluster report");
    std::string feature_map_id = ccfg.at("feature_map_id");
    FeatureMap map = load_feature_map(ws, feature_map_id);

    PointSet points;
    ClusterSet cs;
    cs.eps = ccfg.at("eps");
    cs.min_pts = ccfg.at("min_pts");
    std::istringstream in(read_text(ws.abs_path(ce.paths.front())));
    std::string line;
    std::getline(in, line); // header
    int max_label = -1;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        Point2 p;
        int label;
        if (std::sscanf(line.c_str(), "%lf,%lf,%d", &p.x, &p.y, &label) != 3)
            throw ParseError("clusters.csv: bad row '" + line + "'");
        points.push_back(p);
        cs.labels.push_back(label);
        max_label = std::max(max_label, label);
    }
    cs.cluster_count = max_label + 1;
    auto rows = pore_rows(points, cs, map);
    std::string dir = ws.entry_dir(id);
    write_text(dir + "/pores.csv", pore_report_csv(rows));

    ManifestEntry e;
    e.id = id;
    e.kind = "report";
    e.parents = {clusters_id};
    e.paths = {id + "/pores.csv"};
    e.config_json = config;
    e.config_hash = config_hash_of(config);
    ws.add_entry(std::move(e));
    return id;
}

std::string cmd_report(Workspace& ws, const std::string& feature_map_id, double tau,
                       double eps, int min_pts) {
    json cfg;
    cfg["command"] = "report";
    cfg["feature_map_id"] = feature_map_id;
    cfg["tau"] = tau;
    cfg["eps"] = eps;
    cfg["min_pts"] = min_pts;
    std::string config = cfg.dump();
    std::string id = make_id("report", config);
    if (const ManifestEntry* hit = ws.find_by_config("report", config_hash_of(config)))
        return hit->id;

    FeatureMap map = load_feature_map(ws, feature_map_id);
    auto thr = threshold_map(map, tau);
    auto cs = dbscan(thr.points, eps, min_pts);
    auto rows = pore_rows(thr.points, cs, map);
    std::string dir = ws.entry_dir(id);
    write_text(dir + "/pores.csv", pore_report_csv(rows));

    ManifestEntry e;
    e.id = id;
    e.kind = "report";
    e.parents = {feature_map_id};
    e.paths = {id + "/pores.csv"};
    e.config_json = config;
    e.config_hash = config_hash_of(config);
    ws.add_entry(std::move(e));
    return id;
}

std::string cmd_eval(Workspace& ws, const std::string& feature_map_id, double tau) {
    json cfg;
    cfg["command"] = "eval";
    cfg["feature_map_id"] = feature_map_id;
    cfg["tau"] = tau;
    std::string config = cfg.dump();
    std::string id = make_id("eval", config);
    if (const ManifestEntry* hit = ws.find_by_config("report", config_hash_of(config)))
        return hit->id;

    const ManifestEntry& fe = ws.get(feature_map_id, "feature-map");
    json fcfg = json::parse(fe.config_json);
    std::string image_set_id = fcfg.at("image_set_id");
    int index = fcfg.at("image_index");
    FeatureMap map = load_feature_map(ws, feature_map_id);
    MaskImage truth = mask_from_image(
        read_raw_f32(ws.abs_path(image_set_id + "/" + truth_name(index) + ".raw")));
    MaskImage pred(map.score.width, map.score.height);
    for (std::size_t i = 0; i < map.score.v.size(); ++i)
        pred.v[i] = map.score.v[i] >= tau ? 1 : 0;
    PixelEval ev = evaluate_pixels(pred, truth);

    json rj;
    rj["tau"] = tau;
    rj["tp_rate"] = ev.tp_rate;
    rj["fn_rate"] = ev.fn_rate;
    rj["fp_rate"] = ev.fp_rate;
    rj["precision"] = ev.precision;
    rj["tp"] = ev.tp;
    rj["fn"] = ev.fn;
    rj["fp"] = ev.fp;
    rj["tn"] = ev.tn;
    std::string dir = ws.entry_dir(id);
    write_text(dir + "/eval.json", rj.dump(2) + "\n");

    ManifestEntry e;
    e.id = id;
    e.kind = "report";
    e.parents = {feature_map_id};
    e.paths = {id + "/eval.json"};
    e.config_json = config;
    e.config_hash = config_hash_of(config);
    ws.add_entry(std::move(e));
    return id;
}

std::string cmd_zslice(Workspace& ws, const std::string& volume_id, int window,
                       int stride) {
    json cfg;
    cfg["command"] = "zslice";
    cfg["volume_id"] = volume_id;
    cfg["window"] = window;
    cfg["stride"] = stride;
    std::string config = cfg.dump();
    std::string id = make_id("zprofiles", config);
    if (const ManifestEntry* hit = ws.find_by_config("segments", config_hash_of(config)))
        return hit->id;

    const ManifestEntry& ve = ws.get(volume_id, "volume");
    Volume vol = read_volume_f32(ws.abs_path(ve.paths.front()));
    auto grid = extract_zprofiles(vol, window, stride);

    ModelFile file;
    json header;
    header["kind"] = "zprofiles";
    header["nz"] = grid.nz;
    header["window"] = grid.window;
    header["stride"] = grid.stride;
    header["grid_w"] = grid.grid_w;
    header["grid_h"] = grid.grid_h;
    file.header_json = header.dump();
    for (const auto& p : grid.profiles)
        for (double v : p.values) file.payload.push_back(static_cast<float>(v));
    std::string dir = ws.entry_dir(id);
    model_file_write(file, dir + "/profiles.bin");

    ManifestEntry e;
    e.id = id;
    e.kind = "segments";
    e.parents = {volume_id};
    e.paths = {id + "/profiles.bin"};
    e.config_json = config;
    e.config_hash = config_hash_of(config);
    ws.add_entry(std::move(e));
    return id;
}

namespace {

std::vector<std::vector<double>> load_profiles(const Workspace& ws, const std::string& id,
                                               int& nz) {
    const ManifestEntry& e = ws.get(id, "segments");
    ModelFile file = model_file_read(ws.abs_path(e.paths.front()));
    json header = json::parse(file.header_json);
    if (header.at("kind") != "zprofiles")
        throw ParseError("entry '" + id + "' does not hold z-profiles");
    nz = header.at("nz");
    std::size_t count = file.payload.size() / nz;
    std::vector<std::vector<double>> profiles(count, std::vector<double>(nz));
    for (std::size_t i = 0; i < count; ++i)
        for (int z = 0; z < nz; ++z) profiles[i][z] = file.payload[i * nz + z];
    return profiles;
}

} // namespace

std::string cmd_train_ae(Workspace& ws, const TrainAeParams& params) {
    json cfg;
    cfg["command"] = "train-ae";
    cfg["profiles_id"] = params.profiles_id;
    cfg["epochs"] = params.epochs;
    cfg["learning_rate"] = params.learning_rate;
    cfg["batch_size"] = params.batch_size;
    cfg["tau_percentile"] = params.tau_percentile;
    cfg["seed"] = params.seed;
    std::string config = cfg.dump();
    std::string id = make_id("model", config);
    if (const ManifestEntry* hit = ws.find_by_config("model", config_hash_of(config)))
        return hit->id;

    int nz = 0;
    auto profiles = load_profiles(ws, params.profiles_id, nz);
    AeModel model = ae_build(nz, Rng(params.seed).sub("init").next_u64());
    AeTrainConfig tc;
    tc.learning_rate = params.learning_rate;
    tc.epochs = params.epochs;
    tc.batch_size = params.batch_size;
    tc.seed = Rng(params.seed).sub("shuffle").next_u64();
    auto history = train_ae(model, profiles, tc);
    double tau = calibrate_tau(model, profiles, params.tau_percentile);

    std::string dir = ws.entry_dir(id);
    json prov;
    prov["profiles_id"] = params.profiles_id;
    prov["final_mse"] = history.mse.back();
    prov["tau"] = tau;
    ae_save(model, dir + "/model.bin", prov.dump());
    json tj;
    tj["tau"] = tau;
    tj["percentile"] = params.tau_percentile;
    write_text(dir + "/tau.json", tj.dump(2) + "\n");

    ManifestEntry e;
    e.id = id;
    e.kind = "model";
    e.parents = {params.profiles_id};
    e.paths = {id + "/model.bin", id + "/tau.json"};
    e.config_json = config;
    e.config_hash = config_hash_of(config);
    ws.add_entry(std::move(e));
    return id;
}

std::string cmd_anomaly(Workspace& ws, const std::string& model_id,
                        const std::string& volume_id, int window, int stride,
                        std::optional<double> tau, int threads) {
    const ManifestEntry& me = ws.get(model_id, "model");
    double tau_value;
    if (tau) {
        tau_value = *tau;
    } else {
        json tj = json::parse(read_text(ws.abs_path(model_id + "/tau.json")));
        tau_value = tj.at("tau");
    }
    json cfg;
    cfg["command"] = "anomaly";
    cfg["model_id"] = model_id;
    cfg["volume_id"] = volume_id;
    cfg["window"] = window;
    cfg["stride"] = stride;
    cfg["tau"] = tau_value;
    std::string config = cfg.dump();
    std::string id = make_id("anomaly", config);
    if (const ManifestEntry* hit = ws.find_by_config("feature-map", config_hash_of(config)))
        return hit->id;

    AeModel model = ae_load(ws.abs_path(me.paths.front()));
    const ManifestEntry& ve = ws.get(volume_id, "volume");
    Volume vol = read_volume_f32(ws.abs_path(ve.paths.front()));
    AnomalyMap map = anomaly_map(model, vol, window, stride, tau_value, threads);

    std::string dir = ws.entry_dir(id);
    json sj;
    sj["width"] = map.score.width;
    sj["height"] = map.score.height;
    sj["tau"] = tau_value;
    write_raw_f32(map.score, dir + "/score.raw", sj.dump());
    double hi = 1e-12;
    for (double v : map.score.v) hi = std::max(hi, v);
    write_png16(map.score, dir + "/score.png", 0, hi);
    write_raw_f32(image_from_mask(map.flag), dir + "/flag.raw", sj.dump());
    write_png8_mask(map.flag, dir + "/flag.png");

    ManifestEntry e;
    e.id = id;
    e.kind = "feature-map";
    e.parents = {model_id, volume_id};
    e.paths = {id + "/score.raw", id + "/score.raw.json", id + "/score.png",
               id + "/flag.raw", id + "/flag.raw.json", id + "/flag.png"};
    e.config_json = config;
    e.config_hash = config_hash_of(config);
    ws.add_entry(std::move(e));
    return id;
}

std::string cmd_experiment_71(Workspace& ws, const Experiment71Params& params,
                              int threads) {
    json cfg;
    cfg["command"] = "experiment-71";
    cfg["seed"] = params.seed;
    cfg["pores"] = params.pores;
    cfg["noise_sigma"] = params.noise_sigma;
    cfg["image_px"] = params.image_px;
    cfg["pitch_mm"] = params.pitch_mm;
    cfg["sod_mm"] = params.sod_mm;
    cfg["sdd_mm"] = params.sdd_mm;
    cfg["arch"] = params.arch;
    cfg["segment_count"] = params.segment_count;
    cfg["pore_fraction"] = params.pore_fraction;
    cfg["epochs"] = params.epochs;
    cfg["learning_rate"] = params.learning_rate;
    cfg["batch_size"] = params.batch_size;
    cfg["tau"] = params.tau;
    cfg["ablation"] = params.ablation;
    cfg["tess_segments"] = params.tess_segments;
    std::string config = cfg.dump();
    std::string run_id = make_id("run", config);
    if (const ManifestEntry* hit = ws.find_by_config("run", config_hash_of(config)))
        return hit->id;

    Rng root(params.seed);
    std::string stage = "setup";
    try {
        // --- specimens: train plate, held-out plate, defect-free probe plate
        stage = "gen-plate";
        GenPlateParams plate;
        plate.plate.pore_count = params.pores;
        plate.segments = params.tess_segments;
        plate.seed = root.sub("plate-a").next_u64();
        std::string spec_a = cmd_gen_plate(ws, plate);
        plate.seed = root.sub("plate-b").next_u64();
        std::string spec_b = cmd_gen_plate(ws, plate);
        GenPlateParams free_plate = plate;
        free_plate.plate.pore_count = 0;
        free_plate.seed = root.sub("plate-free").next_u64();
        std::string spec_f = cmd_gen_plate(ws, free_plate);

        // --- radiographs
        stage = "simulate";
        SimulateParams sim;
        sim.geometry.sod_mm = params.sod_mm;
        sim.geometry.sdd_mm = params.sdd_mm;
        sim.geometry.pitch_mm = params.pitch_mm;
        sim.geometry.nx = sim.geometry.ny = params.image_px;
        sim.projections = 1;
        sim.segments = params.tess_segments;
        sim.noise_sigma = params.noise_sigma;

        sim.spec_id = spec_a;
        sim.seed = root.sub("noise-a").next_u64();
        std::string img_a = cmd_simulate(ws, sim, threads);
        sim.spec_id = spec_b;
        sim.seed = root.sub("noise-b").next_u64();
        std::string img_b = cmd_simulate(ws, sim, threads);

        // --- training set and model
        stage = "extract-segments";
        int segment = 0, fa = 0, fb = 0;
        parse_arch(params.arch, segment, fa, fb);
        std::string segs = cmd_extract_segments(ws, img_a, 0, params.segment_count,
                                                params.pore_fraction, segment,
                                                root.sub("segments").next_u64());
        stage = "train-cnn";
        TrainCnnParams train;
        train.segments_id = segs;
        train.arch = params.arch;
        train.epochs = params.epochs;
        train.learning_rate = params.learning_rate;
        train.batch_size = params.batch_size;
        train.seed = root.sub("train").next_u64();
        std::string model = cmd_train_cnn(ws, train);

        // --- evaluation: held-out plate and training plate
        stage = "classify";
        std::string map_b = cmd_classify(ws, model, img_b, 0, threads);
        std::string map_a = cmd_classify(ws, model, img_a, 0, threads);
        stage = "eval";
        std::string eval_b = cmd_eval(ws, map_b, params.tau);
        std::string eval_a = cmd_eval(ws, map_a, params.tau);
        json held = json::parse(read_text(ws.abs_path(eval_b + "/eval.json")));
        json trainp = json::parse(read_text(ws.abs_path(eval_a + "/eval.json")));

        json report;
        report["experiment"] = "7.1-replication";
        report["config"] = json::parse(config);
        report["scaling_note"] =
            "detector reduced to " + std::to_string(params.image_px) + "^2 at " +
            std::to_string(params.pitch_mm) +
            " mm pitch (reference setup: 1000^2 at 0.15 mm); field of view preserved";
        report["specs"] = {{"train", spec_a}, {"test", spec_b}, {"defect_free", spec_f}};
        report["held_out"] = held;
        report["training_plate"] = trainp;
        std::vector<std::string> parents = {eval_a, eval_b};

        if (params.ablation) {
            // --- false-positive probe on the defect-free plate (noisy + clean)
            stage = "fp-probe";
            sim.spec_id = spec_f;
            sim.seed = root.sub("noise-f").next_u64();
            std::string img_f_noisy = cmd_simulate(ws, sim, threads);
            SimulateParams clean = sim;
            clean.noise_sigma = 0;
            clean.seed = root.sub("clean-f").next_u64();
            std::string img_f_clean = cmd_simulate(ws, clean, threads);
            std::string eval_f_noisy = cmd_eval(ws, cmd_classify(ws, model, img_f_noisy, 0, threads), params.tau);
            std::string eval_f_clean = cmd_eval(ws, cmd_classify(ws, model, img_f_clean, 0, threads), params.tau);
            report["fp_probe"] = {
                {"noisy", json::parse(read_text(ws.abs_path(eval_f_noisy + "/eval.json")))},
                {"clean", json::parse(read_text(ws.abs_path(eval_f_clean + "/eval.json")))}};
            parents.push_back(eval_f_noisy);
            parents.push_back(eval_f_clean);

            // --- zero-noise ablation: full train/test rerun without noise
            stage = "ablation";
            SimulateParams sim0 = sim;
            sim0.noise_sigma = 0;
            sim0.spec_id = spec_a;
            sim0.seed = root.sub("clean-a").next_u64();
            std::string img_a0 = cmd_simulate(ws, sim0, threads);
            sim0.spec_id = spec_b;
            sim0.seed = root.sub("clean-b").next_u64();
            std::string img_b0 = cmd_simulate(ws, sim0, threads);
            std::string segs0 = cmd_extract_segments(ws, img_a0, 0, params.segment_count,
                                                     params.pore_fraction, segment,
                                                     root.sub("segments0").next_u64());
            TrainCnnParams train0 = train;
            train0.segments_id = segs0;
            train0.seed = root.sub("train0").next_u64();
            std::string model0 = cmd_train_cnn(ws, train0);
            std::string eval_b0 = cmd_eval(ws, cmd_classify(ws, model0, img_b0, 0, threads), params.tau);
            report["ablation_zero_noise"] =
                json::parse(read_text(ws.abs_path(eval_b0 + "/eval.json")));
            parents.push_back(eval_b0);
        }

        std::string dir = ws.entry_dir(run_id);
        write_text(dir + "/report.json", report.dump(2) + "\n");

        ManifestEntry e;
        e.id = run_id;
        e.kind = "run";
        e.parents = parents;
        e.paths = {run_id + "/report.json"};
        e.config_json = config;
        e.config_hash = config_hash_of(config);
        ws.add_entry(std::move(e));
        return run_id;
    } catch (const std::exception& ex) {
        throw std::runtime_error("experiment-71 failed at stage '" + stage +
                                 "': " + ex.what());
    }
}

} // namespace radisynth
