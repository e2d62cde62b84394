#pragma once
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "radisynth/features.hpp"
#include "radisynth/recon.hpp"
#include "radisynth/specimen.hpp"
#include "radisynth/workspace.hpp"
#include "radisynth/xray.hpp"
#include "radisynth/zprofile.hpp"

namespace radisynth {

// ---- command parameter records (serialized as the RunConfig) ----

struct GenPlateParams {
    PorePlateParams plate;
    Material host{"aluminum", 0.15};
    int segments = 20;
    std::uint64_t seed = 1;
};

struct GenFmlParams {
    double width_mm = 100, depth_mm = 40;
    std::vector<LayerSpec> layers; // empty = default 5-layer Al/PREG stack
};

struct SimulateParams {
    std::string spec_id;
    std::string preset;          // highq | midq | lowq; empty = explicit geometry
    ProjectionGeometry geometry; // used when preset is empty
    int projections = 1;
    double start_deg = 0, range_deg = 180;
    double noise_sigma = 0; // relative Gaussian; 0 = noiseless
    int bits = 16;
    int segments = 20; // tessellation
    bool write_truth = true;
    std::uint64_t seed = 1;
};

struct TrainCnnParams {
    std::string segments_id;
    std::string arch = "20-8-8"; // segment-filterA-filterB
    int epochs = 100;
    double learning_rate = 0.05;
    int batch_size = 16;
    std::uint64_t seed = 1;
};

struct TrainAeParams {
    std::string profiles_id;
    int epochs = 300;
    double learning_rate = 0.05;
    int batch_size = 8;
    double tau_percentile = 99.0;
    std::uint64_t seed = 1;
};

struct Experiment71Params {
    std::uint64_t seed = 1;
    int pores = 100;
    double noise_sigma = 0.10;
    int image_px = 512;       // detector pixels per side
    double pitch_mm = 0.30;   // detector pitch
    double sod_mm = 1000, sdd_mm = 1500;
    std::string arch = "20-8-8";
    int segment_count = 1000;
    double pore_fraction = 0.3;
    int epochs = 100;
    double learning_rate = 0.05;
    int batch_size = 16;
    double tau = 0.15; // decision threshold on the pore score
    bool ablation = true; // zero-noise comparison run + FP probes
    int tess_segments = 20;
};

// ---- commands; each returns the new manifest entry id ----

std::string cmd_gen_plate(Workspace& ws, const GenPlateParams& params);
std::string cmd_gen_fml(Workspace& ws, const GenFmlParams& params);
std::string cmd_simulate(Workspace& ws, const SimulateParams& params, int threads = 1);
std::string cmd_recon(Workspace& ws, const std::string& image_set_id,
                      const FilterSpec& filter, int out_n = 0, int threads = 1);
std::string cmd_extract_segments(Workspace& ws, const std::string& image_set_id,
                                 int image_index, int count, double pore_fraction,
                                 int segment_size, std::uint64_t seed);
std::string cmd_train_cnn(Workspace& ws, const TrainCnnParams& params);
std::string cmd_classify(Workspace& ws, const std::string& model_id,
                         const std::string& image_set_id, int image_index,
                         int threads = 1);
std::string cmd_cluster(Workspace& ws, const std::string& feature_map_id, double tau = 0.5,
                        double eps = 2.0, int min_pts = 5);
std::string cmd_fit(Workspace& ws, const std::string& clusters_id);
std::string cmd_report(Workspace& ws, const std::string& feature_map_id, double tau = 0.5,
                       double eps = 2.0, int min_pts = 5);
std::string cmd_eval(Workspace& ws, const std::string& feature_map_id, double tau = 0.5);
std::string cmd_zslice(Workspace& ws, const std::string& volume_id, int window = 4,
                       int stride = 0);
std::string cmd_train_ae(Workspace& ws, const TrainAeParams& params);
std::string cmd_anomaly(Workspace& ws, const std::string& model_id,
                        const std::string& volume_id, int window = 4, int stride = 0,
                        std::optional<double> tau = std::nullopt, int threads = 1);
std::string cmd_experiment_71(Workspace& ws, const Experiment71Params& params,
                              int threads = 1);

// loaders used by commands and tests
SpecimenSpec load_spec(const Workspace& ws, const std::string& spec_id);
std::vector<ImageF> load_image_set(const Workspace& ws, const std::string& id,
                                   bool truth = false);

// parses "20-8-8" style architecture strings
void parse_arch(const std::string& arch, int& segment, int& fa, int& fb);

} // namespace radisynth
