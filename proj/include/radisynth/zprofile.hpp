#pragma once
#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "radisynth/image.hpp"
#include "radisynth/nn.hpp"

namespace radisynth {

// density sequence along z averaged over a w x w pixel window at (gx, gy)
struct ZProfile {
    std::vector<double> values;
    int x0 = 0, y0 = 0; // window origin in voxels
    int window = 4;
};

struct ZProfileGrid {
    std::vector<ZProfile> profiles;
    int grid_w = 0, grid_h = 0; // profiles laid out row-major
    int window = 4, stride = 4;
    int nz = 0;
};

ZProfileGrid extract_zprofiles(const Volume& vol, int window = 4, int stride = 0);

// 1D conv autoencoder: enc conv(1->4, relu) - pool2 - conv(4->1, relu) - pool2
// (bottleneck nz/4), dec upsample - conv(1->4, relu) - upsample - conv(4->1).
struct AeModel {
    int nz = 0;
    Conv1d enc1, enc2, dec1, dec2;
    // input standardization, fitted on the training set
    double norm_mean = 0, norm_std = 1;
    std::uint64_t init_seed = 0;
    bool trained_on_baseline = false;
};

AeModel ae_build(int nz, std::uint64_t seed);

struct AeTrainConfig {
    double learning_rate = 0.05;
    int epochs = 300;
    int batch_size = 8;
    std::uint64_t seed = 0;
};

struct AeHistory {
    std::vector<double> mse; // per-epoch mean reconstruction MSE
};

AeHistory train_ae(AeModel& model, const std::vector<std::vector<double>>& profiles,
                   const AeTrainConfig& config);

std::vector<double> ae_reconstruct(const AeModel& model, const std::vector<double>& profile);
double anomaly_score(const AeModel& model, const std::vector<double>& profile);

// tau = given percentile of the baseline score distribution
double calibrate_tau(const AeModel& model,
                     const std::vector<std::vector<double>>& baseline,
                     double percentile = 99.0);

struct AnomalyMap {
    ImageF score;    // grid_w x grid_h anomaly MSE
    MaskImage flag;  // score >= tau
    double tau = 0;
    int window = 4, stride = 4;
};

AnomalyMap anomaly_map(const AeModel& model, const Volume& vol, int window, int stride,
                       double tau, int threads = 1);

// 1D two-class profile classifier mirroring the 2D pixel network
struct ZCnnModel {
    int nz = 0;
    int filter_a = 8, filter_b = 8;
    Conv1d conv1, conv2;
    Dense dense;
    std::uint64_t init_seed = 0;
};

ZCnnModel zcnn_build(int nz, int filter_a, int filter_b, std::uint64_t seed);

struct LabeledProfile {
    std::vector<double> values;
    int label = 0; // 1 = damaged
};

struct ZTrainConfig {
    double learning_rate = 0.05;
    int epochs = 60;
    int batch_size = 16;
    std::uint64_t seed = 0;
};

struct ZTrainHistory {
    std::vector<double> loss;
    std::vector<double> accuracy;
};

ZTrainHistory train_zcnn(ZCnnModel& model, const std::vector<LabeledProfile>& profiles,
                         const ZTrainConfig& config);
std::array<double, 2> classify_profile(const ZCnnModel& model,
                                       const std::vector<double>& profile);

// Layered test phantom with a locally z-stretched damage region.
struct DamageSpec {
    int nx = 32, ny = 32, nz = 64;
    int layers = 5;
    double mu_a = 0.10, mu_b = 0.05; // alternating layer densities
    int region_x = 8, region_y = 8, region_w = 10, region_h = 10;
    double stretch = 1.2;   // z magnification inside the damaged band
    double noise_sigma = 0.002;
    std::uint64_t seed = 1;
};

struct DamagedVolume {
    Volume volume;
    MaskImage truth; // nx x ny damage region marker
};

DamagedVolume synth_damaged_volume(const DamageSpec& spec);

void ae_save(const AeModel& model, const std::string& path,
             const std::string& provenance_json = "{}");
AeModel ae_load(const std::string& path);
void zcnn_save(const ZCnnModel& model, const std::string& path,
               const std::string& provenance_json = "{}");
ZCnnModel zcnn_load(const std::string& path);

} // namespace radisynth
