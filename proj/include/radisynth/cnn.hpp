#pragma once
#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "radisynth/image.hpp"
#include "radisynth/nn.hpp"

namespace radisynth {

// Semantic pixel classifier: conv(5x5, filterA, relu) - pool2 -
// conv(5x5, filterB, relu) - pool2 - dense softmax over 2 classes, applied to
// segment_size x segment_size patches. Class 1 = pore, class 0 = background.
struct CnnModel {
    int segment_size = 20;
    int filter_a = 8, filter_b = 8;
    Conv2d conv1, conv2;
    Dense dense;
    std::uint64_t init_seed = 0;

    int dense_inputs() const {
        int s = segment_size / 4;
        return s * s * filter_b;
    }
};

CnnModel cnn_build(int segment_size, int filter_a, int filter_b, std::uint64_t seed);

// Scratch activations for one forward/backward pass; reusable across calls.
struct CnnScratch {
    Tensor in, pre1, act1, pool1, pre2, act2, pool2;
    std::vector<int> arg1, arg2;
    std::vector<double> logits;
};

std::array<double, 2> cnn_forward(const CnnModel& model, const std::vector<double>& patch,
                                  CnnScratch& scratch);
std::array<double, 2> cnn_forward(const CnnModel& model, const std::vector<double>& patch);

struct Segment {
    std::vector<double> patch; // segment_size^2 values in [0, 1]
    int label = 0;             // 1 = pore, 0 = background
    int image_id = 0, x = 0, y = 0;
};

struct TrainConfig {
    double learning_rate = 0.01;
    int epochs = 100;
    int batch_size = 16;
    std::uint64_t seed = 0;
    double pore_fraction = 0.3; // recorded sampling mix
};

struct EpochStats {
    double loss = 0;
    double accuracy = 0;
};

struct TrainHistory {
    std::vector<EpochStats> epochs;
    std::string csv() const; // epoch,loss,train_accuracy
};

// Mini-batch SGD on mean cross-entropy; per-epoch shuffle from config.seed.
TrainHistory cnn_train_sgd(CnnModel& model, const std::vector<Segment>& segments,
                           const TrainConfig& config);

// `count` patches centered on distinct pixels sampled without replacement,
// pore_fraction of them on defect pixels. Patches must fit inside the image.
std::vector<Segment> extract_training_segments(const ImageF& image, const MaskImage& mask,
                                               int count, double pore_fraction,
                                               std::uint64_t seed, int segment_size,
                                               int image_id = 0);

// patch centered at (x, y) with symmetric reflect padding at the borders
std::vector<double> patch_at(const ImageF& image, int x, int y, int segment_size);

struct FeatureMap {
    ImageF score;    // pore probability per pixel
    MaskImage label; // argmax class
};

FeatureMap sliding_window_classify(const CnnModel& model, const ImageF& image,
                                   int threads = 1);

// Max relative error of backprop vs central finite differences (h = 1e-4) over
// a ~1% random weight sample. Weights whose perturbation flips a relu state
// are excluded.
double cnn_grad_check(const CnnModel& model, const std::vector<double>& patch, int label,
                      std::uint64_t seed = 1);

void cnn_save(const CnnModel& model, const std::string& path,
              const std::string& provenance_json = "{}");
CnnModel cnn_load(const std::string& path);

} // namespace radisynth
