#pragma once
#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace radisynth {

// Dense row-major activation block: (h, w, c), channel fastest. 1D layers use
// h = 1.
struct Tensor {
    int h = 0, w = 0, c = 0;
    std::vector<double> v;

    Tensor() = default;
    Tensor(int h_, int w_, int c_, double fill = 0)
        : h(h_), w(w_), c(c_), v(static_cast<std::size_t>(h_) * w_ * c_, fill) {}
    double& at(int y, int x, int ch) {
        return v[(static_cast<std::size_t>(y) * w + x) * c + ch];
    }
    const double& at(int y, int x, int ch) const {
        return v[(static_cast<std::size_t>(y) * w + x) * c + ch];
    }
    std::size_t size() const { return v.size(); }
};

// 2D convolution, stride 1, 'same' zero padding k/2. Weight layout
// [k*k][in_c][out_c] so the innermost accumulation runs over contiguous
// output channels.
struct Conv2d {
    int k = 5, in_c = 1, out_c = 1;
    bool relu = true;
    std::vector<double> w;
    std::vector<double> b;

    void init(int k_, int in_c_, int out_c_, bool relu_);
    std::size_t weight_count() const { return w.size() + b.size(); }
};

struct Dense {
    int in_n = 0, out_n = 0;
    std::vector<double> w; // [out][in]
    std::vector<double> b;

    void init(int in_n_, int out_n_);
};

void conv2d_forward(const Conv2d& layer, const Tensor& in, Tensor& pre, Tensor& out);
// grad_in may be null for the first layer
void conv2d_backward(const Conv2d& layer, const Tensor& in, const Tensor& pre,
                     const Tensor& grad_out, Tensor* grad_in, Conv2d& grads);

void maxpool2_forward(const Tensor& in, Tensor& out, std::vector<int>& argmax);
void maxpool2_backward(const Tensor& grad_out, const std::vector<int>& argmax,
                       Tensor& grad_in);

void dense_forward(const Dense& layer, const Tensor& in, std::vector<double>& out);
void dense_backward(const Dense& layer, const Tensor& in,
                    const std::vector<double>& grad_out, Tensor& grad_in, Dense& grads);

// numerically safe softmax
std::vector<double> softmax(const std::vector<double>& logits);
// cross-entropy of softmax probs against a class index
double cross_entropy(const std::vector<double>& probs, int label);

// 1D variants (h == 1); pooling and conv mirror the 2D contracts
struct Conv1d {
    int k = 5, in_c = 1, out_c = 1;
    bool relu = true;
    std::vector<double> w; // [k][in_c][out_c]
    std::vector<double> b;

    void init(int k_, int in_c_, int out_c_, bool relu_);
};

void conv1d_forward(const Conv1d& layer, const Tensor& in, Tensor& pre, Tensor& out);
void conv1d_backward(const Conv1d& layer, const Tensor& in, const Tensor& pre,
                     const Tensor& grad_out, Tensor* grad_in, Conv1d& grads);
void maxpool2_1d_forward(const Tensor& in, Tensor& out, std::vector<int>& argmax);
void maxpool2_1d_backward(const Tensor& grad_out, const std::vector<int>& argmax,
                          Tensor& grad_in);
// nearest-neighbor upsampling by 2
void upsample2_1d_forward(const Tensor& in, Tensor& out);
void upsample2_1d_backward(const Tensor& grad_out, Tensor& grad_in);

// seeded scaled-uniform initialization in +-sqrt(6 / (fan_in + fan_out))
void init_weights(std::vector<double>& w, std::size_t fan_in, std::size_t fan_out,
                  std::uint64_t seed);

// Versioned model container: magic, version, JSON header, float32 payload.
struct ModelFile {
    std::string header_json;
    std::vector<float> payload;
};
void model_file_write(const ModelFile& file, const std::string& path);
ModelFile model_file_read(const std::string& path);

} // namespace radisynth
