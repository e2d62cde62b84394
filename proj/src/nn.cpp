#include "radisynth/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "radisynth/errors.hpp"
#include "radisynth/rng.hpp"

namespace radisynth {

void init_weights(std::vector<double>& w, std::size_t fan_in, std::size_t fan_out,
                  std::uint64_t seed) {
    Rng rng(seed);
    double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (auto& x : w) x = rng.uniform(-bound, bound);
}

void Conv2d::init(int k_, int in_c_, int out_c_, bool relu_) {
    k = k_;
    in_c = in_c_;
    out_c = out_c_;
    relu = relu_;
    w.assign(static_cast<std::size_t>(k) * k * in_c * out_c, 0.0);
    b.assign(out_c, 0.0);
}

void Dense::init(int in_n_, int out_n_) {
    in_n = in_n_;
    out_n = out_n_;
    w.assign(static_cast<std::size_t>(in_n) * out_n, 0.0);
    b.assign(out_n, 0.0);
}

void conv2d_forward(const Conv2d& layer, const Tensor& in, Tensor& pre, Tensor& out) {
    const int pad = layer.k / 2;
    const int oc = layer.out_c, ic = layer.in_c;
    pre = Tensor(in.h, in.w, oc);
    for (int y = 0; y < in.h; ++y) {
        for (int x = 0; x < in.w; ++x) {
            double* acc = &pre.at(y, x, 0);
            for (int o = 0; o < oc; ++o) acc[o] = layer.b[o];
            for (int ky = 0; ky < layer.k; ++ky) {
                int iy = y + ky - pad;
                if (iy < 0 || iy >= in.h) continue;
                for (int kx = 0; kx < layer.k; ++kx) {
                    int ix = x + kx - pad;
                    if (ix < 0 || ix >= in.w) continue;
                    const double* src = &in.at(iy, ix, 0);
                    const double* wrow = &layer.w[(static_cast<std::size_t>(ky) * layer.k + kx) * ic * oc];
                    for (int i = 0; i < ic; ++i) {
                        double v = src[i];
                        const double* wr = wrow + static_cast<std::size_t>(i) * oc;
                        for (int o = 0; o < oc; ++o) acc[o] += v * wr[o];
                    }
                }
            }
        }
    }
    out = pre;
    if (layer.relu)
        for (auto& v : out.v) v = v > 0 ? v : 0.0;
}

void conv2d_backward(const Conv2d& layer, const Tensor& in, const Tensor& pre,
                     const Tensor& grad_out, Tensor* grad_in, Conv2d& grads) {
    const int pad = layer.k / 2;
    const int oc = layer.out_c, ic = layer.in_c;
    if (grad_in) *grad_in = Tensor(in.h, in.w, ic);
    std::vector<double> gz(oc);
    for (int y = 0; y < in.h; ++y) {
        for (int x = 0; x < in.w; ++x) {
            const double* go = &grad_out.at(y, x, 0);
            const double* pz = &pre.at(y, x, 0);
            for (int o = 0; o < oc; ++o)
                gz[o] = layer.relu && pz[o] <= 0 ? 0.0 : go[o];
            for (int o = 0; o < oc; ++o) grads.b[o] += gz[o];
            for (int ky = 0; ky < layer.k; ++ky) {
                int iy = y + ky - pad;
                if (iy < 0 || iy >= in.h) continue;
                for (int kx = 0; kx < layer.k; ++kx) {
                    int ix = x + kx - pad;
                    if (ix < 0 || ix >= in.w) continue;
                    const double* src = &in.at(iy, ix, 0);
                    std::size_t base = (static_cast<std::size_t>(ky) * layer.k + kx) * ic * oc;
                    for (int i = 0; i < ic; ++i) {
                        double v = src[i];
                        double gi = 0;
                        double* gw = &grads.w[base + static_cast<std::size_t>(i) * oc];
                        const double* wr = &layer.w[base + static_cast<std::size_t>(i) * oc];
                        for (int o = 0; o < oc; ++o) {
                            gw[o] += v * gz[o];
                            gi += wr[o] * gz[o];
                        }
                        if (grad_in) grad_in->at(iy, ix, i) += gi;
                    }
                }
            }
        }
    }
}

void maxpool2_forward(const Tensor& in, Tensor& out, std::vector<int>& argmax) {
    if (in.h % 2 || in.w % 2) throw ShapeError("maxpool2 requires even spatial dims");
    out = Tensor(in.h / 2, in.w / 2, in.c);
    argmax.assign(out.size(), 0);
    for (int y = 0; y < out.h; ++y)
        for (int x = 0; x < out.w; ++x)
            for (int ch = 0; ch < in.c; ++ch) {
                double best = -std::numeric_limits<double>::infinity();
                int best_idx = 0;
                for (int dy = 0; dy < 2; ++dy)
                    for (int dx = 0; dx < 2; ++dx) {
                        int iy = 2 * y + dy, ix = 2 * x + dx;
                        double v = in.at(iy, ix, ch);
                        if (v > best) {
                            best = v;
                            best_idx = (iy * in.w + ix) * in.c + ch;
                        }
                    }
                std::size_t oi = (static_cast<std::size_t>(y) * out.w + x) * out.c + ch;
                out.v[oi] = best;
                argmax[oi] = best_idx;
            }
}

void maxpool2_backward(const Tensor& grad_out, const std::vector<int>& argmax,
                       Tensor& grad_in) {
    std::fill(grad_in.v.begin(), grad_in.v.end(), 0.0);
    for (std::size_t i = 0; i < grad_out.size(); ++i)
        grad_in.v[argmax[i]] += grad_out.v[i];
}

void dense_forward(const Dense& layer, const Tensor& in, std::vector<double>& out) {
    if (static_cast<int>(in.size()) != layer.in_n)
        throw ShapeError("dense: input size mismatch");
    out.assign(layer.out_n, 0.0);
    for (int o = 0; o < layer.out_n; ++o) {
        double acc = layer.b[o];
        const double* wr = &layer.w[static_cast<std::size_t>(o) * layer.in_n];
        for (int i = 0; i < layer.in_n; ++i) acc += wr[i] * in.v[i];
        out[o] = acc;
    }
}

void dense_backward(const Dense& layer, const Tensor& in,
                    const std::vector<double>& grad_out, Tensor& grad_in, Dense& grads) {
    grad_in = in;
    std::fill(grad_in.v.begin(), grad_in.v.end(), 0.0);
    for (int o = 0; o < layer.out_n; ++o) {
        double g = grad_out[o];
        grads.b[o] += g;
        double* gw = &grads.w[static_cast<std::size_t>(o) * layer.in_n];
        const double* wr = &layer.w[static_cast<std::size_t>(o) * layer.in_n];
        for (int i = 0; i < layer.in_n; ++i) {
            gw[i] += g * in.v[i];
            grad_in.v[i] += wr[i] * g;
        }
    }
}

std::vector<double> softmax(const std::vector<double>& logits) {
    double m = *std::max_element(logits.begin(), logits.end());
    std::vector<double> out(logits.size());
    double sum = 0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - m);
        sum += out[i];
    }
    for (auto& v : out) v /= sum;
    return out;
}

double cross_entropy(const std::vector<double>& probs, int label) {
    return -std::log(std::max(probs[label], 1e-300));
}

void Conv1d::init(int k_, int in_c_, int out_c_, bool relu_) {
    k = k_;
    in_c = in_c_;
    out_c = out_c_;
    relu = relu_;
    w.assign(static_cast<std::size_t>(k) * in_c * out_c, 0.0);
    b.assign(out_c, 0.0);
}

void conv1d_forward(const Conv1d& layer, const Tensor& in, Tensor& pre, Tensor& out) {
    const int pad = layer.k / 2;
    const int oc = layer.out_c, ic = layer.in_c;
    pre = Tensor(1, in.w, oc);
    for (int x = 0; x < in.w; ++x) {
        double* acc = &pre.at(0, x, 0);
        for (int o = 0; o < oc; ++o) acc[o] = layer.b[o];
        for (int kx = 0; kx < layer.k; ++kx) {
            int ix = x + kx - pad;
            if (ix < 0 || ix >= in.w) continue;
            const double* src = &in.at(0, ix, 0);
            const double* wrow = &layer.w[static_cast<std::size_t>(kx) * ic * oc];
            for (int i = 0; i < ic; ++i) {
                double v = src[i];
                const double* wr = wrow + static_cast<std::size_t>(i) * oc;
                for (int o = 0; o < oc; ++o) acc[o] += v * wr[o];
            }
        }
    }
    out = pre;
    if (layer.relu)
        for (auto& v : out.v) v = v > 0 ? v : 0.0;
}

void conv1d_backward(const Conv1d& layer, const Tensor& in, const Tensor& pre,
                     const Tensor& grad_out, Tensor* grad_in, Conv1d& grads) {
    const int pad = layer.k / 2;
    const int oc = layer.out_c, ic = layer.in_c;
    if (grad_in) *grad_in = Tensor(1, in.w, ic);
    std::vector<double> gz(oc);
    for (int x = 0; x < in.w; ++x) {
        const double* go = &grad_out.at(0, x, 0);
        const double* pz = &pre.at(0, x, 0);
        for (int o = 0; o < oc; ++o) gz[o] = layer.relu && pz[o] <= 0 ? 0.0 : go[o];
        for (int o = 0; o < oc; ++o) grads.b[o] += gz[o];
        for (int kx = 0; kx < layer.k; ++kx) {
            int ix = x + kx - pad;
            if (ix < 0 || ix >= in.w) continue;
            const double* src = &in.at(0, ix, 0);
            std::size_t base = static_cast<std::size_t>(kx) * ic * oc;
            for (int i = 0; i < ic; ++i) {
                double v = src[i];
                double gi = 0;
                double* gw = &grads.w[base + static_cast<std::size_t>(i) * oc];
                const double* wr = &layer.w[base + static_cast<std::size_t>(i) * oc];
                for (int o = 0; o < oc; ++o) {
                    gw[o] += v * gz[o];
                    gi += wr[o] * gz[o];
                }
                if (grad_in) grad_in->at(0, ix, i) += gi;
            }
        }
    }
}

void maxpool2_1d_forward(const Tensor& in, Tensor& out, std::vector<int>& argmax) {
    if (in.w % 2) throw ShapeError("maxpool2_1d requires even length");
    out = Tensor(1, in.w / 2, in.c);
    argmax.assign(out.size(), 0);
    for (int x = 0; x < out.w; ++x)
        for (int ch = 0; ch < in.c; ++ch) {
            int i0 = (2 * x) * in.c + ch, i1 = (2 * x + 1) * in.c + ch;
            bool first = in.v[i0] >= in.v[i1];
            std::size_t oi = static_cast<std::size_t>(x) * out.c + ch;
            out.v[oi] = first ? in.v[i0] : in.v[i1];
            argmax[oi] = first ? i0 : i1;
        }
}

void maxpool2_1d_backward(const Tensor& grad_out, const std::vector<int>& argmax,
                          Tensor& grad_in) {
    std::fill(grad_in.v.begin(), grad_in.v.end(), 0.0);
    for (std::size_t i = 0; i < grad_out.size(); ++i)
        grad_in.v[argmax[i]] += grad_out.v[i];
}

void upsample2_1d_forward(const Tensor& in, Tensor& out) {
    out = Tensor(1, in.w * 2, in.c);
    for (int x = 0; x < out.w; ++x)
        for (int ch = 0; ch < in.c; ++ch) out.at(0, x, ch) = in.at(0, x / 2, ch);
}

void upsample2_1d_backward(const Tensor& grad_out, Tensor& grad_in) {
    grad_in = Tensor(1, grad_out.w / 2, grad_out.c);
    for (int x = 0; x < grad_out.w; ++x)
        for (int ch = 0; ch < grad_out.c; ++ch)
            grad_in.at(0, x / 2, ch) += grad_out.at(0, x, ch);
}

namespace {
constexpr char kMagic[4] = {'R', 'S', 'M', '1'};
}

void model_file_write(const ModelFile& file, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write model file: " + path);
    out.write(kMagic, 4);
    std::uint32_t version = 1;
    std::uint32_t hlen = static_cast<std::uint32_t>(file.header_json.size());
    std::uint64_t plen = file.payload.size();
    out.write(reinterpret_cast<const char*>(&version), 4);
    out.write(reinterpret_cast<const char*>(&hlen), 4);
    out.write(file.header_json.data(), hlen);
    out.write(reinterpret_cast<const char*>(&plen), 8);
    out.write(reinterpret_cast<const char*>(file.payload.data()),
              static_cast<std::streamsize>(plen * 4));
}

ModelFile model_file_read(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw NotFoundError("cannot open model file: " + path);
    char magic[4];
    std::uint32_t version = 0, hlen = 0;
    in.read(magic, 4);
    in.read(reinterpret_cast<char*>(&version), 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw ParseError("not a model file: " + path);
    if (version != 1) throw ParseError("unsupported model file version");
    in.read(reinterpret_cast<char*>(&hlen), 4);
    ModelFile file;
    file.header_json.resize(hlen);
    in.read(file.header_json.data(), hlen);
    std::uint64_t plen = 0;
    in.read(reinterpret_cast<char*>(&plen), 8);
    file.payload.resize(plen);
    in.read(reinterpret_cast<char*>(file.payload.data()),
            static_cast<std::streamsize>(plen * 4));
    if (!in) throw ParseError("model file truncated: " + path);
    return file;
}

} // namespace radisynth
