#include "radisynth/cnn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "radisynth/errors.hpp"
#include "radisynth/parallel.hpp"
#include "radisynth/rng.hpp"

namespace radisynth {

using nlohmann::json;

CnnModel cnn_build(int segment_size, int filter_a, int filter_b, std::uint64_t seed) {
    if (segment_size % 4 != 0) {
        std::ostringstream os;
        os << "segment_size " << segment_size << " must be divisible by 4 (two 2x pools)";
        throw ShapeError(os.str());
    }
    if (filter_a < 1 || filter_b < 1) throw ValidationError("filter counts must be >= 1");
    CnnModel m;
    m.segment_size = segment_size;
    m.filter_a = filter_a;
    m.filter_b = filter_b;
    m.init_seed = seed;
    m.conv1.init(5, 1, filter_a, true);
    m.conv2.init(5, filter_a, filter_b, true);
    m.dense.init(m.dense_inputs(), 2);
    Rng rng(seed);
    init_weights(m.conv1.w, 25, static_cast<std::size_t>(25) * filter_a, rng.sub("c1").next_u64());
    init_weights(m.conv2.w, static_cast<std::size_t>(25) * filter_a,
                 static_cast<std::size_t>(25) * filter_b, rng.sub("c2").next_u64());
    init_weights(m.dense.w, m.dense.in_n, m.dense.out_n, rng.sub("d").next_u64());
    return m;
}

std::array<double, 2> cnn_forward(const CnnModel& model, const std::vector<double>& patch,
                                  CnnScratch& s) {
    const int n = model.segment_size;
    if (static_cast<int>(patch.size()) != n * n)
        throw ShapeError("cnn_forward: patch size does not match segment_size^2");
    s.in.h = s.in.w = n;
    s.in.c = 1;
    s.in.v = patch;
    conv2d_forward(model.conv1, s.in, s.pre1, s.act1);
    maxpool2_forward(s.act1, s.pool1, s.arg1);
    conv2d_forward(model.conv2, s.pool1, s.pre2, s.act2);
    maxpool2_forward(s.act2, s.pool2, s.arg2);
    dense_forward(model.dense, s.pool2, s.logits);
    auto probs = softmax(s.logits);
    return {probs[0], probs[1]};
}

std::array<double, 2> cnn_forward(const CnnModel& model, const std::vector<double>& patch) {
    CnnScratch s;
    return cnn_forward(model, patch, s);
}

namespace {

struct CnnGrads {
    Conv2d c1, c2;
    Dense d;

    explicit CnnGrads(const CnnModel& m) {
        c1.init(5, 1, m.filter_a, true);
        c2.init(5, m.filter_a, m.filter_b, true);
        d.init(m.dense.in_n, 2);
    }
    void zero() {
        auto z = [](std::vector<double>& v) { std::fill(v.begin(), v.end(), 0.0); };
        z(c1.w); z(c1.b); z(c2.w); z(c2.b); z(d.w); z(d.b);
    }
};

// backward of cross-entropy(softmax(logits), label); scratch holds the forward
double cnn_backward(const CnnModel& model, CnnScratch& s, int label, CnnGrads& grads) {
    auto probs = softmax(s.logits);
    std::vector<double> dlogits = {probs[0], probs[1]};
    dlogits[label] -= 1.0;

    Tensor g_pool2, g_act2, g_pool1, g_act1;
    dense_backward(model.dense, s.pool2, dlogits, g_pool2, grads.d);
    g_act2 = s.act2;
    maxpool2_backward(g_pool2, s.arg2, g_act2);
    conv2d_backward(model.conv2, s.pool1, s.pre2, g_act2, &g_pool1, grads.c2);
    g_act1 = s.act1;
    maxpool2_backward(g_pool1, s.arg1, g_act1);
    conv2d_backward(model.conv1, s.in, s.pre1, g_act1, nullptr, grads.c1);
    return cross_entropy({probs[0], probs[1]}, label);
}

void sgd_step(std::vector<double>& w, const std::vector<double>& g, double lr, double inv_batch) {
    for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr * inv_batch * g[i];
}

} // namespace

std::string TrainHistory::csv() const {
    std::ostringstream os;
    os << "epoch,loss,train_accuracy\n";
    os.precision(9);
    for (std::size_t i = 0; i < epochs.size(); ++i)
        os << i << ',' << epochs[i].loss << ',' << epochs[i].accuracy << '\n';
    return os.str();
}

TrainHistory cnn_train_sgd(CnnModel& model, const std::vector<Segment>& segments,
                           const TrainConfig& config) {
    if (segments.size() < 2) throw DegenerateDataError("need at least 2 training segments");
    bool has0 = false, has1 = false;
    for (const auto& s : segments) (s.label ? has1 : has0) = true;
    if (!has0 || !has1)
        throw DegenerateDataError("training set must contain both classes");
    if (config.epochs < 1) throw ValidationError("epochs must be >= 1");
    if (config.batch_size < 1) throw ValidationError("batch size must be >= 1");

    Rng shuffle_rng = Rng(config.seed).sub("shuffle");
    std::vector<std::size_t> order(segments.size());
    std::iota(order.begin(), order.end(), 0);

    CnnScratch scratch;
    CnnGrads grads(model);
    TrainHistory history;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double loss_sum = 0;
        long long correct = 0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            std::size_t end = std::min(order.size(), start + config.batch_size);
            grads.zero();
            for (std::size_t i = start; i < end; ++i) {
                const Segment& seg = segments[order[i]];
                auto probs = cnn_forward(model, seg.patch, scratch);
                loss_sum += cnn_backward(model, scratch, seg.label, grads);
                if ((probs[1] >= probs[0]) == (seg.label == 1)) ++correct;
            }
            double inv = 1.0 / static_cast<double>(end - start);
            sgd_step(model.conv1.w, grads.c1.w, config.learning_rate, inv);
            sgd_step(model.conv1.b, grads.c1.b, config.learning_rate, inv);
            sgd_step(model.conv2.w, grads.c2.w, config.learning_rate, inv);
            sgd_step(model.conv2.b, grads.c2.b, config.learning_rate, inv);
            sgd_step(model.dense.w, grads.d.w, config.learning_rate, inv);
            sgd_step(model.dense.b, grads.d.b, config.learning_rate, inv);
        }
        history.epochs.push_back({loss_sum / segments.size(),
                                  static_cast<double>(correct) / segments.size()});
    }
    return history;
}

std::vector<double> patch_at(const ImageF& image, int x, int y, int segment_size) {
    const int half = segment_size / 2;
    std::vector<double> patch(static_cast<std::size_t>(segment_size) * segment_size);
    auto reflect = [](int i, int n) {
        while (i < 0 || i >= n) {
            if (i < 0) i = -i - 1;
            if (i >= n) i = 2 * n - 1 - i;
        }
        return i;
    };
    for (int dy = 0; dy < segment_size; ++dy) {
        int iy = reflect(y - half + dy, image.height);
        for (int dx = 0; dx < segment_size; ++dx) {
            int ix = reflect(x - half + dx, image.width);
            patch[static_cast<std::size_t>(dy) * segment_size + dx] =
                std::clamp(image.at(ix, iy), 0.0, 1.0);
        }
    }
    return patch;
}

std::vector<Segment> extract_training_segments(const ImageF& image, const MaskImage& mask,
                                               int count, double pore_fraction,
                                               std::uint64_t seed, int segment_size,
                                               int image_id) {
    if (mask.width != image.width || mask.height != image.height)
        throw ShapeError("extract_training_segments: mask/image dimensions differ");
    if (pore_fraction < 0 || pore_fraction > 1)
        throw ValidationError("pore fraction must be in [0, 1]");
    const int half = segment_size / 2;
    // keep the whole patch inside the source image
    std::vector<std::pair<int, int>> pore_px, back_px;
    for (int y = half; y + segment_size - half <= image.height; ++y)
        for (int x = half; x + segment_size - half <= image.width; ++x)
            (mask.at(x, y) ? pore_px : back_px).emplace_back(x, y);

    int n_pore = static_cast<int>(std::lround(count * pore_fraction));
    int n_back = count - n_pore;
    if (static_cast<int>(pore_px.size()) < n_pore ||
        static_cast<int>(back_px.size()) < n_back) {
        std::ostringstream os;
        os << "not enough class pixels: need " << n_pore << " pore / " << n_back
           << " background, have " << pore_px.size() << " / " << back_px.size();
        throw SamplingError(os.str());
    }

    Rng rng = Rng(seed).sub("segments");
    rng.shuffle(pore_px);
    rng.shuffle(back_px);
    std::vector<Segment> out;
    out.reserve(count);
    auto emit = [&](const std::vector<std::pair<int, int>>& px, int n, int label) {
        for (int i = 0; i < n; ++i) {
            Segment s;
            s.patch = patch_at(image, px[i].first, px[i].second, segment_size);
            s.label = label;
            s.image_id = image_id;
            s.x = px[i].first;
            s.y = px[i].second;
            out.push_back(std::move(s));
        }
    };
    emit(pore_px, n_pore, 1);
    emit(back_px, n_back, 0);
    return out;
}

FeatureMap sliding_window_classify(const CnnModel& model, const ImageF& image,
                                   int threads) {
    if (image.width < model.segment_size || image.height < model.segment_size)
        throw ShapeError("image smaller than segment_size");
    FeatureMap map;
    map.score = ImageF(image.width, image.height, image.pitch_mm);
    map.label = MaskImage(image.width, image.height);
    parallel_for(static_cast<std::size_t>(image.height), threads, [&](std::size_t y) {
        CnnScratch scratch;
        for (int x = 0; x < image.width; ++x) {
            auto probs =
                cnn_forward(model, patch_at(image, x, static_cast<int>(y), model.segment_size),
                            scratch);
            map.score.at(x, static_cast<int>(y)) = probs[1];
            map.label.at(x, static_cast<int>(y)) = probs[1] >= probs[0] ? 1 : 0;
        }
    });
    return map;
}

double cnn_grad_check(const CnnModel& model, const std::vector<double>& patch, int label,
                      std::uint64_t seed) {
    CnnModel m = model; // perturbed copy
    CnnScratch s;
    CnnGrads grads(m);
    grads.zero();
    cnn_forward(m, patch, s);
    cnn_backward(m, s, label, grads);

    struct Slot {
        std::vector<double>* w;
        const std::vector<double>* g;
    };
    std::vector<Slot> slots = {{&m.conv1.w, &grads.c1.w}, {&m.conv1.b, &grads.c1.b},
                               {&m.conv2.w, &grads.c2.w}, {&m.conv2.b, &grads.c2.b},
                               {&m.dense.w, &grads.d.w},  {&m.dense.b, &grads.d.b}};

    // relu states, to exclude samples that straddle a kink
    auto relu_mask = [&]() {
        std::vector<std::uint8_t> mask;
        mask.reserve(s.pre1.size() + s.pre2.size());
        for (double v : s.pre1.v) mask.push_back(v > 0);
        for (double v : s.pre2.v) mask.push_back(v > 0);
        return mask;
    };

    const double h = 1e-4;
    Rng rng(seed);
    double worst = 0;
    for (const auto& slot : slots) {
        std::size_t n = slot.w->size();
        std::size_t samples = std::max<std::size_t>(8, n / 100); // ~1% per layer
        for (std::size_t t = 0; t < samples; ++t) {
            std::size_t i = static_cast<std::size_t>(rng.uniform_index(n));
            double saved = (*slot.w)[i];
            (*slot.w)[i] = saved + h;
            auto p_plus = cnn_forward(m, patch, s);
            double loss_plus = cross_entropy({p_plus[0], p_plus[1]}, label);
            auto mask_plus = relu_mask();
            (*slot.w)[i] = saved - h;
            auto p_minus = cnn_forward(m, patch, s);
            double loss_minus = cross_entropy({p_minus[0], p_minus[1]}, label);
            auto mask_minus = relu_mask();
            (*slot.w)[i] = saved;
            if (mask_plus != mask_minus) continue; // relu kink crossed
            double fd = (loss_plus - loss_minus) / (2 * h);
            double bp = (*slot.g)[i];
            double denom = std::max({std::abs(fd), std::abs(bp), 1e-6});
            worst = std::max(worst, std::abs(fd - bp) / denom);
        }
    }
    return worst;
}

void cnn_save(const CnnModel& model, const std::string& path,
              const std::string& provenance_json) {
    ModelFile file;
    json header;
    header["kind"] = "pixel_cnn";
    header["segment_size"] = model.segment_size;
    header["filter_a"] = model.filter_a;
    header["filter_b"] = model.filter_b;
    header["init_seed"] = model.init_seed;
    header["provenance"] = json::parse(provenance_json);
    file.header_json = header.dump();
    auto append = [&](const std::vector<double>& v) {
        for (double x : v) file.payload.push_back(static_cast<float>(x));
    };
    append(model.conv1.w);
    append(model.conv1.b);
    append(model.conv2.w);
    append(model.conv2.b);
    append(model.dense.w);
    append(model.dense.b);
    model_file_write(file, path);
}

CnnModel cnn_load(const std::string& path) {
    ModelFile file = model_file_read(path);
    json header;
    try {
        header = json::parse(file.header_json);
    } catch (const json::exception& e) {
        throw ParseError(std::string("model header: ") + e.what());
    }
    if (header.at("kind") != "pixel_cnn")
        throw ParseError("model file is not a pixel_cnn model");
    CnnModel m = cnn_build(header.at("segment_size"), header.at("filter_a"),
                           header.at("filter_b"), header.value("init_seed", 0ULL));
    std::size_t pos = 0;
    auto take = [&](std::vector<double>& v) {
        if (pos + v.size() > file.payload.size())
            throw ParseError("model payload truncated");
        for (auto& x : v) x = file.payload[pos++];
    };
    take(m.conv1.w);
    take(m.conv1.b);
    take(m.conv2.w);
    take(m.conv2.b);
    take(m.dense.w);
    take(m.dense.b);
    if (pos != file.payload.size()) throw ParseError("model payload size mismatch");
    return m;
}

} // namespace radisynth
