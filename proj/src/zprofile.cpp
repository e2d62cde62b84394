#include "radisynth/zprofile.hpp"

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

ZProfileGrid extract_zprofiles(const Volume& vol, int window, int stride) {
    if (stride <= 0) stride = window;
    if (window < 1) throw ValidationError("z-profile window must be >= 1");
    if (window > vol.nx || window > vol.ny)
        throw ShapeError("z-profile window exceeds the volume footprint");
    ZProfileGrid grid;
    grid.window = window;
    grid.stride = stride;
    grid.nz = vol.nz;
    grid.grid_w = (vol.nx - window) / stride + 1;
    grid.grid_h = (vol.ny - window) / stride + 1;
    const double inv = 1.0 / (static_cast<double>(window) * window);
    for (int gy = 0; gy < grid.grid_h; ++gy)
        for (int gx = 0; gx < grid.grid_w; ++gx) {
            ZProfile p;
            p.x0 = gx * stride;
            p.y0 = gy * stride;
            p.window = window;
            p.values.resize(vol.nz);
            for (int z = 0; z < vol.nz; ++z) {
                double sum = 0;
                for (int dy = 0; dy < window; ++dy)
                    for (int dx = 0; dx < window; ++dx)
                        sum += vol.at(p.x0 + dx, p.y0 + dy, z);
                p.values[z] = sum * inv;
            }
            grid.profiles.push_back(std::move(p));
        }
    return grid;
}

AeModel ae_build(int nz, std::uint64_t seed) {
    if (nz % 4 != 0 || nz < 8)
        throw ShapeError("autoencoder length must be >= 8 and divisible by 4");
    AeModel m;
    m.nz = nz;
    m.init_seed = seed;
    m.enc1.init(5, 1, 4, true);
    m.enc2.init(5, 4, 1, false);
    m.dec1.init(5, 1, 4, true);
    m.dec2.init(5, 4, 1, false);
    Rng rng(seed);
    init_weights(m.enc1.w, 5, 20, rng.sub("e1").next_u64());
    init_weights(m.enc2.w, 20, 5, rng.sub("e2").next_u64());
    init_weights(m.dec1.w, 5, 20, rng.sub("d1").next_u64());
    init_weights(m.dec2.w, 20, 5, rng.sub("d2").next_u64());
    return m;
}

namespace {

struct AeScratch {
    Tensor in, pre_e1, act_e1, pool1, pre_e2, act_e2, bottleneck;
    Tensor up1, pre_d1, act_d1, up2, pre_d2, out;
    std::vector<int> arg1, arg2;
};

void ae_forward(const AeModel& m, const std::vector<double>& profile, AeScratch& s) {
    if (static_cast<int>(profile.size()) != m.nz)
        throw ShapeError("profile length does not match autoencoder input size");
    s.in.h = 1;
    s.in.w = m.nz;
    s.in.c = 1;
    s.in.v = profile;
    for (auto& v : s.in.v) v = (v - m.norm_mean) / m.norm_std;
    conv1d_forward(m.enc1, s.in, s.pre_e1, s.act_e1);
    maxpool2_1d_forward(s.act_e1, s.pool1, s.arg1);
    conv1d_forward(m.enc2, s.pool1, s.pre_e2, s.act_e2);
    maxpool2_1d_forward(s.act_e2, s.bottleneck, s.arg2);
    upsample2_1d_forward(s.bottleneck, s.up1);
    conv1d_forward(m.dec1, s.up1, s.pre_d1, s.act_d1);
    upsample2_1d_forward(s.act_d1, s.up2);
    conv1d_forward(m.dec2, s.up2, s.pre_d2, s.out);
}

struct AeGrads {
    Conv1d e1, e2, d1, d2;

    explicit AeGrads(const AeModel&) {
        e1.init(5, 1, 4, true);
        e2.init(5, 4, 1, true);
        d1.init(5, 1, 4, true);
        d2.init(5, 4, 1, false);
    }
    void zero() {
        auto z = [](std::vector<double>& v) { std::fill(v.begin(), v.end(), 0.0); };
        z(e1.w); z(e1.b); z(e2.w); z(e2.b); z(d1.w); z(d1.b); z(d2.w); z(d2.b);
    }
};

// backward of MSE(out, in); returns the loss
double ae_backward(const AeModel& m, AeScratch& s, AeGrads& g) {
    const int nz = m.nz;
    Tensor g_out(1, nz, 1);
    double loss = 0;
    for (int i = 0; i < nz; ++i) {
        double d = s.out.v[i] - s.in.v[i];
        loss += d * d;
        g_out.v[i] = 2.0 * d / nz;
    }
    Tensor g_up2, g_act_d1, g_up1, g_bottle, g_act_e2, g_pool1, g_act_e1;
    conv1d_backward(m.dec2, s.up2, s.pre_d2, g_out, &g_up2, g.d2);
    upsample2_1d_backward(g_up2, g_act_d1);
    conv1d_backward(m.dec1, s.up1, s.pre_d1, g_act_d1, &g_up1, g.d1);
    upsample2_1d_backward(g_up1, g_bottle);
    g_act_e2 = s.act_e2;
    maxpool2_1d_backward(g_bottle, s.arg2, g_act_e2);
    conv1d_backward(m.enc2, s.pool1, s.pre_e2, g_act_e2, &g_pool1, g.e2);
    g_act_e1 = s.act_e1;
    maxpool2_1d_backward(g_pool1, s.arg1, g_act_e1);
    conv1d_backward(m.enc1, s.in, s.pre_e1, g_act_e1, nullptr, g.e1);
    return loss / nz;
}

void sgd1(std::vector<double>& w, const std::vector<double>& g, double lr, double inv) {
    for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr * inv * g[i];
}

} // namespace

AeHistory train_ae(AeModel& model, const std::vector<std::vector<double>>& profiles,
                   const AeTrainConfig& config) {
    if (profiles.empty()) throw DegenerateDataError("autoencoder needs training profiles");
    for (const auto& p : profiles)
        if (static_cast<int>(p.size()) != model.nz)
            throw ShapeError("training profile length differs from model input size");

    // standardize inputs so gradient magnitudes do not depend on density units
    double mean = 0, var = 0;
    std::size_t count = 0;
    for (const auto& p : profiles)
        for (double v : p) {
            mean += v;
            ++count;
        }
    mean /= count;
    for (const auto& p : profiles)
        for (double v : p) var += (v - mean) * (v - mean);
    model.norm_mean = mean;
    model.norm_std = std::max(std::sqrt(var / count), 1e-9);

    Rng shuffle_rng = Rng(config.seed).sub("ae-shuffle");
    std::vector<std::size_t> order(profiles.size());
    std::iota(order.begin(), order.end(), 0);
    AeScratch s;
    AeGrads g(model);
    AeHistory history;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double mse_sum = 0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
            g.zero();
            for (std::size_t i = start; i < end; ++i) {
                ae_forward(model, profiles[order[i]], s);
                mse_sum += ae_backward(model, s, g);
            }
            double inv = 1.0 / static_cast<double>(end - start);
            sgd1(model.enc1.w, g.e1.w, config.learning_rate, inv);
            sgd1(model.enc1.b, g.e1.b, config.learning_rate, inv);
            sgd1(model.enc2.w, g.e2.w, config.learning_rate, inv);
            sgd1(model.enc2.b, g.e2.b, config.learning_rate, inv);
            sgd1(model.dec1.w, g.d1.w, config.learning_rate, inv);
            sgd1(model.dec1.b, g.d1.b, config.learning_rate, inv);
            sgd1(model.dec2.w, g.d2.w, config.learning_rate, inv);
            sgd1(model.dec2.b, g.d2.b, config.learning_rate, inv);
        }
        // report in original density units (training runs on standardized data)
        history.mse.push_back(mse_sum / profiles.size() * model.norm_std * model.norm_std);
    }
    model.trained_on_baseline = true;
    return history;
}

std::vector<double> ae_reconstruct(const AeModel& model, const std::vector<double>& profile) {
    AeScratch s;
    ae_forward(model, profile, s);
    std::vector<double> out = s.out.v;
    for (auto& v : out) v = v * model.norm_std + model.norm_mean;
    return out;
}

double anomaly_score(const AeModel& model, const std::vector<double>& profile) {
    auto rec = ae_reconstruct(model, profile);
    double mse = 0;
    for (std::size_t i = 0; i < rec.size(); ++i) {
        double d = rec[i] - profile[i];
        mse += d * d;
    }
    return mse / rec.size();
}

double calibrate_tau(const AeModel& model,
                     const std::vector<std::vector<double>>& baseline,
                     double percentile) {
    if (baseline.empty()) throw DegenerateDataError("tau calibration needs baseline profiles");
    std::vector<double> scores;
    scores.reserve(baseline.size());
    for (const auto& p : baseline) scores.push_back(anomaly_score(model, p));
    std::sort(scores.begin(), scores.end());
    // nearest-rank percentile
    std::size_t rank = static_cast<std::size_t>(
        std::ceil(percentile / 100.0 * static_cast<double>(scores.size())));
    rank = std::clamp<std::size_t>(rank, 1, scores.size());
    return scores[rank - 1];
}

AnomalyMap anomaly_map(const AeModel& model, const Volume& vol, int window, int stride,
                       double tau, int threads) {
    auto grid = extract_zprofiles(vol, window, stride);
    AnomalyMap map;
    map.tau = tau;
    map.window = grid.window;
    map.stride = grid.stride;
    map.score = ImageF(grid.grid_w, grid.grid_h);
    map.flag = MaskImage(grid.grid_w, grid.grid_h);
    parallel_for(grid.profiles.size(), threads, [&](std::size_t i) {
        double s = anomaly_score(model, grid.profiles[i].values);
        map.score.v[i] = s;
        map.flag.v[i] = s >= tau ? 1 : 0;
    });
    return map;
}

ZCnnModel zcnn_build(int nz, int filter_a, int filter_b, std::uint64_t seed) {
    if (nz % 4 != 0 || nz < 8)
        throw ShapeError("profile classifier length must be >= 8 and divisible by 4");
    if (filter_a < 1 || filter_b < 1) throw ValidationError("filter counts must be >= 1");
    ZCnnModel m;
    m.nz = nz;
    m.filter_a = filter_a;
    m.filter_b = filter_b;
    m.init_seed = seed;
    m.conv1.init(5, 1, filter_a, true);
    m.conv2.init(5, filter_a, filter_b, true);
    m.dense.init(nz / 4 * filter_b, 2);
    Rng rng(seed);
    init_weights(m.conv1.w, 5, static_cast<std::size_t>(5) * filter_a, rng.sub("c1").next_u64());
    init_weights(m.conv2.w, static_cast<std::size_t>(5) * filter_a,
                 static_cast<std::size_t>(5) * filter_b, rng.sub("c2").next_u64());
    init_weights(m.dense.w, m.dense.in_n, m.dense.out_n, rng.sub("d").next_u64());
    return m;
}

namespace {

struct ZScratch {
    Tensor in, pre1, act1, pool1, pre2, act2, pool2;
    std::vector<int> arg1, arg2;
    std::vector<double> logits;
};

std::array<double, 2> zcnn_forward(const ZCnnModel& m, const std::vector<double>& profile,
                                   ZScratch& s) {
    if (static_cast<int>(profile.size()) != m.nz)
        throw ShapeError("profile length does not match classifier input size");
    s.in.h = 1;
    s.in.w = m.nz;
    s.in.c = 1;
    s.in.v = profile;
    conv1d_forward(m.conv1, s.in, s.pre1, s.act1);
    maxpool2_1d_forward(s.act1, s.pool1, s.arg1);
    conv1d_forward(m.conv2, s.pool1, s.pre2, s.act2);
    maxpool2_1d_forward(s.act2, s.pool2, s.arg2);
    dense_forward(m.dense, s.pool2, s.logits);
    auto p = softmax(s.logits);
    return {p[0], p[1]};
}

struct ZGrads {
    Conv1d c1, c2;
    Dense d;

    explicit ZGrads(const ZCnnModel& m) {
        c1.init(5, 1, m.filter_a, true);
        c2.init(5, m.filter_a, m.filter_b, true);
        d.init(m.dense.in_n, 2);
    }
    void zero() {
        auto z = [](std::vector<double>& v) { std::fill(v.begin(), v.end(), 0.0); };
        z(c1.w); z(c1.b); z(c2.w); z(c2.b); z(d.w); z(d.b);
    }
};

double zcnn_backward(const ZCnnModel& m, ZScratch& s, int label, ZGrads& g) {
    auto probs = softmax(s.logits);
    std::vector<double> dlogits = {probs[0], probs[1]};
    dlogits[label] -= 1.0;
    Tensor g_pool2, g_act2, g_pool1, g_act1;
    dense_backward(m.dense, s.pool2, dlogits, g_pool2, g.d);
    g_act2 = s.act2;
    maxpool2_1d_backward(g_pool2, s.arg2, g_act2);
    conv1d_backward(m.conv2, s.pool1, s.pre2, g_act2, &g_pool1, g.c2);
    g_act1 = s.act1;
    maxpool2_1d_backward(g_pool1, s.arg1, g_act1);
    conv1d_backward(m.conv1, s.in, s.pre1, g_act1, nullptr, g.c1);
    return cross_entropy({probs[0], probs[1]}, label);
}

} // namespace

ZTrainHistory train_zcnn(ZCnnModel& model, const std::vector<LabeledProfile>& profiles,
                         const ZTrainConfig& config) {
    if (profiles.size() < 2) throw DegenerateDataError("need at least 2 labeled profiles");
    bool has0 = false, has1 = false;
    for (const auto& p : profiles) (p.label ? has1 : has0) = true;
    if (!has0 || !has1) throw DegenerateDataError("profile training set must contain both classes");

    Rng shuffle_rng = Rng(config.seed).sub("zcnn-shuffle");
    std::vector<std::size_t> order(profiles.size());
    std::iota(order.begin(), order.end(), 0);
    ZScratch s;
    ZGrads g(model);
    ZTrainHistory history;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double loss_sum = 0;
        long long correct = 0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
            g.zero();
            for (std::size_t i = start; i < end; ++i) {
                const LabeledProfile& p = profiles[order[i]];
                auto probs = zcnn_forward(model, p.values, s);
                loss_sum += zcnn_backward(model, s, p.label, g);
                if ((probs[1] >= probs[0]) == (p.label == 1)) ++correct;
            }
            double inv = 1.0 / static_cast<double>(end - start);
            sgd1(model.conv1.w, g.c1.w, config.learning_rate, inv);
            sgd1(model.conv1.b, g.c1.b, config.learning_rate, inv);
            sgd1(model.conv2.w, g.c2.w, config.learning_rate, inv);
            sgd1(model.conv2.b, g.c2.b, config.learning_rate, inv);
            sgd1(model.dense.w, g.d.w, config.learning_rate, inv);
            sgd1(model.dense.b, g.d.b, config.learning_rate, inv);
        }
        history.loss.push_back(loss_sum / profiles.size());
        history.accuracy.push_back(static_cast<double>(correct) / profiles.size());
    }
    return history;
}

std::array<double, 2> classify_profile(const ZCnnModel& model,
                                       const std::vector<double>& profile) {
    ZScratch s;
    return zcnn_forward(model, profile, s);
}

DamagedVolume synth_damaged_volume(const DamageSpec& spec) {
    if (spec.stretch <= 0) throw ValidationError("stretch factor must be > 0");
    if (spec.region_x < 0 || spec.region_y < 0 ||
        spec.region_x + spec.region_w > spec.nx ||
        spec.region_y + spec.region_h > spec.ny)
        throw ShapeError("damage region lies outside the volume footprint");
    if (spec.layers < 1) throw ValidationError("need at least one layer");

    DamagedVolume out;
    out.volume = Volume(spec.nx, spec.ny, spec.nz, 0.0);
    out.truth = MaskImage(spec.nx, spec.ny);
    for (int y = spec.region_y; y < spec.region_y + spec.region_h; ++y)
        for (int x = spec.region_x; x < spec.region_x + spec.region_w; ++x)
            out.truth.at(x, y) = 1;

    auto layer_mu = [&](double z) {
        int layer = std::clamp(static_cast<int>(z * spec.layers / spec.nz), 0,
                               spec.layers - 1);
        return layer % 2 == 0 ? spec.mu_a : spec.mu_b;
    };
    // Monotone z remap: the middle half of the stack is magnified by `stretch`
    // while the outer quarters compress so the total thickness is preserved.
    const double z1 = 0.25 * spec.nz, z2 = 0.75 * spec.nz;
    const double slope_in = 1.0 / spec.stretch;
    const double slope_out = (1.0 - 0.5 * slope_in) / 0.5;
    auto source_z = [&](double z) {
        if (z < z1) return slope_out * z;
        if (z < z2) return slope_out * z1 + slope_in * (z - z1);
        return slope_out * z1 + slope_in * (z2 - z1) + slope_out * (z - z2);
    };

    for (int z = 0; z < spec.nz; ++z)
        for (int y = 0; y < spec.ny; ++y)
            for (int x = 0; x < spec.nx; ++x) {
                double zc = z + 0.5;
                double zs = out.truth.at(x, y) ? source_z(zc) : zc;
                std::uint64_t idx = (static_cast<std::uint64_t>(z) * spec.ny + y) * spec.nx + x;
                out.volume.at(x, y, z) =
                    layer_mu(zs) + spec.noise_sigma * normal_at(spec.seed, idx);
            }
    return out;
}

namespace {

void conv1d_payload(const Conv1d& c, std::vector<float>& out) {
    for (double v : c.w) out.push_back(static_cast<float>(v));
    for (double v : c.b) out.push_back(static_cast<float>(v));
}

void conv1d_restore(Conv1d& c, const std::vector<float>& in, std::size_t& pos) {
    if (pos + c.w.size() + c.b.size() > in.size())
        throw ParseError("model payload truncated");
    for (auto& v : c.w) v = in[pos++];
    for (auto& v : c.b) v = in[pos++];
}

} // namespace

void ae_save(const AeModel& model, const std::string& path,
             const std::string& provenance_json) {
    ModelFile file;
    json header;
    header["kind"] = "zprofile_ae";
    header["nz"] = model.nz;
    header["norm_mean"] = model.norm_mean;
    header["norm_std"] = model.norm_std;
    header["init_seed"] = model.init_seed;
    header["trained_on_baseline"] = model.trained_on_baseline;
    header["provenance"] = json::parse(provenance_json);
    file.header_json = header.dump();
    conv1d_payload(model.enc1, file.payload);
    conv1d_payload(model.enc2, file.payload);
    conv1d_payload(model.dec1, file.payload);
    conv1d_payload(model.dec2, file.payload);
    model_file_write(file, path);
}

AeModel ae_load(const std::string& path) {
    ModelFile file = model_file_read(path);
    json header = json::parse(file.header_json);
    if (header.at("kind") != "zprofile_ae")
        throw ParseError("model file is not a zprofile_ae model");
    AeModel m = ae_build(header.at("nz"), header.value("init_seed", 0ULL));
    m.norm_mean = header.value("norm_mean", 0.0);
    m.norm_std = header.value("norm_std", 1.0);
    m.trained_on_baseline = header.value("trained_on_baseline", false);
    std::size_t pos = 0;
    conv1d_restore(m.enc1, file.payload, pos);
    conv1d_restore(m.enc2, file.payload, pos);
    conv1d_restore(m.dec1, file.payload, pos);
    conv1d_restore(m.dec2, file.payload, pos);
    if (pos != file.payload.size()) throw ParseError("model payload size mismatch");
    return m;
}

void zcnn_save(const ZCnnModel& model, const std::string& path,
               const std::string& provenance_json) {
    ModelFile file;
    json header;
    header["kind"] = "zprofile_cnn";
    header["nz"] = model.nz;
    header["filter_a"] = model.filter_a;
    header["filter_b"] = model.filter_b;
    header["init_seed"] = model.init_seed;
    header["provenance"] = json::parse(provenance_json);
    file.header_json = header.dump();
    conv1d_payload(model.conv1, file.payload);
    conv1d_payload(model.conv2, file.payload);
    for (double v : model.dense.w) file.payload.push_back(static_cast<float>(v));
    for (double v : model.dense.b) file.payload.push_back(static_cast<float>(v));
    model_file_write(file, path);
}

ZCnnModel zcnn_load(const std::string& path) {
    ModelFile file = model_file_read(path);
    json header = json::parse(file.header_json);
    if (header.at("kind") != "zprofile_cnn")
        throw ParseError("model file is not a zprofile_cnn model");
    ZCnnModel m = zcnn_build(header.at("nz"), header.at("filter_a"),
                             header.at("filter_b"), header.value("init_seed", 0ULL));
    std::size_t pos = 0;
    conv1d_restore(m.conv1, file.payload, pos);
    conv1d_restore(m.conv2, file.payload, pos);
    if (pos + m.dense.w.size() + m.dense.b.size() != file.payload.size())
        throw ParseError("model payload size mismatch");
    for (auto& v : m.dense.w) v = file.payload[pos++];
    for (auto& v : m.dense.b) v = file.payload[pos++];
    return m;
}

} // namespace radisynth
