#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "radisynth/cnn.hpp"
#include "radisynth/errors.hpp"
#include "radisynth/rng.hpp"

using namespace radisynth;

namespace {

// toy image: bright background with a dark square "pore" block
ImageF toy_image(int n, int x0, int y0, int side, double bg = 0.9, double fg = 0.2) {
    ImageF img(n, n, 0.1, bg);
    for (int y = y0; y < y0 + side; ++y)
        for (int x = x0; x < x0 + side; ++x) img.at(x, y) = fg;
    return img;
}

MaskImage toy_mask(int n, int x0, int y0, int side) {
    MaskImage m(n, n);
    for (int y = y0; y < y0 + side; ++y)
        for (int x = x0; x < x0 + side; ++x) m.at(x, y) = 1;
    return m;
}

std::vector<Segment> toy_training_set(int per_class, int segment_size, std::uint64_t seed) {
    // separable: class 1 = dark patches, class 0 = bright patches, plus noise
    Rng rng(seed);
    std::vector<Segment> segs;
    for (int i = 0; i < 2 * per_class; ++i) {
        Segment s;
        s.label = i % 2;
        double base = s.label ? 0.2 : 0.8;
        s.patch.resize(static_cast<std::size_t>(segment_size) * segment_size);
        for (auto& v : s.patch)
            v = std::clamp(base + 0.05 * rng.normal(), 0.0, 1.0);
        segs.push_back(std::move(s));
    }
    return segs;
}

} // namespace

TEST_CASE("cnn_build shapes: [20-8-8] dense sees 5*5*8 = 200 inputs") {
    auto m = cnn_build(20, 8, 8, 1);
    CHECK(m.dense_inputs() == 200);
    CHECK(m.dense.in_n == 200);
    CHECK(m.dense.out_n == 2);
    CHECK(m.conv1.w.size() == 25u * 1 * 8);
    CHECK(m.conv2.w.size() == 25u * 8 * 8);
}

TEST_CASE("cnn_build shapes: [8-8-4] dense sees 2*2*4 = 16 inputs") {
    auto m = cnn_build(8, 8, 4, 1);
    CHECK(m.dense_inputs() == 16);
    CHECK(m.dense.w.size() == 32u);
}

TEST_CASE("cnn_build rejects segment sizes not divisible by 4") {
    CHECK_THROWS_AS(cnn_build(18, 8, 8, 1), ShapeError);
    CHECK_THROWS_AS(cnn_build(10, 4, 4, 1), ShapeError);
}

TEST_CASE("same seed gives identical weights, different seed differs") {
    auto a = cnn_build(12, 4, 4, 7);
    auto b = cnn_build(12, 4, 4, 7);
    auto c = cnn_build(12, 4, 4, 8);
    CHECK(a.conv1.w == b.conv1.w);
    CHECK(a.conv2.w == b.conv2.w);
    CHECK(a.dense.w == b.dense.w);
    CHECK(a.conv1.w != c.conv1.w);
}

TEST_CASE("zero-weight model outputs (0.5, 0.5)") {
    auto m = cnn_build(8, 4, 4, 1);
    std::fill(m.conv1.w.begin(), m.conv1.w.end(), 0.0);
    std::fill(m.conv2.w.begin(), m.conv2.w.end(), 0.0);
    std::fill(m.dense.w.begin(), m.dense.w.end(), 0.0);
    std::vector<double> patch(64, 0.7);
    auto p = m.segment_size == 8 ? cnn_forward(m, patch) : std::array<double, 2>{};
    CHECK(p[0] == doctest::Approx(0.5));
    CHECK(p[1] == doctest::Approx(0.5));
}

TEST_CASE("hand-computed forward on a single-filter identity-like network") {
    // one 5x5 filter with only the center tap = 1, bias 0: conv is identity;
    // pools take block maxima; dense row sums them.
    auto m = cnn_build(8, 1, 1, 1);
    std::fill(m.conv1.w.begin(), m.conv1.w.end(), 0.0);
    std::fill(m.conv2.w.begin(), m.conv2.w.end(), 0.0);
    m.conv1.w[12] = 1.0; // center of the 5x5 kernel, single in/out channel
    m.conv2.w[12] = 1.0;
    std::fill(m.dense.w.begin(), m.dense.w.end(), 0.0);
    for (int i = 0; i < m.dense.in_n; ++i) m.dense.w[i] = 1.0; // logit0 = sum
    std::vector<double> patch(64, 0.0);
    // one bright pixel per pooled 4x4 block, distinct values
    double vals[4] = {0.1, 0.2, 0.3, 0.4};
    patch[1 * 8 + 1] = vals[0];
    patch[1 * 8 + 5] = vals[1];
    patch[5 * 8 + 1] = vals[2];
    patch[5 * 8 + 5] = vals[3];
    auto p = cnn_forward(m, patch);
    double logit0 = vals[0] + vals[1] + vals[2] + vals[3];
    double e0 = std::exp(logit0), e1 = 1.0;
    CHECK(p[0] == doctest::Approx(e0 / (e0 + e1)).epsilon(1e-12));
    CHECK(p[1] == doctest::Approx(e1 / (e0 + e1)).epsilon(1e-12));
}

TEST_CASE("softmax probabilities sum to 1 and are shift invariant") {
    auto m = cnn_build(8, 4, 4, 3);
    Rng rng(9);
    std::vector<double> patch(64);
    for (auto& v : patch) v = rng.uniform();
    auto p = cnn_forward(m, patch);
    CHECK(p[0] + p[1] == doctest::Approx(1.0).epsilon(1e-12));
    // shifting both dense biases by a constant leaves probabilities unchanged
    auto m2 = m;
    m2.dense.b[0] += 37.5;
    m2.dense.b[1] += 37.5;
    auto q = cnn_forward(m2, patch);
    CHECK(q[0] == doctest::Approx(p[0]).epsilon(1e-10));
}

TEST_CASE("gradient check: backprop matches finite differences") {
    auto m = cnn_build(8, 4, 4, 11);
    Rng rng(5);
    std::vector<double> patch(64);
    for (auto& v : patch) v = rng.uniform();
    CHECK(cnn_grad_check(m, patch, 1, 2) < 1e-4);
    CHECK(cnn_grad_check(m, patch, 0, 3) < 1e-4);
}

TEST_CASE("gradient check stays finite on a zero-weight model") {
    auto m = cnn_build(8, 4, 4, 1);
    std::fill(m.conv1.w.begin(), m.conv1.w.end(), 0.0);
    std::fill(m.conv2.w.begin(), m.conv2.w.end(), 0.0);
    std::fill(m.dense.w.begin(), m.dense.w.end(), 0.0);
    std::vector<double> patch(64, 0.4);
    double err = cnn_grad_check(m, patch, 1, 4);
    CHECK(std::isfinite(err));
}

TEST_CASE("training on a separable toy set reaches 100% accuracy") {
    auto m = cnn_build(8, 4, 4, 21);
    auto segs = toy_training_set(40, 8, 13);
    TrainConfig cfg;
    cfg.epochs = 10;
    cfg.learning_rate = 0.2;
    cfg.seed = 17;
    auto hist = cnn_train_sgd(m, segs, cfg);
    REQUIRE(hist.epochs.size() == 10);
    CHECK(hist.epochs.back().accuracy == doctest::Approx(1.0));
    // loss decreases over the first epochs
    for (int e = 1; e < 5; ++e)
        CHECK(hist.epochs[e].loss < hist.epochs[e - 1].loss);
    // history CSV has a header and one row per epoch
    auto csv = hist.csv();
    CHECK(csv.rfind("epoch,loss,train_accuracy\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 11);
}

TEST_CASE("lr = 0 leaves the weights unchanged") {
    auto m = cnn_build(8, 4, 4, 21);
    auto before = m;
    auto segs = toy_training_set(8, 8, 13);
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.learning_rate = 0.0;
    cnn_train_sgd(m, segs, cfg);
    CHECK(m.conv1.w == before.conv1.w);
    CHECK(m.conv2.w == before.conv2.w);
    CHECK(m.dense.w == before.dense.w);
    CHECK(m.dense.b == before.dense.b);
}

TEST_CASE("training is deterministic for a fixed seed") {
    auto segs = toy_training_set(20, 8, 13);
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.seed = 99;
    auto m1 = cnn_build(8, 4, 4, 21);
    auto m2 = cnn_build(8, 4, 4, 21);
    auto h1 = cnn_train_sgd(m1, segs, cfg);
    auto h2 = cnn_train_sgd(m2, segs, cfg);
    CHECK(m1.dense.w == m2.dense.w);
    CHECK(h1.epochs.back().loss == h2.epochs.back().loss);
}

TEST_CASE("training rejects single-class data") {
    auto m = cnn_build(8, 4, 4, 1);
    auto segs = toy_training_set(5, 8, 13);
    for (auto& s : segs) s.label = 1;
    CHECK_THROWS_AS(cnn_train_sgd(m, segs, {}), DegenerateDataError);
    CHECK_THROWS_AS(cnn_train_sgd(m, {}, {}), DegenerateDataError);
}

TEST_CASE("extract_training_segments: counts, labels and mix") {
    auto img = toy_image(128, 30, 30, 40);
    auto mask = toy_mask(128, 30, 30, 40);
    auto segs = extract_training_segments(img, mask, 1000, 0.3, 42, 20);
    REQUIRE(segs.size() == 1000);
    int pores = 0;
    for (const auto& s : segs) {
        pores += s.label;
        CHECK(s.patch.size() == 400u);
        CHECK(static_cast<int>(mask.at(s.x, s.y)) == s.label);
        for (double v : s.patch) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
    }
    CHECK(pores == 300);
    // without-replacement sampling: all center pixels distinct
    std::vector<long long> keys;
    for (const auto& s : segs) keys.push_back(static_cast<long long>(s.y) * 128 + s.x);
    std::sort(keys.begin(), keys.end());
    CHECK(std::adjacent_find(keys.begin(), keys.end()) == keys.end());
}

TEST_CASE("extract_training_segments: deterministic and seed sensitive") {
    auto img = toy_image(64, 20, 20, 16);
    auto mask = toy_mask(64, 20, 20, 16);
    auto a = extract_training_segments(img, mask, 100, 0.3, 7, 12);
    auto b = extract_training_segments(img, mask, 100, 0.3, 7, 12);
    auto c = extract_training_segments(img, mask, 100, 0.3, 8, 12);
    REQUIRE(a.size() == b.size());
    bool same = true, diff = false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        same = same && a[i].x == b[i].x && a[i].y == b[i].y;
        diff = diff || a[i].x != c[i].x || a[i].y != c[i].y;
    }
    CHECK(same);
    CHECK(diff);
}

TEST_CASE("extract_training_segments: errors on short supply") {
    auto img = toy_image(64, 30, 30, 3); // 9 pore pixels only
    auto mask = toy_mask(64, 30, 30, 3);
    CHECK_THROWS_AS(extract_training_segments(img, mask, 100, 0.3, 1, 12), SamplingError);
    MaskImage wrong(32, 32);
    CHECK_THROWS_AS(extract_training_segments(img, wrong, 10, 0.3, 1, 12), ShapeError);
}

TEST_CASE("patch_at reflects at the borders") {
    ImageF img(4, 4);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x) img.at(x, y) = 0.1 * (y * 4 + x);
    auto p = patch_at(img, 0, 0, 4);
    // patch covers x,y in [-2, 2); reflected index of -1 is 0, of -2 is 1
    CHECK(p[0] == doctest::Approx(img.at(1, 1))); // (-2, -2)
    CHECK(p[1 * 4 + 1] == doctest::Approx(img.at(0, 0)));
    CHECK(p[2 * 4 + 2] == doctest::Approx(img.at(0, 0)));
    CHECK(p[3 * 4 + 3] == doctest::Approx(img.at(1, 1)));
}

TEST_CASE("sliding window equals per-patch forward exactly") {
    auto img = toy_image(48, 12, 16, 14);
    auto m = cnn_build(12, 4, 4, 31);
    auto map = sliding_window_classify(m, img, 2);
    REQUIRE(map.score.width == img.width);
    REQUIRE(map.score.height == img.height);
    Rng rng(77);
    for (int t = 0; t < 100; ++t) {
        int x = static_cast<int>(rng.uniform_index(img.width));
        int y = static_cast<int>(rng.uniform_index(img.height));
        auto p = cnn_forward(m, patch_at(img, x, y, m.segment_size));
        CHECK(map.score.at(x, y) == p[1]);
        CHECK(map.label.at(x, y) == (p[1] >= p[0] ? 1 : 0));
    }
}

TEST_CASE("sliding window is thread-count invariant") {
    auto img = toy_image(32, 8, 8, 10);
    auto m = cnn_build(8, 4, 4, 31);
    auto a = sliding_window_classify(m, img, 1);
    auto b = sliding_window_classify(m, img, 4);
    CHECK(a.score.v == b.score.v);
    CHECK(a.label.v == b.label.v);
}

TEST_CASE("model save/load round trip preserves outputs") {
    auto m = cnn_build(12, 8, 4, 55);
    auto segs = toy_training_set(10, 12, 3);
    TrainConfig cfg;
    cfg.epochs = 2;
    cnn_train_sgd(m, segs, cfg);
    const char* path = "test_cnn_model.bin";
    cnn_save(m, path, R"({"run":"unit"})");
    auto m2 = cnn_load(path);
    std::remove(path);
    CHECK(m2.segment_size == 12);
    CHECK(m2.filter_a == 8);
    CHECK(m2.filter_b == 4);
    Rng rng(4);
    std::vector<double> patch(144);
    for (auto& v : patch) v = rng.uniform();
    auto p1 = cnn_forward(m, patch);
    auto p2 = cnn_forward(m2, patch);
    // weights pass through float32 on disk
    CHECK(p2[0] == doctest::Approx(p1[0]).epsilon(1e-5));
}

TEST_CASE("classifier end to end: learns the toy pore block") {
    auto img = toy_image(64, 20, 20, 18);
    auto mask = toy_mask(64, 20, 20, 18);
    auto segs = extract_training_segments(img, mask, 400, 0.3, 5, 12);
    auto m = cnn_build(12, 4, 4, 9);
    TrainConfig cfg;
    cfg.epochs = 15;
    cfg.learning_rate = 0.05;
    cfg.seed = 6;
    auto hist = cnn_train_sgd(m, segs, cfg);
    CHECK(hist.epochs.back().accuracy > 0.95);
    auto map = sliding_window_classify(m, img, 2);
    // interior of the pore block and far background classified correctly
    int ok = 0, total = 0;
    for (int y = 26; y < 32; ++y)
        for (int x = 26; x < 32; ++x) {
            ok += map.label.at(x, y) == 1;
            ++total;
        }
    for (int y = 50; y < 56; ++y)
        for (int x = 50; x < 56; ++x) {
            ok += map.label.at(x, y) == 0;
            ++total;
        }
    CHECK(static_cast<double>(ok) / total > 0.95);
}
