// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

#include "coopsim/codec.hpp"
#include "coopsim/errors.hpp"
#include "generators.hpp"

using namespace coopsim;
using namespace coopsim::codec;

namespace {

Tensor random_tensor(Rng& r, int c, int h, int w) {
    Tensor t(c, h, w);
    t.values = gen::reals(r, t.size(), -1.0, 1.0);
    return t;
}

// Smooth blob maps standing in for feature maps.
std::vector<Tensor> blob_maps(Rng& r, int n, int c, int h, int w) {
    std::vector<Tensor> out;
    for (int i = 0; i < n; ++i) {
        Tensor t(c, h, w);
        for (int b = 0; b < 3; ++b) {
            const double cx = gen::uniform(r, 0, w), cy = gen::uniform(r, 0, h), s = gen::uniform(r, 1.5, 4.0);
            for (int ch = 0; ch < c; ++ch) {
                const double amp = gen::uniform(r, 0.2, 1.0);
                for (int y = 0; y < h; ++y)
                    for (int x = 0; x < w; ++x)
                        t.at(ch, y, x) += amp * std::exp(-((x - cx) * (x - cx) + (y - cy) * (y - cy)) / (2 * s * s));
            }
        }
        out.push_back(std::move(t));
    }
    return out;
}

double mean_loss(const AEParams& p, const std::vector<Tensor>& data) {
    double s = 0.0;
    for (const auto& f : data) s += ae_loss(f, ae_decode(ae_encode(f, p), p));
    return s / static_cast<double>(data.size());
}

// Best constant predictor: the per-element mean over the data set.
double constant_baseline(const std::vector<Tensor>& data) {
    std::vector<double> mean(data[0].size(), 0.0);
    for (const auto& f : data)
        for (std::size_t i = 0; i < f.size(); ++i) mean[i] += f.values[i] / static_cast<double>(data.size());
    double s = 0.0;
    for (const auto& f : data)
        for (std::size_t i = 0; i < f.size(); ++i) s += (f.values[i] - mean[i]) * (f.values[i] - mean[i]);
    return s / static_cast<double>(data.size() * data[0].size());
}

std::string bytes_of(const AEParams& p) {
    std::ostringstream os;
    write_params(os, p);
    return os.str();
}

}  // namespace

TEST_SUITE("codec") {

TEST_CASE("compression ratio is 64") {
    AEConfig c;
    c.channels = 5;
    c.height = c.width = 64;
    const AEParams p = AEParams::init(c, 1);
    Rng r = make_stream(1, 0, 0, StreamPurpose::CodecInit);
    const Tensor z = ae_encode(random_tensor(r, 5, 64, 64), p);
    CHECK(z.channels == 5);
    CHECK(z.height == 8);
    CHECK(z.width == 8);
    CHECK(z.size() == 320);
    for (auto [ch, h, w] : {std::tuple{2, 8, 8}, {7, 16, 32}, {30, 128, 64}}) {
        AEConfig k;
        k.channels = ch;
        k.height = h;
        k.width = w;
        CHECK(k.input_elements() == 64 * k.latent_elements());
        CHECK(ae_encode(Tensor(ch, h, w), AEParams::init(k, 2)).size() * 64 == k.input_elements());
    }
    AEConfig bad;
    bad.height = 60;
    CHECK_THROWS_AS(bad.validate(), ShapeError);
}

TEST_CASE("zero maps and shapes") {
    AEConfig c;
    c.channels = 3;
    c.height = c.width = 16;
    const AEParams p = AEParams::init(c, 3);
    const Tensor z = ae_encode(Tensor(3, 16, 16), p);
    CHECK(std::all_of(z.values.begin(), z.values.end(), [](double v) { return v == 0.0; }));
    const Tensor out = ae_decode(z, p);
    CHECK(out.same_shape(Tensor(3, 16, 16)));
    CHECK(std::all_of(out.values.begin(), out.values.end(), [](double v) { return v == 0.0; }));
    CHECK_THROWS_AS(ae_encode(Tensor(3, 8, 16), p), ShapeError);
    CHECK_THROWS_AS(ae_decode(Tensor(3, 4, 4), p), ShapeError);

    Rng r = make_stream(2, 0, 0, StreamPurpose::CodecInit);
    const Tensor f = random_tensor(r, 3, 16, 16);
    CHECK(ae_encode(f, p).values == ae_encode(f, p).values);
}

TEST_CASE("reconstruction loss") {
    Rng r = make_stream(3, 0, 0, StreamPurpose::CodecInit);
    const Tensor f = random_tensor(r, 2, 4, 6);
    CHECK(ae_loss(f, f) == 0.0);
    Tensor g = f;
    for (auto& v : g.values) v += 1.0;
    CHECK(ae_loss(f, g) == doctest::Approx(1.0).epsilon(1e-12));
    const Tensor h = random_tensor(r, 2, 4, 6);
    double s = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) s += (f.values[i] - h.values[i]) * (f.values[i] - h.values[i]);
    CHECK(std::abs(ae_loss(f, h) - s / f.size()) < 1e-12);
    CHECK_THROWS_AS(ae_loss(f, Tensor(2, 4, 5)), ShapeError);
}

TEST_CASE("gradients match central differences") {
    const AEConfig configs[3] = {{2, 8, 8, 4, 2, 3, 0.01}, {3, 16, 8, 4, 2, 3, 0.01}, {1, 16, 16, 4, 2, 3, 0.01}};
    for (int k = 0; k < 3; ++k) {
        Rng r = make_stream(4, k, 0, StreamPurpose::CodecInit);
        AEParams p = AEParams::init(configs[k], 10 + k);
        for (auto* t : p.tensors())
            for (double& v : *t) v += gen::uniform(r, -0.1, 0.1);
        const std::vector<Tensor> batch{random_tensor(r, configs[k].channels, configs[k].height, configs[k].width),
                                        random_tensor(r, configs[k].channels, configs[k].height, configs[k].width)};
        double loss = 0.0;
        const AEGradients g = ae_gradients(p, batch, {}, &loss);
        CHECK(loss == doctest::Approx(mean_loss(p, batch)).epsilon(1e-12));
        const double step = 1e-5;
        double worst = 0.0;
        auto tensors = p.tensors();
        for (std::size_t t = 0; t < tensors.size(); ++t)
            for (std::size_t i = 0; i < tensors[t]->size(); ++i) {
                double& w = (*tensors[t])[i];
                const double keep = w;
                w = keep + step;
                const double up = mean_loss(p, batch);
                w = keep - step;
                const double down = mean_loss(p, batch);
                w = keep;
                const double numeric = (up - down) / (2 * step);
                const double analytic = g.tensors[t][i];
                worst = std::max(worst, std::abs(numeric - analytic) /
                                            std::max({std::abs(numeric), std::abs(analytic), 1e-6}));
            }
        CAPTURE(k);
        CHECK(worst < 1e-4);
    }
}

TEST_CASE("output bias gradient is the summed upstream error") {
    Rng r = make_stream(5, 0, 0, StreamPurpose::CodecInit);
    const AEConfig c{3, 16, 16, 4, 2, 3, 0.01};
    const AEParams p = AEParams::init(c, 5);
    const std::vector<Tensor> batch{random_tensor(r, 3, 16, 16), random_tensor(r, 3, 16, 16)};
    const AEGradients g = ae_gradients(p, batch);
    const std::size_t dec2_bias = 7;  // serialization order: enc1 w/b, enc2 w/b, dec1 w/b, dec2 w/b
    for (int ch = 0; ch < 3; ++ch) {
        double want = 0.0;
        for (const auto& f : batch) {
            const Tensor out = ae_decode(ae_encode(f, p), p);
            for (int y = 0; y < 16; ++y)
                for (int x = 0; x < 16; ++x) want += 2.0 * (out.at(ch, y, x) - f.at(ch, y, x)) / f.size();
        }
        want /= batch.size();
        CHECK(g.tensors[dec2_bias][ch] == doctest::Approx(want).epsilon(1e-10));
    }
}

TEST_CASE("zero loss means zero gradient") {
    const AEConfig c{2, 8, 8, 4, 2, 3, 0.01};
    const AEParams p = AEParams::init(c, 6);
    double loss = -1.0;
    const AEGradients g = ae_gradients(p, std::vector<Tensor>{Tensor(2, 8, 8)}, {}, &loss);
    CHECK(loss == 0.0);
    for (const auto& t : g.tensors)
        for (double v : t) CHECK(v == 0.0);
}

TEST_CASE("training") {
    const AEConfig c{3, 16, 16, 4, 2, 3, 0.01};
    TrainConfig tc;  // learning rate 0.002, 60 epochs, batch 2

    SUBCASE("constant maps are learned") {
        std::vector<Tensor> data(8, Tensor(3, 16, 16));
        for (auto& t : data) std::fill(t.values.begin(), t.values.end(), 0.5);
        Rng r = make_stream(7, 0, 0, StreamPurpose::CodecTrain);
        TrainReport rep;
        ae_train(data, c, tc, r, &rep);
        CHECK(rep.epoch_loss.back() < 1e-3);
    }
    SUBCASE("loss halves, beats the constant predictor and is deterministic") {
        Rng g = make_stream(8, 0, 0, StreamPurpose::Scenario);
        const auto data = blob_maps(g, 32, 3, 16, 16);
        const auto held = blob_maps(g, 8, 3, 16, 16);
        Rng r1 = make_stream(9, 0, 0, StreamPurpose::CodecTrain), r2 = make_stream(9, 0, 0, StreamPurpose::CodecTrain);
        TrainReport rep;
        const AEParams p = ae_train(data, c, tc, r1, &rep);
        REQUIRE(rep.epoch_loss.size() == 60);
        CHECK(rep.epoch_loss.back() < rep.initial_loss);
        CHECK(mean_loss(p, data) <= 0.5 * rep.initial_loss);
        CHECK(mean_loss(p, held) < 0.5 * constant_baseline(held));
        CHECK(bytes_of(ae_train(data, c, tc, r2)) == bytes_of(p));
    }
    SUBCASE("channel in the loop helps under the same channel") {
        // a 4x4 latent leaves the decoder room to learn the noise; a 2x2 one is bottleneck-bound
        const AEConfig wide{3, 32, 32, 4, 2, 3, 0.01};
        Rng g = make_stream(10, 0, 0, StreamPurpose::Scenario);
        const auto data = blob_maps(g, 32, 3, 32, 32);
        const auto test = blob_maps(g, 20, 3, 32, 32);
        channel::ChannelParams link;
        link.distance_m = 20.0;
        link.snr_db = 10.0;
        TrainConfig noisy = tc;
        noisy.channel_in_loop = link;
        Rng a = make_stream(11, 0, 0, StreamPurpose::CodecTrain), b = make_stream(11, 0, 0, StreamPurpose::CodecTrain);
        const AEParams clean_p = ae_train(data, wide, tc, a);
        const AEParams noisy_p = ae_train(data, wide, noisy, b);
        const auto test_mse = [&](const AEParams& p) {
            double s = 0.0;
            for (std::size_t i = 0; i < test.size(); ++i) {
                for (int rep = 0; rep < 10; ++rep) {
                    Rng r = make_stream(12, i, static_cast<std::uint64_t>(rep), StreamPurpose::Link);
                    s += ae_loss(test[i], ae_decode(transmit_latent(ae_encode(test[i], p), link, r), p));
                }
            }
            return s / (10.0 * test.size());
        };
        CHECK(test_mse(noisy_p) < test_mse(clean_p));
    }
    SUBCASE("divergence names the epoch") {
        std::vector<Tensor> data(4, Tensor(3, 16, 16));
        for (auto& t : data) std::fill(t.values.begin(), t.values.end(), 1.0);
        TrainConfig wild = tc;
        wild.learning_rate = 1e200;
        Rng r = make_stream(13, 0, 0, StreamPurpose::CodecTrain);
        try {
            ae_train(data, c, wild, r);
            FAIL("training should diverge");
        } catch (const TrainingError& e) {
            CHECK(e.epoch() >= 1);
        }
    }
    CHECK_THROWS_AS([&] { Rng r; ae_train(std::vector<Tensor>{}, c, tc, r); }(), ShapeError);
}

TEST_CASE("parameter files round trip bit-exactly") {
    const AEConfig c{4, 16, 32, 4, 2, 3, 0.01};
    AEParams p = AEParams::init(c, 14);
    Rng r = make_stream(14, 0, 0, StreamPurpose::CodecInit);
    for (auto* t : p.tensors())
        for (double& v : *t) v += gen::uniform(r, -1e-3, 1e-3);
    const std::string bytes = bytes_of(p);
    CHECK(bytes.substr(0, 8) == "CSAE0001");
    std::istringstream is(bytes);
    const AEParams q = read_params(is);
    CHECK(q.config == p.config);
    CHECK(q.seed == p.seed);
    const auto a = p.tensors();
    const auto b = q.tensors();
    for (std::size_t t = 0; t < a.size(); ++t) {
        REQUIRE(a[t]->size() == b[t]->size());
        CHECK(std::memcmp(a[t]->data(), b[t]->data(), a[t]->size() * sizeof(double)) == 0);
    }
    CHECK(bytes_of(q) == bytes);

    std::istringstream truncated(bytes.substr(0, bytes.size() - 3));
    CHECK_THROWS_AS(read_params(truncated), IoError);
    std::istringstream wrong("NOTCODEC" + bytes.substr(8));
    CHECK_THROWS_AS(read_params(wrong), IoError);
    std::istringstream trailing(bytes + "x");
    CHECK_THROWS_AS(read_params(trailing), IoError);
    CHECK_THROWS_AS(load_params("/nonexistent/params.bin"), IoError);
}

TEST_CASE("tensor layout helpers") {
    Rng r = make_stream(15, 0, 0, StreamPurpose::CodecInit);
    const Tensor t = random_tensor(r, 3, 4, 5);
    const auto v = interleave(t);
    CHECK(v[1] == t.at(1, 0, 0));
    CHECK(v[3] == t.at(0, 0, 1));
    CHECK(deinterleave(v, 3, 4, 5).values == t.values);
    CHECK_THROWS_AS(deinterleave(v, 3, 4, 4), ShapeError);
}

}  // TEST_SUITE
