// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <complex>
#include <limits>
#include <vector>

#include "coopsim/channel.hpp"
#include "coopsim/errors.hpp"
#include "generators.hpp"

using namespace coopsim;
using namespace coopsim::channel;

namespace {

Rng rng(std::uint64_t s) { return make_stream(s, 0, 0, StreamPurpose::Link); }

double mean_rms(double snr_db, int frames) {
    ChannelParams p;
    p.distance_m = 20.0;
    p.snr_db = snr_db;
    double acc = 0.0;
    for (int f = 0; f < frames; ++f) {
        Rng r = make_stream(7, static_cast<std::uint64_t>(f), 1, StreamPurpose::Link);
        const auto v = gen::reals(r, 300);
        LinkReport rep;
        transmit(v, 3, p, r, &rep);
        acc += rep.rms_error;
    }
    return acc / frames;
}

}  // namespace

TEST_SUITE("channel") {

TEST_CASE("path loss gain examples") {
    CHECK(path_loss_gain(1.0, 1.0, 2.0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(path_loss_gain(1.0, 10.0, 2.0) == doctest::Approx(0.1).epsilon(1e-15));
    CHECK(path_loss_gain(4.0, 2.0, 3.0) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-15));
    CHECK_THROWS_AS(path_loss_gain(0.0, 1.0, 2.0), DomainError);
    CHECK_THROWS_AS(path_loss_gain(1.0, -1.0, 2.0), DomainError);
}

TEST_CASE("rician fading moments") {
    const int n = 1'000'000;
    SUBCASE("K = 0 has zero mean") {
        Rng r = rng(1);
        cplx m{};
        for (int i = 0; i < n; ++i) m += sample_rician(0.0, r);
        CHECK(std::abs(m / double(n)) < 0.01);
    }
    SUBCASE("estimated K and unit power") {
        for (double k : {0.5, 1.0, 4.0}) {
            Rng r = rng(2);
            cplx m{};
            double pw = 0.0;
            for (int i = 0; i < n; ++i) {
                const cplx h = sample_rician(k, r);
                m += h;
                pw += std::norm(h);
            }
            m /= double(n);
            pw /= n;
            const double k_hat = std::norm(m) / (pw - std::norm(m));
            CHECK(std::abs(k_hat - k) / k < 0.02);
            CHECK(std::abs(pw - 1.0) < 0.01);
        }
    }
    CHECK_THROWS_AS([] { Rng r = rng(3); sample_rician(-1.0, r); }(), DomainError);
}

TEST_CASE("normalization examples") {
    const std::vector<double> v{0, 0, 0, 2, 2, 2};
    const Payload p = normalize_payload(v, 3);
    CHECK(p.values == std::vector<double>{-1, -1, -1, 1, 1, 1});
    REQUIRE(p.axis_stats.size() == 3);
    for (const auto& s : p.axis_stats) {
        CHECK(s.mean == 1.0);
        CHECK(s.std == 1.0);
    }
    CHECK(denormalize_payload(p) == v);

    const std::vector<double> unit{-1, 1, -1, 1};
    const Payload q = normalize_payload(unit, 1);
    CHECK(q.values == unit);
    CHECK(q.axis_stats[0].mean == 0.0);
    CHECK(q.axis_stats[0].std == 1.0);

    Payload id{{3.5, -2.0}, {{0.0, 1.0}}, 1};
    CHECK(denormalize_payload(id) == std::vector<double>{3.5, -2.0});

    CHECK_THROWS_AS(normalize_payload(std::vector<double>{}, 3), ShapeError);
    CHECK_THROWS_AS(normalize_payload(std::vector<double>{1, 2}, 3), ShapeError);
}

TEST_CASE("constant axis keeps std 1 and round trips") {
    const std::vector<double> v{5, 1, 5, 2, 5, 3};
    const Payload p = normalize_payload(v, 2);
    CHECK(p.axis_stats[0].std == 1.0);
    CHECK(p.values[0] == 0.0);
    CHECK(p.values[2] == 0.0);
    CHECK(denormalize_payload(p) == v);
}

TEST_CASE("normalized moments on random payloads") {
    Rng r = rng(4);
    for (int trial = 0; trial < 20; ++trial) {
        const auto v = gen::reals(r, 999, -50, 50);
        const Payload p = normalize_payload(v, 3);
        for (std::size_t a = 0; a < 3; ++a) {
            double m = 0.0, s2 = 0.0;
            for (std::size_t i = a; i < v.size(); i += 3) m += p.values[i];
            m /= 333;
            for (std::size_t i = a; i < v.size(); i += 3) s2 += (p.values[i] - m) * (p.values[i] - m);
            CHECK(std::abs(m) < 1e-12);
            CHECK(std::abs(s2 / 333 - 1.0) < 1e-12);
        }
        const auto back = denormalize_payload(p);
        for (std::size_t i = 0; i < v.size(); ++i) CHECK(std::abs(back[i] - v[i]) < 1e-12);
    }
    const auto big = gen::reals(r, 10'000);
    const auto back = denormalize_payload(normalize_payload(big, 1));
    double worst = 0.0;
    for (std::size_t i = 0; i < big.size(); ++i) worst = std::max(worst, std::abs(back[i] - big[i]));
    CHECK(worst < 1e-12);
}

TEST_CASE("complex packing") {
    const PackedSignal s = pack_complex(std::vector<double>{1, 2, 3, 4});
    CHECK(s.samples == std::vector<cplx>{{1, 2}, {3, 4}});
    const PackedSignal odd = pack_complex(std::vector<double>{5});
    CHECK(odd.samples == std::vector<cplx>{{5, 0}});
    CHECK(odd.real_length == 1);
    Rng r = rng(5);
    for (int trial = 0; trial < 1000; ++trial) {
        const auto v = gen::reals(r, static_cast<std::size_t>(gen::integer(r, 0, 41)));
        const PackedSignal p = pack_complex(v);
        CHECK(p.samples.size() == (v.size() + 1) / 2);
        CHECK(unpack_complex(p) == v);
    }
}

TEST_CASE("noise variance for target SNR") {
    CHECK(noise_variance_for_snr(0.0, 2.0) == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(noise_variance_for_snr(10.0, 1.0) == doctest::Approx(0.1).epsilon(1e-15));
    CHECK(noise_variance_for_snr(-10.0, 0.5) == doctest::Approx(5.0).epsilon(1e-15));
    CHECK_THROWS_AS(noise_variance_for_snr(0.0, 0.0), DomainError);
}

TEST_CASE("channel application and zero forcing") {
    Rng r = rng(6);
    const std::vector<cplx> x{{1, 0}, {0.5, -2}, {-3, 0.25}};
    CHECK(apply_channel(x, ChannelRealization{{1, 0}, {1, 0}, 1.0, 0.0}, r) == x);

    const ChannelRealization c{{0.6, 0.8}, {0.6, 0.8}, 0.5, 0.0};
    const auto y = apply_channel(std::vector<cplx>{{1, 0}}, c, r);
    CHECK(std::abs(y[0] - cplx(0.3, 0.4)) < 1e-15);
    const auto xh = zero_forcing(y, 0.5, {0.6, 0.8});
    CHECK(std::abs(xh[0] - cplx(1, 0)) < 1e-15);
    CHECK_THROWS_AS(zero_forcing(y, 1.0, {0.0, 0.0}), EqualizationError);

    SUBCASE("noise power") {
        const std::vector<cplx> ones(100'000, cplx{1, 0});
        const auto yn = apply_channel(ones, ChannelRealization{{1, 0}, {1, 0}, 1.0, 0.25}, r);
        double mse = 0.0;
        for (std::size_t i = 0; i < ones.size(); ++i) mse += std::norm(yn[i] - ones[i]);
        mse /= ones.size();
        CHECK(mse > 0.245);
        CHECK(mse < 0.255);
    }
    SUBCASE("noiseless zero forcing is exact") {
        std::vector<cplx> v(500);
        for (auto& s : v) s = {gen::uniform(r, -3, 3), gen::uniform(r, -3, 3)};
        const ChannelRealization h{{0.3, -1.1}, {0.3, -1.1}, 0.02, 0.0};
        const auto out = zero_forcing(apply_channel(v, h, r), h.lambda, h.h_est);
        for (std::size_t i = 0; i < v.size(); ++i) CHECK(std::abs(out[i] - v[i]) < 1e-12);
    }
    SUBCASE("zero forcing noise enhancement") {
        const ChannelRealization h{{0.4, 0.3}, {0.4, 0.3}, 0.5, 0.01};
        std::vector<cplx> v(100'000);
        for (auto& s : v) s = {gen::uniform(r, -1, 1), gen::uniform(r, -1, 1)};
        const auto out = zero_forcing(apply_channel(v, h, r), h.lambda, h.h_est);
        double mse = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i) mse += std::norm(out[i] - v[i]);
        mse /= v.size();
        const double expect = h.noise_variance / (h.lambda * h.lambda * std::norm(h.h));
        CHECK(std::abs(mse - expect) / expect < 0.05);
    }
}

TEST_CASE("CSI disturbance") {
    Rng r = rng(8);
    CHECK(perturb_csi({0.7, -0.2}, 0.0, r) == cplx(0.7, -0.2));
    CHECK_THROWS_AS(perturb_csi({1, 0}, -0.1, r), DomainError);
    const int n = 1'000'000;
    cplx m{};
    double v = 0.0;
    for (int i = 0; i < n; ++i) {
        const cplx e = perturb_csi({1, 0}, 0.1, r) - cplx(1, 0);
        m += e;
        v += std::norm(e);
    }
    m /= double(n);
    v = v / n - std::norm(m);
    CHECK(v > 0.099);
    CHECK(v < 0.101);
    CHECK(std::abs(m) < 0.001);
}

TEST_CASE("received-power noise reference") {
    Rng r = rng(9);
    ChannelParams p;
    p.distance_m = 10.0;
    p.snr_db = 10.0;
    const std::vector<cplx> x(64, cplx{1, 1});
    const ChannelRealization c = realize(p, x, r);
    CHECK(c.lambda == doctest::Approx(0.1));
    CHECK(c.h_est == c.h);
    const double rx = c.lambda * c.lambda * std::norm(c.h) * 2.0;
    CHECK(c.noise_variance == doctest::Approx(rx / 10.0).epsilon(1e-12));

    p.noise_reference = NoiseReference::BaselinePathLoss;
    const ChannelRealization b = realize(p, x, r);
    CHECK(b.noise_variance == doctest::Approx(2.0 / 400.0 / 10.0).epsilon(1e-12));

    p.snr_db = std::numeric_limits<double>::infinity();
    CHECK(realize(p, x, r).noise_variance == 0.0);
}

TEST_CASE("parameter validation rejects rather than clamps") {
    ChannelParams p;
    p.rician_k = -1;
    CHECK_THROWS_AS(p.validate(), DomainError);
    p = {};
    p.csi_error_variance = -0.5;
    CHECK_THROWS_AS(p.validate(), DomainError);
    p = {};
    p.distance_m = 0.0;
    CHECK_THROWS_AS(p.validate(), DomainError);
}

TEST_CASE("full link chain") {
    Rng r = rng(10);
    const auto v = gen::reals(r, 301, -40, 40);
    ChannelParams clean;
    clean.distance_m = 25.0;
    const auto back = transmit(v, 7, clean, r);
    REQUIRE(back.size() == v.size());
    for (std::size_t i = 0; i < v.size(); ++i) CHECK(std::abs(back[i] - v[i]) < 1e-9);

    const double hi = mean_rms(30.0, 100), lo = mean_rms(-10.0, 100);
    CHECK(hi < 0.05);
    CHECK(lo > 1.0);

    double prev = std::numeric_limits<double>::infinity();
    for (double snr : {-10.0, 0.0, 10.0, 20.0, 30.0}) {
        const double e = mean_rms(snr, 100);
        CHECK(e <= prev);
        prev = e;
    }
}

TEST_CASE("determinism") {
    ChannelParams p;
    p.distance_m = 30.0;
    p.snr_db = 5.0;
    p.csi_error_variance = 0.1;
    Rng a = rng(11), b = rng(11);
    const auto v = gen::reals(a, 90);
    gen::reals(b, 90);
    CHECK(transmit(v, 3, p, a) == transmit(v, 3, p, b));
}

}  // TEST_SUITE
