// SPDX-License-Identifier: Apache-2.0
#include "coopsim/channel.hpp"

#include <cmath>

#include "coopsim/errors.hpp"

namespace coopsim::channel {

void ChannelParams::validate() const {
    if (!(p0 > 0.0)) throw DomainError("p0 must be positive");
    if (!(distance_m > 0.0)) throw DomainError("distance must be positive");
    if (!(path_loss_factor >= 0.0)) throw DomainError("path-loss factor must be non-negative");
    if (!(rician_k >= 0.0)) throw DomainError("Rician K must be non-negative");
    if (std::isnan(snr_db)) throw DomainError("SNR must be a number");
    if (!(csi_error_variance >= 0.0)) throw DomainError("CSI error variance must be non-negative");
    if (noise_reference == NoiseReference::BaselinePathLoss &&
        (!(baseline_distance_m > 0.0) || !(baseline_path_loss_factor >= 0.0)))
        throw DomainError("invalid path-loss baseline");
}

double path_loss_gain(double p0, double distance_m, double n) {
    if (!(p0 > 0.0)) throw DomainError("p0 must be positive");
    if (!(distance_m > 0.0)) throw DomainError("distance must be positive");
    if (!(n >= 0.0)) throw DomainError("path-loss factor must be non-negative");
    return std::sqrt(p0 / std::pow(distance_m, n));
}

cplx sample_rician(double rician_k, Rng& rng) {
    if (!(rician_k >= 0.0)) throw DomainError("Rician K must be non-negative");
    const double los = std::sqrt(rician_k / (rician_k + 1.0));
    return cplx{los, 0.0} + complex_normal(rng, 1.0 / (rician_k + 1.0));
}

Payload normalize_payload(std::span<const double> values, std::size_t axis_arity) {
    if (values.empty()) throw ShapeError("cannot normalize an empty payload");
    if (axis_arity == 0 || values.size() % axis_arity != 0)
        throw ShapeError("payload length is not a multiple of the axis arity");
    const std::size_t rows = values.size() / axis_arity;
    Payload p;
    p.axis_arity = axis_arity;
    p.axis_stats.resize(axis_arity);
    p.values.resize(values.size());
    for (std::size_t a = 0; a < axis_arity; ++a) {
        double mean = 0.0;
        for (std::size_t r = 0; r < rows; ++r) mean += values[r * axis_arity + a];
        mean /= static_cast<double>(rows);
        double var = 0.0;
        for (std::size_t r = 0; r < rows; ++r) {
            const double d = values[r * axis_arity + a] - mean;
            var += d * d;
        }
        var /= static_cast<double>(rows);
        double sd = std::sqrt(var);
        // constant axis: send zeros, restore the mean on receive
        if (!(sd > 0.0)) sd = 1.0;
        p.axis_stats[a] = {mean, sd};
        for (std::size_t r = 0; r < rows; ++r)
            p.values[r * axis_arity + a] = (values[r * axis_arity + a] - mean) / sd;
    }
    return p;
}

std::vector<double> denormalize_payload(const Payload& p) {
    if (p.axis_arity == 0 || p.axis_stats.size() != p.axis_arity ||
        p.values.size() % p.axis_arity != 0)
        throw ShapeError("malformed payload");
    std::vector<double> out(p.values.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const auto& st = p.axis_stats[i % p.axis_arity];
        out[i] = p.values[i] * st.std + st.mean;
    }
    return out;
}

PackedSignal pack_complex(std::span<const double> reals) {
    PackedSignal s;
    s.real_length = reals.size();
    s.samples.resize((reals.size() + 1) / 2);
    for (std::size_t i = 0; i < s.samples.size(); ++i) {
        const double re = reals[2 * i];
        const double im = 2 * i + 1 < reals.size() ? reals[2 * i + 1] : 0.0;
        s.samples[i] = {re, im};
    }
    return s;
}

std::vector<double> unpack_complex(const PackedSignal& s) {
    if (s.real_length > 2 * s.samples.size() || s.real_length + 1 < 2 * s.samples.size())
        throw ShapeError("packed signal length does not match its real length");
    std::vector<double> out(s.real_length);
    for (std::size_t i = 0; i < s.real_length; ++i)
        out[i] = (i % 2 == 0) ? s.samples[i / 2].real() : s.samples[i / 2].imag();
    return out;
}

double noise_variance_for_snr(double snr_db, double rx_signal_power) {
    if (!(rx_signal_power > 0.0)) throw DomainError("received signal power must be positive");
    return rx_signal_power / std::pow(10.0, snr_db / 10.0);
}

std::vector<cplx> apply_channel(std::span<const cplx> x, const ChannelRealization& r, Rng& rng) {
    std::vector<cplx> y(x.size());
    const cplx g = r.lambda * r.h;
    if (r.noise_variance > 0.0) {
        for (std::size_t i = 0; i < x.size(); ++i) y[i] = g * x[i] + complex_normal(rng, r.noise_variance);
    } else {
        for (std::size_t i = 0; i < x.size(); ++i) y[i] = g * x[i];
    }
    return y;
}

cplx perturb_csi(cplx h, double csi_error_variance, Rng& rng) {
    if (!(csi_error_variance >= 0.0)) throw DomainError("CSI error variance must be non-negative");
    if (csi_error_variance == 0.0) return h;
    return h + complex_normal(rng, csi_error_variance);
}

std::vector<cplx> zero_forcing(std::span<const cplx> y, double lambda, cplx h_est) {
    const cplx g = lambda * h_est;
    if (!(std::abs(g) >= 1e-12) || !(lambda > 0.0))
        throw EqualizationError("channel gain too small for zero-forcing");
    const cplx inv = 1.0 / g;
    std::vector<cplx> x(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) x[i] = y[i] * inv;
    return x;
}

ChannelRealization realize(const ChannelParams& params, std::span<const cplx> x, Rng& rng) {
    params.validate();
    ChannelRealization r;
    r.lambda = path_loss_gain(params.p0, params.distance_m, params.path_loss_factor);
    r.h = sample_rician(params.rician_k, rng);
    r.h_est = perturb_csi(r.h, params.csi_error_variance, rng);

    double tx_power = 0.0;
    for (const auto& s : x) tx_power += std::norm(s);
    tx_power = x.empty() ? 0.0 : tx_power / static_cast<double>(x.size());

    if (std::isinf(params.snr_db) && params.snr_db > 0.0) {
        r.noise_variance = 0.0;
    } else if (params.noise_reference == NoiseReference::ReceivedPower) {
        const double rx_power = r.lambda * r.lambda * std::norm(r.h) * tx_power;
        r.noise_variance = rx_power > 0.0 ? noise_variance_for_snr(params.snr_db, rx_power) : 0.0;
    } else {
        const double base = path_loss_gain(params.p0, params.baseline_distance_m,
                                           params.baseline_path_loss_factor);
        const double ref_power = base * base * tx_power;
        r.noise_variance = ref_power > 0.0 ? noise_variance_for_snr(params.snr_db, ref_power) : 0.0;
    }
    return r;
}

std::vector<double> transmit(std::span<const double> values, std::size_t axis_arity,
                             const ChannelParams& params, Rng& rng, LinkReport* report) {
    Payload sent = normalize_payload(values, axis_arity);
    const PackedSignal tx = pack_complex(sent.values);
    const ChannelRealization r = realize(params, tx.samples, rng);
    const auto y = apply_channel(tx.samples, r, rng);
    PackedSignal rx{zero_forcing(y, r.lambda, r.h_est), tx.real_length};

    Payload recovered;
    recovered.values = unpack_complex(rx);
    recovered.axis_stats = sent.axis_stats;
    recovered.axis_arity = sent.axis_arity;

    if (report) {
        double se = 0.0;
        for (std::size_t i = 0; i < sent.values.size(); ++i) {
            const double d = recovered.values[i] - sent.values[i];
            se += d * d;
        }
        report->realization = r;
        report->rms_error = std::sqrt(se / static_cast<double>(sent.values.size()));
        report->complex_samples = tx.samples.size();
    }
    return denormalize_payload(recovered);
}

}  // namespace coopsim::channel
