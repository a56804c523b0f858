// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <complex>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "coopsim/random.hpp"

namespace coopsim::channel {

using cplx = std::complex<double>;

/// How the noise variance of a link is fixed.
enum class NoiseReference {
    /// sigma_w^2 = measured received signal power / linear SNR.
    ReceivedPower,
    /// sigma_w^2 fixed from a baseline link (baseline distance and path-loss
    /// factor, unit fading power) so path loss degrades the effective SNR.
    BaselinePathLoss,
};

struct ChannelParams {
    double p0 = 1.0;
    double distance_m = 1.0;
    double path_loss_factor = 2.0;
    double rician_k = 1.0;
    /// +inf disables noise.
    double snr_db = std::numeric_limits<double>::infinity();
    double csi_error_variance = 0.0;
    NoiseReference noise_reference = NoiseReference::ReceivedPower;
    double baseline_distance_m = 20.0;
    double baseline_path_loss_factor = 2.0;

    /// Throws DomainError on any out-of-range field.
    void validate() const;
};

/// One block-fading draw of a CAV-to-ego link.
struct ChannelRealization {
    cplx h{1.0, 0.0};
    cplx h_est{1.0, 0.0};
    double lambda = 1.0;
    double noise_variance = 0.0;
};

/// Per-axis normalized real payload.
struct Payload {
    struct AxisStats {
        double mean = 0.0;
        double std = 1.0;
    };
    std::vector<double> values;
    std::vector<AxisStats> axis_stats;
    std::size_t axis_arity = 1;
};

/// Interleaved I/Q samples together with the real length they encode.
struct PackedSignal {
    std::vector<cplx> samples;
    std::size_t real_length = 0;
};

double path_loss_gain(double p0, double distance_m, double n);

/// h = sqrt(K/(K+1)) + CN(0, 1/(K+1)).
cplx sample_rician(double rician_k, Rng& rng);

Payload normalize_payload(std::span<const double> values, std::size_t axis_arity);
std::vector<double> denormalize_payload(const Payload& p);

PackedSignal pack_complex(std::span<const double> reals);
std::vector<double> unpack_complex(const PackedSignal& s);

double noise_variance_for_snr(double snr_db, double rx_signal_power);

/// y_i = lambda * h * x_i + w_i.
std::vector<cplx> apply_channel(std::span<const cplx> x, const ChannelRealization& r, Rng& rng);

cplx perturb_csi(cplx h, double csi_error_variance, Rng& rng);

/// x_i = y_i / (lambda * h_est). Throws EqualizationError when the gain is below 1e-12.
std::vector<cplx> zero_forcing(std::span<const cplx> y, double lambda, cplx h_est);

/// Draws fading, CSI and the noise level for a signal `x` about to be sent.
ChannelRealization realize(const ChannelParams& params, std::span<const cplx> x, Rng& rng);

struct LinkReport {
    ChannelRealization realization;
    /// RMS of (recovered - sent) in normalized payload units.
    double rms_error = 0.0;
    std::size_t complex_samples = 0;
};

/// normalize -> pack -> y = lambda h x + w -> zero-forcing -> unpack -> denormalize.
std::vector<double> transmit(std::span<const double> values, std::size_t axis_arity,
                             const ChannelParams& params, Rng& rng, LinkReport* report = nullptr);

}  // namespace coopsim::channel
