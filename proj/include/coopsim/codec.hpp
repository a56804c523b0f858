// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "coopsim/channel.hpp"
#include "coopsim/perception.hpp"
#include "coopsim/random.hpp"

namespace coopsim::codec {

/// Dense C x H x W tensor, channel-major.
struct Tensor {
    int channels = 0, height = 0, width = 0;
    std::vector<double> values;

    Tensor() = default;
    Tensor(int c, int h, int w) : channels(c), height(h), width(w), values(static_cast<std::size_t>(c) * h * w, 0.0) {}
    std::size_t size() const noexcept { return values.size(); }
    double& at(int c, int h, int w) { return values[(static_cast<std::size_t>(c) * height + h) * width + w]; }
    double at(int c, int h, int w) const { return values[(static_cast<std::size_t>(c) * height + h) * width + w]; }
    bool same_shape(const Tensor& o) const noexcept {
        return channels == o.channels && height == o.height && width == o.width;
    }
};

/// Two strided encoder stages and their mirrored transposed-convolution
/// decoder. Latent channels equal input channels, so the element compression
/// ratio is (stride1 * stride2)^2.
struct AEConfig {
    int channels = 5;
    int height = 64;
    int width = 64;
    int stride1 = 4;
    int stride2 = 2;
    /// Nominal kernel size. A stage whose stride exceeds it uses kernel = stride,
    /// otherwise some input cells would never reach the latent.
    int kernel = 3;
    double leaky_slope = 0.01;

    int kernel_for(int stride) const noexcept { return kernel >= stride ? kernel : stride; }
    int pad_for(int stride) const noexcept { return (kernel_for(stride) - stride + 1) / 2; }
    int latent_channels() const noexcept { return channels; }
    int latent_height() const noexcept { return height / (stride1 * stride2); }
    int latent_width() const noexcept { return width / (stride1 * stride2); }
    std::size_t input_elements() const noexcept { return static_cast<std::size_t>(channels) * height * width; }
    std::size_t latent_elements() const noexcept {
        return static_cast<std::size_t>(latent_channels()) * latent_height() * latent_width();
    }
    void validate() const;
    friend bool operator==(const AEConfig&, const AEConfig&) = default;
};

struct ConvLayer {
    int in_channels = 0, out_channels = 0, kernel = 0, stride = 1, pad = 0;
    /// Convolution: [out][in][k][k]. Transposed convolution: [in][out][k][k].
    std::vector<double> weight;
    std::vector<double> bias;
};

struct AEParams {
    AEConfig config;
    std::uint64_t seed = 0;
    ConvLayer enc1, enc2, dec1, dec2;

    /// Glorot-uniform weights, zero biases.
    static AEParams init(const AEConfig& cfg, std::uint64_t seed);
    std::size_t parameter_count() const noexcept;
    /// Parameter vectors in serialization order.
    std::vector<std::vector<double>*> tensors();
    std::vector<const std::vector<double>*> tensors() const;
};

/// Gradient buffers shaped like AEParams::tensors().
struct AEGradients {
    std::vector<std::vector<double>> tensors;
};

Tensor ae_encode(const Tensor& f, const AEParams& p);
Tensor ae_decode(const Tensor& z, const AEParams& p);
double ae_loss(const Tensor& f, const Tensor& recon);

/// Exact gradients of the batch-mean reconstruction MSE. When `latent_noise`
/// is given, entry i is added to the latent of batch[i] before decoding and
/// treated as a constant.
AEGradients ae_gradients(const AEParams& p, std::span<const Tensor> batch,
                         std::span<const Tensor> latent_noise = {}, double* loss = nullptr);

struct TrainConfig {
    double learning_rate = 0.002;
    int epochs = 60;
    int batch_size = 2;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    /// When set, latents pass through this link on every training step.
    std::optional<channel::ChannelParams> channel_in_loop;
    void validate() const;
};

struct TrainReport {
    double initial_loss = 0.0;
    /// Mean training loss of each epoch's minibatches.
    std::vector<double> epoch_loss;
};

AEParams ae_train(std::span<const Tensor> dataset, const AEConfig& cfg, const TrainConfig& tc, Rng& rng,
                  TrainReport* report = nullptr);

/// Sends a latent over the link with per-channel normalization.
Tensor transmit_latent(const Tensor& z, const channel::ChannelParams& params, Rng& rng,
                       channel::LinkReport* report = nullptr);

/// BEV map as a tensor and back (georeference taken from `like`).
Tensor to_tensor(const perception::FeatureMapBEV& f);
perception::FeatureMapBEV to_bev(const Tensor& t, const perception::FeatureMapBEV& like);
/// 3D map with its height axis folded into channels: (C*D) x H x W.
Tensor to_tensor(const perception::FeatureMap3D& f);
perception::FeatureMap3D to_3d(const Tensor& t, const perception::FeatureMap3D& like);

/// Channel-interleaved (H, W, C) flattening used for per-channel normalization.
std::vector<double> interleave(const Tensor& t);
Tensor deinterleave(std::span<const double> v, int channels, int height, int width);

/// Binary layout: "CSAE0001", u32 channels/height/width/stride1/stride2/kernel,
/// f64 leaky slope, u64 seed, u64 parameter count, then little-endian f64 values
/// of enc1.weight, enc1.bias, enc2.weight, enc2.bias, dec1.weight, dec1.bias,
/// dec2.weight, dec2.bias.
void write_params(std::ostream& os, const AEParams& p);
AEParams read_params(std::istream& is);
void save_params(const std::filesystem::path& path, const AEParams& p);
AEParams load_params(const std::filesystem::path& path);

}  // namespace coopsim::codec
