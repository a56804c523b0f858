// SPDX-License-Identifier: Apache-2.0
#include "coopsim/codec.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <string>

#include "coopsim/errors.hpp"

namespace coopsim::codec {

namespace {

// A convolution viewed as a map from `cin` channels to `cout` channels; weights
// are [cout][cin][k][k]. A transposed convolution reuses the same geometry with
// the roles of input and output swapped.
struct ConvGeom {
    int cout, cin, k, s, p;
};

// Valid output column range for kernel column kx: 0 <= o*s + kx - p < in_w.
inline void out_range(int in_w, int out_w, int kx, const ConvGeom& g, int& lo, int& hi) {
    lo = std::max(0, (g.p - kx + g.s - 1) / g.s);
    if (g.p - kx < 0) lo = 0;
    hi = std::min(out_w - 1, (in_w - 1 + g.p - kx) / g.s);
    if (in_w - 1 + g.p - kx < 0) hi = -1;
}

// out[co][o] += sum_ci sum_k w * in[ci][o*s + k - p]
void correlate(const double* in, int in_h, int in_w, const double* w, const ConvGeom& g, double* out,
               int out_h, int out_w) {
    const std::size_t in_plane = static_cast<std::size_t>(in_h) * in_w;
    const std::size_t out_plane = static_cast<std::size_t>(out_h) * out_w;
    for (int co = 0; co < g.cout; ++co) {
        double* o = out + co * out_plane;
        for (int ci = 0; ci < g.cin; ++ci) {
            const double* x = in + ci * in_plane;
            const double* wk = w + (static_cast<std::size_t>(co) * g.cin + ci) * g.k * g.k;
            for (int ky = 0; ky < g.k; ++ky)
                for (int oy = 0; oy < out_h; ++oy) {
                    const int iy = oy * g.s + ky - g.p;
                    if (iy < 0 || iy >= in_h) continue;
                    const double* xr = x + static_cast<std::size_t>(iy) * in_w;
                    double* orow = o + static_cast<std::size_t>(oy) * out_w;
                    for (int kx = 0; kx < g.k; ++kx) {
                        const double wv = wk[ky * g.k + kx];
                        int lo, hi;
                        out_range(in_w, out_w, kx, g, lo, hi);
                        const double* xs = xr + kx - g.p;
                        for (int ox = lo; ox <= hi; ++ox) orow[ox] += wv * xs[ox * g.s];
                    }
                }
        }
    }
}

// Adjoint of correlate with respect to its input: in_grad[ci][o*s+k-p] += w * g[co][o]
void correlate_adjoint(const double* gout, int out_h, int out_w, const double* w, const ConvGeom& g,
                       double* gin, int in_h, int in_w) {
    const std::size_t in_plane = static_cast<std::size_t>(in_h) * in_w;
    const std::size_t out_plane = static_cast<std::size_t>(out_h) * out_w;
    for (int co = 0; co < g.cout; ++co) {
        const double* go = gout + co * out_plane;
        for (int ci = 0; ci < g.cin; ++ci) {
            double* gi = gin + ci * in_plane;
            const double* wk = w + (static_cast<std::size_t>(co) * g.cin + ci) * g.k * g.k;
            for (int ky = 0; ky < g.k; ++ky)
                for (int oy = 0; oy < out_h; ++oy) {
                    const int iy = oy * g.s + ky - g.p;
                    if (iy < 0 || iy >= in_h) continue;
                    double* gr = gi + static_cast<std::size_t>(iy) * in_w;
                    const double* grow = go + static_cast<std::size_t>(oy) * out_w;
                    for (int kx = 0; kx < g.k; ++kx) {
                        const double wv = wk[ky * g.k + kx];
                        int lo, hi;
                        out_range(in_w, out_w, kx, g, lo, hi);
                        double* gs = gr + kx - g.p;
                        for (int ox = lo; ox <= hi; ++ox) gs[ox * g.s] += wv * grow[ox];
                    }
                }
        }
    }
}

// Weight gradient of correlate: gw[co][ci][k] += sum_o g[co][o] * in[ci][o*s+k-p]
void correlate_weight_grad(const double* in, int in_h, int in_w, const double* gout, int out_h, int out_w,
                           const ConvGeom& g, double* gw) {
    const std::size_t in_plane = static_cast<std::size_t>(in_h) * in_w;
    const std::size_t out_plane = static_cast<std::size_t>(out_h) * out_w;
    for (int co = 0; co < g.cout; ++co) {
        const double* go = gout + co * out_plane;
        for (int ci = 0; ci < g.cin; ++ci) {
            const double* x = in + ci * in_plane;
            double* gk = gw + (static_cast<std::size_t>(co) * g.cin + ci) * g.k * g.k;
            for (int ky = 0; ky < g.k; ++ky)
                for (int oy = 0; oy < out_h; ++oy) {
                    const int iy = oy * g.s + ky - g.p;
                    if (iy < 0 || iy >= in_h) continue;
                    const double* xr = x + static_cast<std::size_t>(iy) * in_w;
                    const double* grow = go + static_cast<std::size_t>(oy) * out_w;
                    for (int kx = 0; kx < g.k; ++kx) {
                        int lo, hi;
                        out_range(in_w, out_w, kx, g, lo, hi);
                        const double* xs = xr + kx - g.p;
                        double acc = 0.0;
                        for (int ox = lo; ox <= hi; ++ox) acc += grow[ox] * xs[ox * g.s];
                        gk[ky * g.k + kx] += acc;
                    }
                }
        }
    }
}

ConvGeom conv_geom(const ConvLayer& L) { return {L.out_channels, L.in_channels, L.kernel, L.stride, L.pad}; }
// transposed conv: its output plays the role of the correlation input
ConvGeom deconv_geom(const ConvLayer& L) { return {L.in_channels, L.out_channels, L.kernel, L.stride, L.pad}; }

Tensor conv_forward(const Tensor& x, const ConvLayer& L, int out_h, int out_w) {
    Tensor y(L.out_channels, out_h, out_w);
    const std::size_t plane = static_cast<std::size_t>(out_h) * out_w;
    for (int c = 0; c < L.out_channels; ++c)
        std::fill_n(y.values.begin() + c * plane, plane, L.bias[c]);
    correlate(x.values.data(), x.height, x.width, L.weight.data(), conv_geom(L), y.values.data(), out_h, out_w);
    return y;
}

Tensor deconv_forward(const Tensor& x, const ConvLayer& L, int out_h, int out_w) {
    Tensor y(L.out_channels, out_h, out_w);
    const std::size_t plane = static_cast<std::size_t>(out_h) * out_w;
    for (int c = 0; c < L.out_channels; ++c)
        std::fill_n(y.values.begin() + c * plane, plane, L.bias[c]);
    correlate_adjoint(x.values.data(), x.height, x.width, L.weight.data(), deconv_geom(L), y.values.data(),
                      out_h, out_w);
    return y;
}

void leaky_inplace(Tensor& t, double slope) {
    for (double& v : t.values)
        if (v < 0.0) v *= slope;
}

// grad through leaky given the pre-activation
void leaky_backward(Tensor& grad, const Tensor& pre, double slope) {
    for (std::size_t i = 0; i < grad.values.size(); ++i)
        if (pre.values[i] < 0.0) grad.values[i] *= slope;
}

void bias_grad(const Tensor& g, std::vector<double>& gb) {
    const std::size_t plane = static_cast<std::size_t>(g.height) * g.width;
    for (int c = 0; c < g.channels; ++c) {
        double s = 0.0;
        for (std::size_t i = 0; i < plane; ++i) s += g.values[c * plane + i];
        gb[c] += s;
    }
}

ConvLayer make_layer(int in, int out, int k, int s, int p, bool transposed, Rng& rng) {
    ConvLayer L{in, out, k, s, p, {}, {}};
    L.weight.resize(static_cast<std::size_t>(in) * out * k * k);
    L.bias.assign(static_cast<std::size_t>(out), 0.0);
    const double fan_in = (transposed ? out : in) * k * k;
    const double fan_out = (transposed ? in : out) * k * k;
    const double a = std::sqrt(6.0 / (fan_in + fan_out));
    for (double& w : L.weight) w = a * (2.0 * (static_cast<double>(rng() >> 11) * 0x1.0p-53) - 1.0);
    return L;
}

struct Activations {
    Tensor a1, z1, latent, d1, u1, out;
};

Activations forward(const AEParams& p, const Tensor& x, const Tensor* noise) {
    const AEConfig& c = p.config;
    const int h1 = c.height / c.stride1, w1 = c.width / c.stride1;
    Activations a;
    a.a1 = conv_forward(x, p.enc1, h1, w1);
    a.z1 = a.a1;
    leaky_inplace(a.z1, c.leaky_slope);
    a.latent = conv_forward(a.z1, p.enc2, c.latent_height(), c.latent_width());
    Tensor zin = a.latent;
    if (noise)
        for (std::size_t i = 0; i < zin.values.size(); ++i) zin.values[i] += noise->values[i];
    a.d1 = deconv_forward(zin, p.dec1, h1, w1);
    a.u1 = a.d1;
    leaky_inplace(a.u1, c.leaky_slope);
    a.out = deconv_forward(a.u1, p.dec2, c.height, c.width);
    return a;
}

void check_input(const Tensor& f, const AEConfig& c) {
    if (f.channels != c.channels || f.height != c.height || f.width != c.width ||
        f.values.size() != c.input_elements())
        throw ShapeError("feature map shape does not match the autoencoder configuration");
}

void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 4);
}
void put_u64(std::ostream& os, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
}
void put_f64(std::ostream& os, double v) { put_u64(os, std::bit_cast<std::uint64_t>(v)); }

std::uint64_t get_u64(std::istream& is, int bytes = 8) {
    unsigned char b[8] = {};
    if (!is.read(reinterpret_cast<char*>(b), bytes)) throw IoError("truncated parameter file");
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}
double get_f64(std::istream& is) { return std::bit_cast<double>(get_u64(is)); }

constexpr char kMagic[8] = {'C', 'S', 'A', 'E', '0', '0', '0', '1'};

}  // namespace

void AEConfig::validate() const {
    if (channels <= 0 || height <= 0 || width <= 0) throw ShapeError("autoencoder shape must be positive");
    if (stride1 <= 0 || stride2 <= 0 || kernel <= 0) throw DomainError("strides and kernel must be positive");
    if (height % (stride1 * stride2) != 0 || width % (stride1 * stride2) != 0)
        throw ShapeError("strides must divide the feature map dimensions");
    if (!(leaky_slope >= 0.0)) throw DomainError("leaky slope must be non-negative");
}

AEParams AEParams::init(const AEConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Rng rng(derive_seed({seed, static_cast<std::uint64_t>(StreamPurpose::CodecInit)}));
    AEParams p;
    p.config = cfg;
    p.seed = seed;
    const int C = cfg.channels, L = cfg.latent_channels();
    const int k1 = cfg.kernel_for(cfg.stride1), p1 = cfg.pad_for(cfg.stride1);
    const int k2 = cfg.kernel_for(cfg.stride2), p2 = cfg.pad_for(cfg.stride2);
    p.enc1 = make_layer(C, C, k1, cfg.stride1, p1, false, rng);
    p.enc2 = make_layer(C, L, k2, cfg.stride2, p2, false, rng);
    p.dec1 = make_layer(L, C, k2, cfg.stride2, p2, true, rng);
    p.dec2 = make_layer(C, C, k1, cfg.stride1, p1, true, rng);
    return p;
}

std::vector<std::vector<double>*> AEParams::tensors() {
    return {&enc1.weight, &enc1.bias, &enc2.weight, &enc2.bias, &dec1.weight, &dec1.bias, &dec2.weight, &dec2.bias};
}

std::vector<const std::vector<double>*> AEParams::tensors() const {
    return {&enc1.weight, &enc1.bias, &enc2.weight, &enc2.bias, &dec1.weight, &dec1.bias, &dec2.weight, &dec2.bias};
}

std::size_t AEParams::parameter_count() const noexcept {
    std::size_t n = 0;
    for (const auto* t : tensors()) n += t->size();
    return n;
}

Tensor ae_encode(const Tensor& f, const AEParams& p) {
    check_input(f, p.config);
    const AEConfig& c = p.config;
    Tensor a1 = conv_forward(f, p.enc1, c.height / c.stride1, c.width / c.stride1);
    leaky_inplace(a1, c.leaky_slope);
    return conv_forward(a1, p.enc2, c.latent_height(), c.latent_width());
}

Tensor ae_decode(const Tensor& z, const AEParams& p) {
    const AEConfig& c = p.config;
    if (z.channels != c.latent_channels() || z.height != c.latent_height() || z.width != c.latent_width() ||
        z.values.size() != c.latent_elements())
        throw ShapeError("latent shape does not match the autoencoder configuration");
    Tensor d1 = deconv_forward(z, p.dec1, c.height / c.stride1, c.width / c.stride1);
    leaky_inplace(d1, c.leaky_slope);
    return deconv_forward(d1, p.dec2, c.height, c.width);
}

double ae_loss(const Tensor& f, const Tensor& recon) {
    if (!f.same_shape(recon) || f.values.size() != recon.values.size())
        throw ShapeError("loss operands differ in shape");
    if (f.values.empty()) return 0.0;
    double s = 0.0;
    for (std::size_t i = 0; i < f.values.size(); ++i) {
        const double d = recon.values[i] - f.values[i];
        s += d * d;
    }
    return s / static_cast<double>(f.values.size());
}

AEGradients ae_gradients(const AEParams& p, std::span<const Tensor> batch, std::span<const Tensor> latent_noise,
                         double* loss) {
    if (batch.empty()) throw ShapeError("empty batch");
    if (!latent_noise.empty() && latent_noise.size() != batch.size())
        throw ShapeError("latent noise must match the batch size");
    const AEConfig& c = p.config;
    AEGradients g;
    for (const auto* t : p.tensors()) g.tensors.emplace_back(t->size(), 0.0);
    auto& g_enc1w = g.tensors[0];
    auto& g_enc1b = g.tensors[1];
    auto& g_enc2w = g.tensors[2];
    auto& g_enc2b = g.tensors[3];
    auto& g_dec1w = g.tensors[4];
    auto& g_dec1b = g.tensors[5];
    auto& g_dec2w = g.tensors[6];
    auto& g_dec2b = g.tensors[7];

    double total = 0.0;
    const double scale = 2.0 / (static_cast<double>(c.input_elements()) * static_cast<double>(batch.size()));
    for (std::size_t b = 0; b < batch.size(); ++b) {
        const Tensor& x = batch[b];
        check_input(x, c);
        const Tensor* noise = latent_noise.empty() ? nullptr : &latent_noise[b];
        Activations a = forward(p, x, noise);
        total += ae_loss(x, a.out);

        Tensor g_out(c.channels, c.height, c.width);
        for (std::size_t i = 0; i < g_out.values.size(); ++i)
            g_out.values[i] = scale * (a.out.values[i] - x.values[i]);

        // dec2: out = deconv(u1)
        bias_grad(g_out, g_dec2b);
        correlate_weight_grad(g_out.values.data(), c.height, c.width, a.u1.values.data(), a.u1.height,
                              a.u1.width, deconv_geom(p.dec2), g_dec2w.data());
        Tensor g_u1(a.u1.channels, a.u1.height, a.u1.width);
        correlate(g_out.values.data(), c.height, c.width, p.dec2.weight.data(), deconv_geom(p.dec2),
                  g_u1.values.data(), g_u1.height, g_u1.width);
        leaky_backward(g_u1, a.d1, c.leaky_slope);

        // dec1: d1 = deconv(latent + noise)
        bias_grad(g_u1, g_dec1b);
        Tensor zin = a.latent;
        if (noise)
            for (std::size_t i = 0; i < zin.values.size(); ++i) zin.values[i] += noise->values[i];
        correlate_weight_grad(g_u1.values.data(), g_u1.height, g_u1.width, zin.values.data(), zin.height,
                              zin.width, deconv_geom(p.dec1), g_dec1w.data());
        Tensor g_lat(a.latent.channels, a.latent.height, a.latent.width);
        correlate(g_u1.values.data(), g_u1.height, g_u1.width, p.dec1.weight.data(), deconv_geom(p.dec1),
                  g_lat.values.data(), g_lat.height, g_lat.width);

        // enc2: latent = conv(z1)
        bias_grad(g_lat, g_enc2b);
        correlate_weight_grad(a.z1.values.data(), a.z1.height, a.z1.width, g_lat.values.data(), g_lat.height,
                              g_lat.width, conv_geom(p.enc2), g_enc2w.data());
        Tensor g_z1(a.z1.channels, a.z1.height, a.z1.width);
        correlate_adjoint(g_lat.values.data(), g_lat.height, g_lat.width, p.enc2.weight.data(), conv_geom(p.enc2),
                          g_z1.values.data(), g_z1.height, g_z1.width);
        leaky_backward(g_z1, a.a1, c.leaky_slope);

        // enc1: a1 = conv(x)
        bias_grad(g_z1, g_enc1b);
        correlate_weight_grad(x.values.data(), x.height, x.width, g_z1.values.data(), g_z1.height, g_z1.width,
                              conv_geom(p.enc1), g_enc1w.data());
    }
    if (loss) *loss = total / static_cast<double>(batch.size());
    return g;
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0) || epochs <= 0 || batch_size <= 0)
        throw DomainError("learning rate, epochs and batch size must be positive");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) || !(epsilon > 0.0))
        throw DomainError("invalid optimizer moments");
    if (channel_in_loop) channel_in_loop->validate();
}

std::vector<double> interleave(const Tensor& t) {
    std::vector<double> v(t.values.size());
    const std::size_t plane = static_cast<std::size_t>(t.height) * t.width;
    for (int c = 0; c < t.channels; ++c)
        for (std::size_t i = 0; i < plane; ++i) v[i * t.channels + c] = t.values[c * plane + i];
    return v;
}

Tensor deinterleave(std::span<const double> v, int channels, int height, int width) {
    Tensor t(channels, height, width);
    if (v.size() != t.values.size()) throw ShapeError("interleaved length does not match the tensor shape");
    const std::size_t plane = static_cast<std::size_t>(height) * width;
    for (int c = 0; c < channels; ++c)
        for (std::size_t i = 0; i < plane; ++i) t.values[c * plane + i] = v[i * channels + c];
    return t;
}

Tensor transmit_latent(const Tensor& z, const channel::ChannelParams& params, Rng& rng,
                       channel::LinkReport* report) {
    const auto sent = interleave(z);
    const auto got = channel::transmit(sent, static_cast<std::size_t>(z.channels), params, rng, report);
    return deinterleave(got, z.channels, z.height, z.width);
}

AEParams ae_train(std::span<const Tensor> dataset, const AEConfig& cfg, const TrainConfig& tc, Rng& rng,
                  TrainReport* report) {
    if (dataset.empty()) throw ShapeError("training needs at least one feature map");
    tc.validate();
    for (const auto& f : dataset) check_input(f, cfg);

    AEParams p = AEParams::init(cfg, rng());
    auto params = p.tensors();
    std::vector<std::vector<double>> m, v;
    for (const auto* t : params) {
        m.emplace_back(t->size(), 0.0);
        v.emplace_back(t->size(), 0.0);
    }

    const auto dataset_loss = [&]() {
        double s = 0.0;
        for (const auto& f : dataset) s += ae_loss(f, ae_decode(ae_encode(f, p), p));
        return s / static_cast<double>(dataset.size());
    };
    if (report) {
        report->initial_loss = dataset_loss();
        report->epoch_loss.clear();
    }

    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), 0);
    long step = 0;
    for (int epoch = 0; epoch < tc.epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
        double epoch_sum = 0.0;
        int batches = 0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(tc.batch_size)) {
            const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(tc.batch_size));
            std::vector<Tensor> batch;
            std::vector<Tensor> noise;
            for (std::size_t i = start; i < end; ++i) {
                batch.push_back(dataset[order[i]]);
                if (tc.channel_in_loop) {
                    // the link perturbation is computed on the current latent and held fixed
                    const Tensor z = ae_encode(batch.back(), p);
                    Tensor zr = transmit_latent(z, *tc.channel_in_loop, rng);
                    for (std::size_t j = 0; j < zr.values.size(); ++j) zr.values[j] -= z.values[j];
                    noise.push_back(std::move(zr));
                }
            }
            double loss = 0.0;
            AEGradients g = ae_gradients(p, batch, noise, &loss);
            if (!std::isfinite(loss)) throw TrainingError("training diverged", epoch + 1);
            ++step;
            const double bc1 = 1.0 - std::pow(tc.beta1, static_cast<double>(step));
            const double bc2 = 1.0 - std::pow(tc.beta2, static_cast<double>(step));
            for (std::size_t t = 0; t < params.size(); ++t) {
                auto& w = *params[t];
                for (std::size_t i = 0; i < w.size(); ++i) {
                    const double gi = g.tensors[t][i];
                    m[t][i] = tc.beta1 * m[t][i] + (1.0 - tc.beta1) * gi;
                    v[t][i] = tc.beta2 * v[t][i] + (1.0 - tc.beta2) * gi * gi;
                    w[i] -= tc.learning_rate * (m[t][i] / bc1) / (std::sqrt(v[t][i] / bc2) + tc.epsilon);
                }
            }
            epoch_sum += loss;
            ++batches;
        }
        const double mean = epoch_sum / batches;
        if (!std::isfinite(mean)) throw TrainingError("training diverged", epoch + 1);
        if (report) report->epoch_loss.push_back(mean);
    }
    return p;
}

Tensor to_tensor(const perception::FeatureMapBEV& f) {
    Tensor t(f.channels, f.height, f.width);
    if (f.values.size() != t.values.size()) throw ShapeError("inconsistent BEV map");
    t.values = f.values;
    return t;
}

perception::FeatureMapBEV to_bev(const Tensor& t, const perception::FeatureMapBEV& like) {
    perception::FeatureMapBEV f = like;
    if (t.channels != like.channels || t.height != like.height || t.width != like.width)
        throw ShapeError("tensor does not match the BEV map shape");
    f.values = t.values;
    return f;
}

Tensor to_tensor(const perception::FeatureMap3D& f) {
    Tensor t(f.channels * f.depth, f.height, f.width);
    if (f.values.size() != t.values.size()) throw ShapeError("inconsistent 3D map");
    t.values = f.values;  // [c][d] is already contiguous as a stacked channel index
    return t;
}

perception::FeatureMap3D to_3d(const Tensor& t, const perception::FeatureMap3D& like) {
    if (t.channels != like.channels * like.depth || t.height != like.height || t.width != like.width)
        throw ShapeError("tensor does not match the 3D map shape");
    perception::FeatureMap3D f = like;
    f.values = t.values;
    return f;
}

void write_params(std::ostream& os, const AEParams& p) {
    os.write(kMagic, sizeof kMagic);
    const AEConfig& c = p.config;
    for (int v : {c.channels, c.height, c.width, c.stride1, c.stride2, c.kernel})
        put_u32(os, static_cast<std::uint32_t>(v));
    put_f64(os, c.leaky_slope);
    put_u64(os, p.seed);
    put_u64(os, p.parameter_count());
    for (const auto* t : p.tensors())
        for (double v : *t) put_f64(os, v);
}

AEParams read_params(std::istream& is) {
    char magic[8];
    if (!is.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) throw IoError("not a coopsim codec file");
    AEConfig c;
    int* fields[] = {&c.channels, &c.height, &c.width, &c.stride1, &c.stride2, &c.kernel};
    for (int* f : fields) *f = static_cast<int>(get_u64(is, 4));
    c.leaky_slope = get_f64(is);
    const std::uint64_t seed = get_u64(is);
    const std::uint64_t count = get_u64(is);
    try {
        c.validate();
    } catch (const std::exception& e) {
        throw IoError(std::string("invalid codec header: ") + e.what());
    }
    AEParams p = AEParams::init(c, seed);
    if (count != p.parameter_count()) throw IoError("codec parameter count does not match its header");
    for (auto* t : p.tensors())
        for (double& v : *t) v = get_f64(is);
    if (is.peek() != std::char_traits<char>::eof()) throw IoError("trailing bytes in codec file");
    return p;
}

void save_params(const std::filesystem::path& path, const AEParams& p) {
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary);
        if (!os) throw IoError("cannot write " + path.string());
        write_params(os, p);
        if (!os) throw IoError("write failed for " + path.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot move " + tmp + " into place: " + ec.message());
}

AEParams load_params(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open codec parameters " + path.string());
    return read_params(is);
}

}  // namespace coopsim::codec
