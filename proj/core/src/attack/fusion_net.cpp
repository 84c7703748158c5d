#include "trafficbench/attack/fusion_net.hpp"

#include "trafficbench/attack/classifier.hpp"
#include "trafficbench/error.hpp"
#include "trafficbench/random.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <thread>

namespace trafficbench {

static_assert(std::endian::native == std::endian::little, "parameter container assumes a little-endian host");

struct FusionNet::Layout {
    struct Encoder {
        std::size_t c1w, c1b, c2w, c2b;
    };
    std::vector<Encoder> enc;
    std::size_t att_w = 0, att_b = 0, w1 = 0, b1 = 0, w2 = 0, b2 = 0, total = 0;

    explicit Layout(const FusionArchitecture& a)
    {
        std::size_t at = 0;
        const auto C1 = static_cast<std::size_t>(a.conv1_channels);
        const auto C2 = static_cast<std::size_t>(a.conv2_channels);
        if (!a.linear_only) {
            for (std::size_t r = 0; r < a.representations.size(); ++r) {
                Encoder e{};
                e.c1w = at;
                at += C1 * static_cast<std::size_t>(a.input_channels()) * 9;
                e.c1b = at;
                at += C1;
                e.c2w = at;
                at += C2 * C1 * 9;
                e.c2b = at;
                at += C2;
                enc.push_back(e);
            }
        }
        const auto F = static_cast<std::size_t>(a.feature_dim());
        const auto R = a.representations.size();
        const auto H = static_cast<std::size_t>(a.hidden);
        const auto K = static_cast<std::size_t>(a.class_count);
        att_w = at;
        at += F;
        att_b = at;
        at += 1;
        w1 = at;
        at += H * R * F;
        b1 = at;
        at += H;
        w2 = at;
        at += K * H;
        b2 = at;
        at += K;
        total = at;
    }
};

namespace {

void init_block(std::vector<double>& p, std::size_t begin, std::size_t count, double fan_in, Rng& rng)
{
    const double bound = std::sqrt(3.0 / fan_in);
    for (std::size_t i = 0; i < count; ++i) {
        p[begin + i] = rng.uniform(-bound, bound);
    }
}

/// 3x3 convolution, stride 1, over a zero-padded input of (S+2)^2 per channel.
void conv3x3(const double* inpad, int cin, const double* w, const double* b, int cout, int S, double* out)
{
    const int P = S + 2;
    for (int oc = 0; oc < cout; ++oc) {
        double* o = out + static_cast<std::ptrdiff_t>(oc) * S * S;
        std::fill(o, o + S * S, b[oc]);
        for (int ic = 0; ic < cin; ++ic) {
            for (int ky = 0; ky < 3; ++ky) {
                for (int kx = 0; kx < 3; ++kx) {
                    const double wv = w[((oc * cin + ic) * 3 + ky) * 3 + kx];
                    const double* src = inpad + static_cast<std::ptrdiff_t>(ic) * P * P + ky * P + kx;
                    for (int y = 0; y < S; ++y) {
                        const double* s = src + y * P;
                        double* d = o + y * S;
                        for (int x = 0; x < S; ++x) {
                            d[x] += wv * s[x];
                        }
                    }
                }
            }
        }
    }
}

/// Weight, bias and (optionally) padded-input gradients of conv3x3.
void conv3x3_backward(const double* inpad,
                      int cin,
                      const double* w,
                      int cout,
                      int S,
                      const double* dout,
                      double* gw,
                      double* gb,
                      double* dinpad)
{
    const int P = S + 2;
    for (int oc = 0; oc < cout; ++oc) {
        const double* g = dout + static_cast<std::ptrdiff_t>(oc) * S * S;
        double sb = 0.0;
        for (int k = 0; k < S * S; ++k) {
            sb += g[k];
        }
        gb[oc] += sb;
        for (int ic = 0; ic < cin; ++ic) {
            for (int ky = 0; ky < 3; ++ky) {
                for (int kx = 0; kx < 3; ++kx) {
                    const int wi = ((oc * cin + ic) * 3 + ky) * 3 + kx;
                    const std::ptrdiff_t off = static_cast<std::ptrdiff_t>(ic) * P * P + ky * P + kx;
                    const double* src = inpad + off;
                    double acc = 0.0;
                    for (int y = 0; y < S; ++y) {
                        const double* s = src + y * P;
                        const double* gg = g + y * S;
                        for (int x = 0; x < S; ++x) {
                            acc += gg[x] * s[x];
                        }
                    }
                    gw[wi] += acc;
                    if (dinpad != nullptr) {
                        const double wv = w[wi];
                        double* dst = dinpad + off;
                        for (int y = 0; y < S; ++y) {
                            double* d = dst + y * P;
                            const double* gg = g + y * S;
                            for (int x = 0; x < S; ++x) {
                                d[x] += wv * gg[x];
                            }
                        }
                    }
                }
            }
        }
    }
}

void write_raw(std::ostream& out, const void* p, std::size_t n)
{
    out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

template <class T>
void put(std::ostream& out, T v)
{
    write_raw(out, &v, sizeof v);
}

template <class T>
T get(std::istream& in)
{
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (in.gcount() != static_cast<std::streamsize>(sizeof v)) {
        throw FormatError("fusion net container is truncated");
    }
    return v;
}

} // namespace

std::vector<double> softmax(std::span<const double> scores)
{
    std::vector<double> out(scores.size());
    if (scores.empty()) {
        return out;
    }
    const double mx = *std::max_element(scores.begin(), scores.end());
    double sum = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        out[i] = std::exp(scores[i] - mx);
        sum += out[i];
    }
    for (double& v : out) {
        v /= sum;
    }
    return out;
}

double smoothed_cross_entropy(std::span<const double> proba, int label, double eps)
{
    const double K = static_cast<double>(proba.size());
    double loss = 0.0;
    for (std::size_t k = 0; k < proba.size(); ++k) {
        const double q = (static_cast<int>(k) == label ? 1.0 - eps : 0.0) + eps / K;
        if (q > 0.0) {
            loss -= q * std::log(proba[k]);
        }
    }
    return loss;
}

double smoothed_entropy_floor(int class_count, double eps)
{
    const double K = class_count;
    const double on = 1.0 - eps + eps / K;
    const double off = eps / K;
    double h = -on * std::log(on);
    if (off > 0.0) {
        h -= (K - 1.0) * off * std::log(off);
    }
    return h;
}

FusionNet::FusionNet(FusionArchitecture arch, std::uint64_t seed) : arch_(std::move(arch)), seed_(seed)
{
    const Layout L(arch_);
    params_.assign(L.total, 0.0);
    masks_.assign(arch_.representations.size(), {1.0, 1.0, 1.0});
    Rng rng(seed);
    const double C1 = arch_.conv1_channels;
    const double Cin = arch_.input_channels();
    const double F = arch_.feature_dim();
    const double R = static_cast<double>(arch_.representations.size());
    for (const auto& e : L.enc) {
        init_block(params_, e.c1w, e.c1b - e.c1w, Cin * 9.0, rng);
        init_block(params_, e.c1b, e.c2w - e.c1b, Cin * 9.0, rng);
        init_block(params_, e.c2w, e.c2b - e.c2w, C1 * 9.0, rng);
        init_block(params_, e.c2b, static_cast<std::size_t>(arch_.conv2_channels), C1 * 9.0, rng);
    }
    init_block(params_, L.att_w, L.att_b - L.att_w + 1, F, rng);
    init_block(params_, L.w1, L.w2 - L.w1, R * F, rng);
    init_block(params_, L.w2, L.total - L.w2, arch_.hidden, rng);
}

std::size_t FusionNet::encoder_param_count() const
{
    return Layout(arch_).att_w;
}

std::pair<std::size_t, std::size_t> FusionNet::input_weight_range(std::size_t r) const
{
    if (arch_.linear_only) {
        throw ContractError("input_weight_range: a linear-only net has no convolution weights");
    }
    const Layout L(arch_);
    const auto& e = L.enc.at(r);
    return {e.c1w, e.c1b};
}

double FusionNet::sample_pass(const FusionDataset& data,
                              std::size_t i,
                              double label_smoothing,
                              std::vector<double>* grad,
                              std::vector<double>* proba_out,
                              std::vector<double>* alpha_out) const
{
    const Layout L(arch_);
    const double* p = params_.data();
    const int S = arch_.image_size;
    const int S2 = S / 2;
    const int C1 = arch_.conv1_channels;
    const int C2 = arch_.conv2_channels;
    const auto R = arch_.representations.size();
    const auto F = static_cast<std::size_t>(arch_.feature_dim());
    const auto H = static_cast<std::size_t>(arch_.hidden);
    const auto K = static_cast<std::size_t>(arch_.class_count);
    const bool conv = !arch_.linear_only;
    const int P1 = S + 2;
    const int P2 = S2 + 2;
    const int Cin = arch_.input_channels();

    // Per-representation activations kept for the backward pass.
    std::vector<std::vector<double>> x0pad(R), h1(R), p1pad(R), h2(R);
    std::vector<double> f(R * F, 0.0);
    for (std::size_t r = 0; r < R; ++r) {
        const ImageTensor& img = data.sets[r].images[i];
        const auto& mask = masks_[r];
        if (!conv) {
            for (int c = 0; c < 3; ++c) {
                double s = 0.0;
                for (int y = 0; y < S; ++y) {
                    for (int x = 0; x < S; ++x) {
                        s += img.at(c, y, x);
                    }
                }
                f[r * F + static_cast<std::size_t>(c)] = mask[static_cast<std::size_t>(c)] * s / (S * S);
            }
            continue;
        }
        const auto& e = L.enc[r];
        auto& xp = x0pad[r];
        xp.assign(static_cast<std::size_t>(Cin * P1 * P1), 0.0);
        for (int c = 0; c < 3; ++c) {
            for (int y = 0; y < S; ++y) {
                for (int x = 0; x < S; ++x) {
                    xp[static_cast<std::size_t>((c * P1 + y + 1) * P1 + x + 1)] =
                        mask[static_cast<std::size_t>(c)] * (2.0 * img.at(c, y, x) - 1.0);
                }
            }
        }
        if (arch_.coord_channels) {
            // Fixed column and row coordinates in [-1, 1].
            for (int y = 0; y < S; ++y) {
                for (int x = 0; x < S; ++x) {
                    xp[static_cast<std::size_t>((3 * P1 + y + 1) * P1 + x + 1)] = 2.0 * x / (S - 1) - 1.0;
                    xp[static_cast<std::size_t>((4 * P1 + y + 1) * P1 + x + 1)] = 2.0 * y / (S - 1) - 1.0;
                }
            }
        }
        auto& a1 = h1[r];
        a1.assign(static_cast<std::size_t>(C1 * S * S), 0.0);
        conv3x3(xp.data(), Cin, p + e.c1w, p + e.c1b, C1, S, a1.data());
        for (double& v : a1) {
            v = std::tanh(v);
        }
        auto& pp = p1pad[r];
        pp.assign(static_cast<std::size_t>(C1 * P2 * P2), 0.0);
        for (int c = 0; c < C1; ++c) {
            for (int y = 0; y < S2; ++y) {
                for (int x = 0; x < S2; ++x) {
                    const double* src = a1.data() + (c * S + 2 * y) * S + 2 * x;
                    pp[static_cast<std::size_t>((c * P2 + y + 1) * P2 + x + 1)] =
                        0.25 * (src[0] + src[1] + src[S] + src[S + 1]);
                }
            }
        }
        auto& a2 = h2[r];
        a2.assign(static_cast<std::size_t>(C2 * S2 * S2), 0.0);
        conv3x3(pp.data(), C1, p + e.c2w, p + e.c2b, C2, S2, a2.data());
        // The second 2x2 average pool followed by the global average equals the
        // global average of the tanh map, so the pool is folded in.
        for (int c = 0; c < C2; ++c) {
            double s = 0.0;
            for (int k = 0; k < S2 * S2; ++k) {
                double& v = a2[static_cast<std::size_t>(c * S2 * S2 + k)];
                v = std::tanh(v);
                s += v;
            }
            f[r * F + static_cast<std::size_t>(c)] = s / (S2 * S2);
        }
    }

    std::vector<double> scores(R);
    for (std::size_t r = 0; r < R; ++r) {
        double s = p[L.att_b];
        for (std::size_t j = 0; j < F; ++j) {
            s += p[L.att_w + j] * f[r * F + j];
        }
        scores[r] = s;
    }
    const std::vector<double> alpha = softmax(scores);
    std::vector<double> z(R * F);
    for (std::size_t r = 0; r < R; ++r) {
        for (std::size_t j = 0; j < F; ++j) {
            z[r * F + j] = alpha[r] * f[r * F + j];
        }
    }
    const std::size_t Z = R * F;
    std::vector<double> h(H);
    for (std::size_t u = 0; u < H; ++u) {
        double s = p[L.b1 + u];
        const double* w = p + L.w1 + u * Z;
        for (std::size_t j = 0; j < Z; ++j) {
            s += w[j] * z[j];
        }
        h[u] = conv ? std::tanh(s) : s;
    }
    std::vector<double> logits(K);
    for (std::size_t k = 0; k < K; ++k) {
        double s = p[L.b2 + k];
        const double* w = p + L.w2 + k * H;
        for (std::size_t u = 0; u < H; ++u) {
            s += w[u] * h[u];
        }
        logits[k] = s;
    }
    const std::vector<double> proba = softmax(logits);
    const int label = data.labels.empty() ? -1 : data.labels[i];
    const double loss = label >= 0 ? smoothed_cross_entropy(proba, label, label_smoothing) : 0.0;
    if (proba_out != nullptr) {
        *proba_out = proba;
    }
    if (alpha_out != nullptr) {
        *alpha_out = alpha;
    }
    if (grad == nullptr) {
        return loss;
    }

    double* g = grad->data();
    std::vector<double> dlogit(K);
    for (std::size_t k = 0; k < K; ++k) {
        const double q = (static_cast<int>(k) == label ? 1.0 - label_smoothing : 0.0) +
                         label_smoothing / static_cast<double>(K);
        dlogit[k] = proba[k] - q;
    }
    std::vector<double> dh(H, 0.0);
    for (std::size_t k = 0; k < K; ++k) {
        g[L.b2 + k] += dlogit[k];
        const double* w = p + L.w2 + k * H;
        double* gw = g + L.w2 + k * H;
        for (std::size_t u = 0; u < H; ++u) {
            gw[u] += dlogit[k] * h[u];
            dh[u] += w[u] * dlogit[k];
        }
    }
    std::vector<double> dz(Z, 0.0);
    for (std::size_t u = 0; u < H; ++u) {
        const double du = conv ? dh[u] * (1.0 - h[u] * h[u]) : dh[u];
        g[L.b1 + u] += du;
        const double* w = p + L.w1 + u * Z;
        double* gw = g + L.w1 + u * Z;
        for (std::size_t j = 0; j < Z; ++j) {
            gw[j] += du * z[j];
            dz[j] += w[j] * du;
        }
    }
    std::vector<double> dalpha(R, 0.0);
    std::vector<double> df(Z, 0.0);
    for (std::size_t r = 0; r < R; ++r) {
        for (std::size_t j = 0; j < F; ++j) {
            dalpha[r] += dz[r * F + j] * f[r * F + j];
            df[r * F + j] = alpha[r] * dz[r * F + j];
        }
    }
    double mix = 0.0;
    for (std::size_t r = 0; r < R; ++r) {
        mix += alpha[r] * dalpha[r];
    }
    for (std::size_t r = 0; r < R; ++r) {
        const double ds = alpha[r] * (dalpha[r] - mix);
        g[L.att_b] += ds;
        for (std::size_t j = 0; j < F; ++j) {
            g[L.att_w + j] += ds * f[r * F + j];
            df[r * F + j] += ds * p[L.att_w + j];
        }
    }
    if (!conv) {
        return loss;
    }

    std::vector<double> da2(static_cast<std::size_t>(C2 * S2 * S2));
    std::vector<double> dp1pad(static_cast<std::size_t>(C1 * P2 * P2));
    std::vector<double> da1(static_cast<std::size_t>(C1 * S * S));
    for (std::size_t r = 0; r < R; ++r) {
        const auto& e = L.enc[r];
        const auto& a2 = h2[r];
        for (int c = 0; c < C2; ++c) {
            const double gc = df[r * F + static_cast<std::size_t>(c)] / (S2 * S2);
            for (int k = 0; k < S2 * S2; ++k) {
                const double v = a2[static_cast<std::size_t>(c * S2 * S2 + k)];
                da2[static_cast<std::size_t>(c * S2 * S2 + k)] = gc * (1.0 - v * v);
            }
        }
        std::fill(dp1pad.begin(), dp1pad.end(), 0.0);
        conv3x3_backward(p1pad[r].data(), C1, p + e.c2w, C2, S2, da2.data(), g + e.c2w, g + e.c2b, dp1pad.data());
        const auto& a1 = h1[r];
        for (int c = 0; c < C1; ++c) {
            for (int y = 0; y < S; ++y) {
                for (int x = 0; x < S; ++x) {
                    const double up = 0.25 * dp1pad[static_cast<std::size_t>((c * P2 + y / 2 + 1) * P2 + x / 2 + 1)];
                    const double v = a1[static_cast<std::size_t>((c * S + y) * S + x)];
                    da1[static_cast<std::size_t>((c * S + y) * S + x)] = up * (1.0 - v * v);
                }
            }
        }
        conv3x3_backward(x0pad[r].data(), Cin, p + e.c1w, C1, S, da1.data(), g + e.c1w, g + e.c1b, nullptr);
    }
    return loss;
}

std::vector<double> FusionNet::forward(const FusionDataset& data, std::size_t i) const
{
    std::vector<double> proba;
    sample_pass(data, i, 0.0, nullptr, &proba, nullptr);
    return proba;
}

std::vector<double> FusionNet::attention(const FusionDataset& data, std::size_t i) const
{
    std::vector<double> alpha;
    sample_pass(data, i, 0.0, nullptr, nullptr, &alpha);
    return alpha;
}

Eigen::MatrixXd FusionNet::predict_proba(const FusionDataset& data) const
{
    const std::size_t n = data.sets.empty() ? 0 : data.sets.front().images.size();
    Eigen::MatrixXd out(static_cast<Eigen::Index>(n), arch_.class_count);
    for (std::size_t i = 0; i < n; ++i) {
        const auto p = forward(data, i);
        for (std::size_t k = 0; k < p.size(); ++k) {
            out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = p[k];
        }
    }
    return out;
}

double FusionNet::loss_and_gradient(const FusionDataset& data,
                                    std::span<const std::size_t> rows,
                                    double label_smoothing,
                                    std::vector<double>* grad,
                                    int jobs) const
{
    if (rows.empty()) {
        throw ContractError("loss_and_gradient: empty batch");
    }
    const double scale = 1.0 / static_cast<double>(rows.size());
    const std::size_t shards = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(jobs, 1)), 1, rows.size());
    std::vector<double> shard_loss(shards, 0.0);
    std::vector<std::vector<double>> shard_grad(grad != nullptr ? shards : 0,
                                                std::vector<double>(params_.size(), 0.0));
    auto run = [&](std::size_t s) {
        const std::size_t begin = rows.size() * s / shards;
        const std::size_t end = rows.size() * (s + 1) / shards;
        for (std::size_t b = begin; b < end; ++b) {
            shard_loss[s] += sample_pass(data, rows[b], label_smoothing, grad != nullptr ? &shard_grad[s] : nullptr,
                                         nullptr, nullptr);
        }
    };
    if (shards == 1) {
        run(0);
    } else {
        std::vector<std::thread> workers;
        for (std::size_t s = 0; s < shards; ++s) {
            workers.emplace_back(run, s);
        }
        for (auto& w : workers) {
            w.join();
        }
    }
    double loss = 0.0;
    for (std::size_t s = 0; s < shards; ++s) {
        loss += shard_loss[s];
        if (grad != nullptr) {
            for (std::size_t j = 0; j < params_.size(); ++j) {
                (*grad)[j] += shard_grad[s][j] * scale;
            }
        }
    }
    return loss * scale;
}

std::uint64_t FusionNet::checksum() const noexcept
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    const auto* bytes = reinterpret_cast<const unsigned char*>(params_.data());
    for (std::size_t i = 0; i < params_.size() * sizeof(double); ++i) {
        h ^= bytes[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

FusionNet build_fusion_net(const std::vector<Representation>& representations,
                           int class_count,
                           int image_size,
                           std::uint64_t seed,
                           bool linear_only)
{
    if (representations.empty() || representations.size() > kAllRepresentations.size()) {
        throw ContractError("build_fusion_net: select 1 to 4 representations");
    }
    for (std::size_t i = 0; i < representations.size(); ++i) {
        for (std::size_t j = 0; j < i; ++j) {
            if (representations[i] == representations[j]) {
                throw ContractError("build_fusion_net: representation '" + to_string(representations[i]) +
                                    "' listed twice");
            }
        }
    }
    if (class_count < 2) {
        throw ContractError("build_fusion_net: need at least 2 classes");
    }
    if (image_size < 4 || image_size % 4 != 0) {
        throw ContractError("build_fusion_net: image size must be a positive multiple of 4, got " +
                            std::to_string(image_size));
    }
    FusionArchitecture arch;
    arch.representations = representations;
    arch.class_count = class_count;
    arch.image_size = image_size;
    arch.linear_only = linear_only;
    return FusionNet(arch, seed);
}

void check_alignment(const FusionNet& net, const FusionDataset& data)
{
    const auto& arch = net.architecture();
    if (data.sets.size() != arch.representations.size()) {
        throw ContractError("fusion data has " + std::to_string(data.sets.size()) + " image sets, the net expects " +
                            std::to_string(arch.representations.size()));
    }
    for (std::size_t r = 0; r < data.sets.size(); ++r) {
        const auto& set = data.sets[r];
        if (set.representation != arch.representations[r]) {
            throw ContractError("image set " + std::to_string(r) + " is '" + to_string(set.representation) +
                                "', expected '" + to_string(arch.representations[r]) + "'");
        }
        if (set.images.size() != data.labels.size() || set.window_ids.size() != data.labels.size()) {
            throw ContractError("image set '" + to_string(set.representation) + "' has " +
                                std::to_string(set.images.size()) + " images for " +
                                std::to_string(data.labels.size()) + " labels");
        }
    }
    for (std::size_t i = 0; i < data.labels.size(); ++i) {
        for (std::size_t r = 1; r < data.sets.size(); ++r) {
            if (data.sets[r].window_ids[i] != data.sets[0].window_ids[i]) {
                throw ContractError("misaligned image sets at window " + std::to_string(i) + ": '" +
                                    to_string(data.sets[0].representation) + "' has window id " +
                                    std::to_string(data.sets[0].window_ids[i]) + ", '" +
                                    to_string(data.sets[r].representation) + "' has " +
                                    std::to_string(data.sets[r].window_ids[i]));
            }
        }
        for (const auto& set : data.sets) {
            const auto& img = set.images[i];
            if (img.height != arch.image_size || img.width != arch.image_size) {
                throw ContractError("window " + std::to_string(i) + ": image is " + std::to_string(img.width) + "x" +
                                    std::to_string(img.height) + ", the net expects " +
                                    std::to_string(arch.image_size));
            }
        }
        if (data.labels[i] < 0 || data.labels[i] >= arch.class_count) {
            throw ContractError("window " + std::to_string(i) + ": label " + std::to_string(data.labels[i]) +
                                " outside the class range");
        }
    }
}

TrainReport train_fusion(FusionNet& net,
                         const FusionDataset& train,
                         const FusionHyper& hyper,
                         std::uint64_t seed,
                         const FusionDataset* validation)
{
    check_alignment(net, train);
    if (validation != nullptr) {
        check_alignment(net, *validation);
    }
    if (train.size() == 0) {
        throw ContractError("train_fusion: empty training set");
    }
    if (hyper.batch < 1 || hyper.epochs < 0 || hyper.lr < 0.0 || hyper.encoder_lr_scale < 0.0) {
        throw ContractError("train_fusion: invalid hyperparameters");
    }
    const auto t0 = std::chrono::steady_clock::now();
    TrainReport report;
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    report.initial_loss = net.loss_and_gradient(train, order, hyper.label_smoothing, nullptr, hyper.jobs);

    Rng rng(seed);
    auto& params = net.params();
    std::vector<double> grad(params.size());
    const std::size_t n_enc = net.encoder_param_count();
    const double enc_lr = hyper.lr * hyper.encoder_lr_scale;
    const double decay = 1.0 - hyper.lr * hyper.weight_decay;
    const double enc_decay = 1.0 - enc_lr * hyper.weight_decay;
    for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
        rng.shuffle(std::span<std::size_t>(order));
        double epoch_loss = 0.0;
        for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(hyper.batch)) {
            const std::size_t e = std::min(order.size(), b + static_cast<std::size_t>(hyper.batch));
            const std::span<const std::size_t> rows(order.data() + b, e - b);
            std::fill(grad.begin(), grad.end(), 0.0);
            epoch_loss += net.loss_and_gradient(train, rows, hyper.label_smoothing, &grad, hyper.jobs) *
                          static_cast<double>(rows.size());
            if (hyper.lr == 0.0) {
                continue;
            }
            for (std::size_t j = 0; j < n_enc; ++j) {
                params[j] = params[j] * enc_decay - enc_lr * grad[j];
            }
            for (std::size_t j = n_enc; j < params.size(); ++j) {
                params[j] = params[j] * decay - hyper.lr * grad[j];
            }
        }
        report.epoch_loss.push_back(epoch_loss / static_cast<double>(order.size()));
        if (validation != nullptr && validation->size() > 0) {
            const auto top = rank_classes(net.predict_proba(*validation), 1);
            std::size_t hit = 0;
            for (std::size_t i = 0; i < top.size(); ++i) {
                hit += top[i][0] == validation->labels[i] ? 1 : 0;
            }
            report.validation_top1.push_back(static_cast<double>(hit) / static_cast<double>(top.size()));
        }
    }
    report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report.checksum = net.checksum();
    return report;
}

GradientCheckResult gradient_check(const FusionNet& net,
                                   const FusionDataset& batch,
                                   double epsilon,
                                   std::uint64_t seed,
                                   std::size_t n_params,
                                   double label_smoothing)
{
    check_alignment(net, batch);
    if (batch.size() == 0) {
        throw ContractError("gradient_check: empty batch");
    }
    if (!(epsilon >= 1e-6 && epsilon <= 1e-3)) {
        throw ContractError("gradient_check: epsilon must lie in [1e-6, 1e-3]");
    }
    std::vector<std::size_t> rows(batch.size());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    std::vector<double> analytic(net.param_count(), 0.0);
    net.loss_and_gradient(batch, rows, label_smoothing, &analytic);

    std::vector<std::size_t> pick(net.param_count());
    std::iota(pick.begin(), pick.end(), std::size_t{0});
    Rng rng(seed);
    rng.shuffle(std::span<std::size_t>(pick));
    pick.resize(std::min(n_params, pick.size()));

    FusionNet probe = net;
    GradientCheckResult result;
    for (std::size_t j : pick) {
        const double orig = probe.params()[j];
        probe.params()[j] = orig + epsilon;
        const double up = probe.loss_and_gradient(batch, rows, label_smoothing, nullptr);
        probe.params()[j] = orig - epsilon;
        const double down = probe.loss_and_gradient(batch, rows, label_smoothing, nullptr);
        probe.params()[j] = orig;
        const double numeric = (up - down) / (2.0 * epsilon);
        const double a = analytic[j];
        const double scale = std::max(std::abs(a), std::abs(numeric));
        if (scale < kGradientFloor) {
            ++result.skipped;
            continue;
        }
        ++result.checked;
        result.max_relative_error = std::max(result.max_relative_error, std::abs(a - numeric) / scale);
    }
    return result;
}

void save_fusion_net(const FusionNet& net, std::ostream& out)
{
    const auto& a = net.architecture();
    write_raw(out, "TBFN", 4);
    put<std::uint32_t>(out, kFusionFormatVersion);
    put<std::uint64_t>(out, net.seed());
    put<std::uint32_t>(out, static_cast<std::uint32_t>(a.representations.size()));
    for (auto r : a.representations) {
        put<std::uint8_t>(out, static_cast<std::uint8_t>(r));
    }
    put<std::int32_t>(out, a.class_count);
    put<std::int32_t>(out, a.image_size);
    put<std::int32_t>(out, a.conv1_channels);
    put<std::int32_t>(out, a.conv2_channels);
    put<std::int32_t>(out, a.hidden);
    put<std::uint8_t>(out, a.linear_only ? 1 : 0);
    put<std::uint8_t>(out, a.coord_channels ? 1 : 0);
    for (const auto& m : net.channel_masks()) {
        write_raw(out, m.data(), sizeof(double) * 3);
    }
    put<std::uint64_t>(out, net.param_count());
    write_raw(out, net.params().data(), net.param_count() * sizeof(double));
    if (!out) {
        throw IoError("<stream>", "failed writing fusion net");
    }
}

void save_fusion_net(const FusionNet& net, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError(path.string(), "cannot open for writing");
    }
    save_fusion_net(net, out);
}

FusionNet load_fusion_net(std::istream& in)
{
    char magic[4] = {};
    in.read(magic, 4);
    if (in.gcount() != 4 || std::memcmp(magic, "TBFN", 4) != 0) {
        throw FormatError("not a fusion net container (bad magic)");
    }
    const auto version = get<std::uint32_t>(in);
    if (version != kFusionFormatVersion) {
        throw FormatError("fusion net container version " + std::to_string(version) + " is not supported (expected " +
                          std::to_string(kFusionFormatVersion) + ")");
    }
    const auto seed = get<std::uint64_t>(in);
    FusionArchitecture a;
    const auto R = get<std::uint32_t>(in);
    if (R == 0 || R > kAllRepresentations.size()) {
        throw FormatError("fusion net container has an invalid representation count");
    }
    for (std::uint32_t r = 0; r < R; ++r) {
        const auto v = get<std::uint8_t>(in);
        if (v >= kAllRepresentations.size()) {
            throw FormatError("fusion net container has an unknown representation");
        }
        a.representations.push_back(static_cast<Representation>(v));
    }
    a.class_count = get<std::int32_t>(in);
    a.image_size = get<std::int32_t>(in);
    a.conv1_channels = get<std::int32_t>(in);
    a.conv2_channels = get<std::int32_t>(in);
    a.hidden = get<std::int32_t>(in);
    a.linear_only = get<std::uint8_t>(in) != 0;
    a.coord_channels = get<std::uint8_t>(in) != 0;
    if (a.class_count < 2 || a.image_size < 4 || a.conv1_channels < 1 || a.conv2_channels < 1 || a.hidden < 1) {
        throw FormatError("fusion net container has an invalid architecture descriptor");
    }
    FusionNet net(a, seed);
    for (auto& m : net.channel_masks()) {
        for (double& v : m) {
            v = get<double>(in);
        }
    }
    const auto count = get<std::uint64_t>(in);
    if (count != net.param_count()) {
        throw FormatError("fusion net container holds " + std::to_string(count) + " parameters, the descriptor implies " +
                          std::to_string(net.param_count()));
    }
    for (double& v : net.params()) {
        v = get<double>(in);
    }
    return net;
}

FusionNet load_fusion_net(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError(path.string(), "cannot open for reading");
    }
    return load_fusion_net(in);
}

} // namespace trafficbench
