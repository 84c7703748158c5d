#include "oracles.hpp"

#include <trafficbench/error.hpp>
#include <trafficbench/imaging.hpp>
#include <trafficbench/random.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

using namespace trafficbench;

namespace {

int lit_pixels(const ImageTensor& img, int channel)
{
    int n = 0;
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            n += img.at(channel, y, x) > 0.0f ? 1 : 0;
        }
    }
    return n;
}

} // namespace

TEST(Gaf, IdentitiesOnRandomSeries)
{
    Rng rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        const auto n = static_cast<std::size_t>(2 + rng.below(60));
        std::vector<double> x(n);
        for (auto& v : x) {
            v = rng.uniform(-50.0, 50.0);
        }
        const auto g = gaf_matrix(x);
        const auto xt = oracle::rescale(x);
        const auto ours = gaf_rescale(x);
        ASSERT_EQ(g.n, n);
        for (std::size_t i = 0; i < n; ++i) {
            ASSERT_NEAR(ours[i], xt[i], 1e-12);
            ASSERT_NEAR(g(i, i), 2.0 * xt[i] * xt[i] - 1.0, 1e-12);
            for (std::size_t j = 0; j < n; ++j) {
                ASSERT_EQ(g(i, j), g(j, i));
                ASSERT_GE(g(i, j), -1.0);
                ASSERT_LE(g(i, j), 1.0);
                // Compared on the library's rescaled values: near +-1 an ulp of
                // rescaling error moves the entry by ~1e-8.
                ASSERT_NEAR(g(i, j), oracle::gaf_entry(ours[i], ours[j]), 1e-10);
            }
        }
        // Positive affine maps leave the field unchanged.
        std::vector<double> y(n);
        const double a = rng.uniform(0.1, 10.0);
        const double b = rng.uniform(-100.0, 100.0);
        for (std::size_t i = 0; i < n; ++i) {
            y[i] = a * x[i] + b;
        }
        const auto gy = gaf_matrix(y);
        for (std::size_t k = 0; k < n * n; ++k) {
            ASSERT_NEAR(gy.values[k], g.values[k], 1e-10);
        }
    }
}

TEST(Gaf, ConstantSeriesRescalesToZero)
{
    const std::vector<double> x(5, 3.0);
    for (double v : gaf_rescale(x)) {
        EXPECT_EQ(v, 0.0);
    }
    const auto g = gaf_matrix(x);
    for (double v : g.values) {
        EXPECT_NEAR(v, -1.0, 1e-15); // cos(pi/2 + pi/2)
    }
    EXPECT_THROW(gaf_matrix(std::vector<double>{1.0}), ContractError);
}

TEST(Gaf, ConfigValidation)
{
    GafConfig c;
    EXPECT_NO_THROW(c.validate());
    c.gaf_num = 3;
    EXPECT_THROW(c.validate(), ContractError);
    c.gaf_num = 4;
    c.granularities = {1, 5, 5, 60};
    EXPECT_THROW(c.validate(), ContractError);
    c.granularities = {1, 5};
    EXPECT_THROW(c.validate(), ContractError);
    c.gaf_num = 2;
    EXPECT_NO_THROW(c.validate());
    c.window_len = 1;
    EXPECT_THROW(c.validate(), ContractError);
}

TEST(Gaf, CompositeTilesFollowGranularities)
{
    RateTrace t;
    t.rates.resize(400);
    Rng rng(5);
    for (auto& v : t.rates) {
        v = rng.uniform(0.0, 10.0);
    }
    GafConfig cfg;
    cfg.gaf_num = 4;
    cfg.granularities = {1, 2, 4, 8};
    cfg.window_len = 16;
    const auto img = encode_gaf_composite(t, 200, cfg, 32);
    // Top-left tile: finest granularity, window starting at 200 - 8.
    const auto g = gaf_matrix(std::span<const double>(t.rates).subspan(192, 16));
    for (int y = 0; y < 16; ++y) {
        for (int x = 0; x < 16; ++x) {
            const float want = static_cast<float>((g(static_cast<std::size_t>(y), static_cast<std::size_t>(x)) + 1.0) / 2.0);
            ASSERT_NEAR(img.at(0, y, x), want, 1e-6);
            ASSERT_EQ(img.at(0, y, x), img.at(2, y, x));
        }
    }
    // Bottom-right tile: 8x granularity, mean-resampled.
    const RateTrace coarse = resample(t, 8);
    const auto g8 = gaf_matrix(std::span<const double>(coarse.rates).subspan(25 - 8, 16));
    EXPECT_NEAR(img.at(1, 16 + 3, 16 + 5), static_cast<float>((g8(3, 5) + 1.0) / 2.0), 1e-6);

    cfg.window_len = 64;
    EXPECT_THROW(encode_gaf_composite(t, 200, cfg, 32), ContractError); // 400 / 8 < 64
    cfg.window_len = 16;
    EXPECT_THROW(encode_gaf_composite(t, 200, cfg, 31), ContractError);
}

TEST(Gaf, WindowClampsAtTraceEdges)
{
    RateTrace t;
    for (int i = 0; i < 40; ++i) {
        t.rates.push_back(i % 7);
    }
    GafConfig cfg;
    cfg.gaf_num = 1;
    cfg.granularities = {1};
    cfg.window_len = 8;
    const auto at_start = encode_gaf_composite(t, 0, cfg, 8);
    const auto at_end = encode_gaf_composite(t, 39, cfg, 8);
    const auto g0 = gaf_matrix(std::span<const double>(t.rates).subspan(0, 8));
    const auto g1 = gaf_matrix(std::span<const double>(t.rates).subspan(32, 8));
    EXPECT_NEAR(at_start.at(0, 2, 3), (g0(2, 3) + 1.0) / 2.0, 1e-6);
    EXPECT_NEAR(at_end.at(0, 2, 3), (g1(2, 3) + 1.0) / 2.0, 1e-6);
}

TEST(LineChart, PixelPositions)
{
    EXPECT_EQ(rate_to_row(0.0, 10.0, 32), 31);
    EXPECT_EQ(rate_to_row(10.0, 10.0, 32), 0);
    EXPECT_EQ(rate_to_row(5.0, 10.0, 33), 16);
    EXPECT_EQ(sample_to_column(0, 5, 32), 0);
    EXPECT_EQ(sample_to_column(4, 5, 32), 31);
    EXPECT_EQ(sample_to_column(0, 1, 32), 15);

    const std::vector<double> in = {0, 0, 0, 0};
    const std::vector<double> out = {2, 2, 2, 2};
    const auto img = encode_line_chart({in, out}, 16);
    // Flat series draw horizontal lines: inbound on the bottom row, outbound on top.
    for (int x = 0; x < 16; ++x) {
        EXPECT_EQ(img.at(0, 15, x), 1.0f);
        EXPECT_EQ(img.at(2, 0, x), 1.0f);
    }
    EXPECT_EQ(lit_pixels(img, 0), 16);
    EXPECT_EQ(lit_pixels(img, 1), 0);
    EXPECT_EQ(lit_pixels(img, 2), 16);
}

TEST(LineChart, PolylineIsConnected)
{
    const std::vector<double> in = {0, 10, 0};
    const std::vector<double> out = {0, 0, 0};
    const auto img = encode_line_chart({in, out}, 21);
    // Every column has at least one lit inbound pixel.
    for (int x = 0; x < 21; ++x) {
        int lit = 0;
        for (int y = 0; y < 21; ++y) {
            lit += img.at(0, y, x) > 0.0f;
        }
        EXPECT_GE(lit, 1) << "column " << x;
    }
    EXPECT_EQ(img.at(0, 0, 10), 1.0f);
}

TEST(Scatter, OnePixelPerSample)
{
    const std::vector<double> in = {1, 2, 3, 4};
    const std::vector<double> out = {0, 0, 0, 0};
    const auto img = encode_scatter({in, out}, 16);
    EXPECT_EQ(lit_pixels(img, 0), 4);
    EXPECT_EQ(img.at(0, 0, 15), 1.0f);
    EXPECT_EQ(lit_pixels(img, 2), 4);
}

TEST(HeatMap, ColormapAndColumns)
{
    EXPECT_EQ(heat_colormap(0.0), (std::array<float, 3>{0, 0, 0}));
    EXPECT_EQ(heat_colormap(1.0), (std::array<float, 3>{1, 1, 1}));
    const auto mid = heat_colormap(0.5);
    EXPECT_FLOAT_EQ(mid[0], 1.0f);
    EXPECT_FLOAT_EQ(mid[1], 0.5f);
    EXPECT_FLOAT_EQ(mid[2], 0.0f);

    const std::vector<double> in = {0, 0, 4, 4};
    const std::vector<double> out = {0, 0, 0, 0};
    const auto img = encode_heat_map({in, out}, 4);
    for (int y = 0; y < 4; ++y) {
        EXPECT_EQ(img.at(0, y, 0), 0.0f);
        EXPECT_EQ(img.at(2, y, 3), 1.0f);
    }
    // Column bins cover the window without gaps.
    std::size_t next = 0;
    for (int j = 0; j < 7; ++j) {
        const auto [b, e] = column_bin(j, 20, 7);
        EXPECT_EQ(b, next);
        EXPECT_GT(e, b);
        next = e;
    }
    EXPECT_EQ(next, 20u);
}

TEST(Raster, P6RoundTrip)
{
    ImageTensor img(3, 2, Representation::HeatMap);
    for (std::size_t i = 0; i < img.pixels.size(); ++i) {
        img.pixels[i] = static_cast<float>(i) / 17.0f;
    }
    const auto bytes = encode_ppm(img);
    const std::string header(bytes.begin(), bytes.begin() + 11);
    EXPECT_EQ(header, "P6\n2 3\n255\n");
    EXPECT_EQ(bytes.size(), 11u + 18u);
    // Interleaved RGB: first pixel's green is channel 1 at (0, 0).
    EXPECT_EQ(bytes[12], static_cast<std::uint8_t>(std::lround(img.at(1, 0, 0) * 255.0f)));

    const auto path = std::filesystem::temp_directory_path() / "tb_raster_roundtrip.ppm";
    export_raster(img, path);
    const auto back = read_raster(path);
    ASSERT_EQ(back.height, 3);
    ASSERT_EQ(back.width, 2);
    for (std::size_t i = 0; i < img.pixels.size(); ++i) {
        EXPECT_NEAR(back.pixels[i], img.pixels[i], 0.5 / 255.0 + 1e-6);
    }
    EXPECT_EQ(encode_ppm(back), bytes);
    std::filesystem::remove(path);
    EXPECT_THROW(read_raster(path), IoError);
}

TEST(Representation, NamesRoundTrip)
{
    for (auto r : kAllRepresentations) {
        EXPECT_EQ(parse_representation(to_string(r)), r);
    }
    EXPECT_EQ(parse_representation("gaf"), Representation::GAF);
    EXPECT_THROW(parse_representation("pie"), ContractError);
}
