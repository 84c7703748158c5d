#pragma once

#include "trafficbench/ingest.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace trafficbench {

enum class Representation { LineChart, HeatMap, ScatterPlot, GAF };

inline constexpr std::array<Representation, 4> kAllRepresentations = {
    Representation::LineChart, Representation::HeatMap, Representation::ScatterPlot, Representation::GAF};

std::string to_string(Representation r);
/// Accepts "line", "heat", "scatter", "gaf" and the enum spellings.
Representation parse_representation(const std::string& text);

inline constexpr int kDefaultImageSize = 224;

/// Channel-major (C x H x W) raster with values in [0, 1].
struct ImageTensor {
    int height = 0;
    int width = 0;
    static constexpr int channels = 3;
    Representation representation = Representation::LineChart;
    std::vector<float> pixels;

    ImageTensor() = default;
    ImageTensor(int h, int w, Representation r)
        : height(h), width(w), representation(r), pixels(static_cast<std::size_t>(3 * h * w), 0.0f)
    {
    }

    float& at(int c, int y, int x) { return pixels[static_cast<std::size_t>((c * height + y) * width + x)]; }
    float at(int c, int y, int x) const { return pixels[static_cast<std::size_t>((c * height + y) * width + x)]; }

    bool operator==(const ImageTensor& o) const
    {
        return height == o.height && width == o.width && representation == o.representation && pixels == o.pixels;
    }
};

/// A window of inbound and outbound rates over the same samples.
struct RateWindow {
    std::span<const double> in;
    std::span<const double> out;
};

/// Pixel row for a rate, given the y-axis top. Shared by the line chart and
/// scatter encoders: row = (size-1) - round(v / top * (size-1)).
int rate_to_row(double v, double top, int size);
/// Pixel column for sample i of an n-sample window: round(i*(size-1)/(n-1)).
int sample_to_column(std::size_t i, std::size_t n, int size);
/// y-axis top: max over both series, or 1 when the window is all zero.
double window_top(const RateWindow& window);

/// Polylines without anti-aliasing: inbound on channel 0, outbound on channel 2.
ImageTensor encode_line_chart(const RateWindow& window, int size);

/// Heat-map colormap: t in [0,1] -> (min(1,3t), clamp(3t-1), clamp(3t-2)).
std::array<float, 3> heat_colormap(double t);

/// Full-height columns; column j shows the mean total (in+out) rate of its
/// time bin, normalized by the largest bin mean, through heat_colormap.
ImageTensor encode_heat_map(const RateWindow& window, int size);

/// Bin [begin, end) of column j for an n-sample window.
std::pair<std::size_t, std::size_t> column_bin(int column, std::size_t n, int size);

/// One pixel per sample: inbound on channel 0, outbound on channel 2.
ImageTensor encode_scatter(const RateWindow& window, int size);

/// Square row-major matrix.
struct GafMatrix {
    std::size_t n = 0;
    std::vector<double> values;

    double operator()(std::size_t i, std::size_t j) const { return values[i * n + j]; }
};

/// Min-max rescale to [-1, 1]; a constant series maps to all zeros.
std::vector<double> gaf_rescale(std::span<const double> series);

/// Gramian angular summation field: G_ij = cos(phi_i + phi_j), phi = arccos(x~).
GafMatrix gaf_matrix(std::span<const double> series);

enum class GafVariant { Summation };

struct GafConfig {
    int gaf_num = 4;
    std::vector<int> granularities = {1, 5, 15, 60}; ///< multipliers of the trace granularity
    GafVariant variant = GafVariant::Summation;
    int window_len = 60;                             ///< samples per GAF series at each granularity

    void validate() const;
};

/// Multi-granularity GAF composite around `center`: one GAF per configured
/// multiplier over window_len resampled samples, tiled fine-to-coarse
/// row-major (1 tile: full image; 2: left/right halves; 4: 2x2 quadrants).
/// Pixel = (G + 1) / 2 on all channels.
ImageTensor encode_gaf_composite(const RateTrace& trace, std::size_t center, const GafConfig& cfg, int size);

/// Nearest-neighbor rendering of a GAF matrix into a tile region.
void render_gaf_tile(const GafMatrix& g, ImageTensor& img, int top, int left, int tile_h, int tile_w);

/// Binary PPM (P6, maxval 255, row-major RGB).
void export_raster(const ImageTensor& img, const std::filesystem::path& path);
std::vector<std::uint8_t> encode_ppm(const ImageTensor& img);
ImageTensor read_raster(const std::filesystem::path& path);

} // namespace trafficbench
