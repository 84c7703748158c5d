#include "trafficbench/imaging.hpp"

#include "trafficbench/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace trafficbench {

std::string to_string(Representation r)
{
    switch (r) {
    case Representation::LineChart:
        return "line";
    case Representation::HeatMap:
        return "heat";
    case Representation::ScatterPlot:
        return "scatter";
    case Representation::GAF:
        return "gaf";
    }
    return "unknown";
}

Representation parse_representation(const std::string& text)
{
    std::string s = text;
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (s == "line" || s == "linechart" || s == "line_chart") {
        return Representation::LineChart;
    }
    if (s == "heat" || s == "heatmap" || s == "heat_map") {
        return Representation::HeatMap;
    }
    if (s == "scatter" || s == "scatterplot" || s == "scatter_plot") {
        return Representation::ScatterPlot;
    }
    if (s == "gaf") {
        return Representation::GAF;
    }
    throw ContractError("unknown image representation '" + text + "'");
}

namespace {

void require_window(const RateWindow& w)
{
    if (w.in.empty() || w.in.size() != w.out.size()) {
        throw ContractError("image window must be non-empty with equal in/out lengths");
    }
}

void require_size(int size)
{
    if (size < 2) {
        throw ContractError("image size must be at least 2");
    }
}

void draw_line(ImageTensor& img, int channel, int x0, int y0, int x1, int y1)
{
    const int dx = std::abs(x1 - x0);
    const int dy = -std::abs(y1 - y0);
    const int sx = x0 < x1 ? 1 : -1;
    const int sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    while (true) {
        img.at(channel, y0, x0) = 1.0f;
        if (x0 == x1 && y0 == y1) {
            break;
        }
        const int e2 = 2 * err;
        if (e2 >= dy) {
            err += dy;
            x0 += sx;
        }
        if (e2 <= dx) {
            err += dx;
            y0 += sy;
        }
    }
}

} // namespace

int rate_to_row(double v, double top, int size)
{
    const double frac = std::clamp(v / top, 0.0, 1.0);
    return (size - 1) - static_cast<int>(std::lround(frac * (size - 1)));
}

int sample_to_column(std::size_t i, std::size_t n, int size)
{
    if (n <= 1) {
        return (size - 1) / 2;
    }
    return static_cast<int>(std::lround(static_cast<double>(i) * (size - 1) / static_cast<double>(n - 1)));
}

double window_top(const RateWindow& window)
{
    double top = 0.0;
    for (double v : window.in) {
        top = std::max(top, v);
    }
    for (double v : window.out) {
        top = std::max(top, v);
    }
    return top > 0.0 ? top : 1.0;
}

ImageTensor encode_line_chart(const RateWindow& window, int size)
{
    require_window(window);
    require_size(size);
    ImageTensor img(size, size, Representation::LineChart);
    const double top = window_top(window);
    const std::size_t n = window.in.size();
    const std::pair<int, std::span<const double>> series[] = {{0, window.in}, {2, window.out}};
    for (const auto& [channel, values] : series) {
        int px = sample_to_column(0, n, size);
        int py = rate_to_row(values[0], top, size);
        img.at(channel, py, px) = 1.0f;
        for (std::size_t i = 1; i < n; ++i) {
            const int x = sample_to_column(i, n, size);
            const int y = rate_to_row(values[i], top, size);
            draw_line(img, channel, px, py, x, y);
            px = x;
            py = y;
        }
    }
    return img;
}

std::array<float, 3> heat_colormap(double t)
{
    t = std::clamp(t, 0.0, 1.0);
    return {static_cast<float>(std::clamp(3.0 * t, 0.0, 1.0)), static_cast<float>(std::clamp(3.0 * t - 1.0, 0.0, 1.0)),
            static_cast<float>(std::clamp(3.0 * t - 2.0, 0.0, 1.0))};
}

std::pair<std::size_t, std::size_t> column_bin(int column, std::size_t n, int size)
{
    const auto s = static_cast<std::size_t>(size);
    const auto j = static_cast<std::size_t>(column);
    const std::size_t begin = std::min(n - 1, j * n / s);
    const std::size_t end = std::min(n, std::max(begin + 1, (j + 1) * n / s));
    return {begin, end};
}

ImageTensor encode_heat_map(const RateWindow& window, int size)
{
    require_window(window);
    require_size(size);
    ImageTensor img(size, size, Representation::HeatMap);
    const std::size_t n = window.in.size();
    std::vector<double> means(static_cast<std::size_t>(size));
    double top = 0.0;
    for (int j = 0; j < size; ++j) {
        const auto [b, e] = column_bin(j, n, size);
        double s = 0.0;
        for (std::size_t i = b; i < e; ++i) {
            s += window.in[i] + window.out[i];
        }
        means[static_cast<std::size_t>(j)] = s / static_cast<double>(e - b);
        top = std::max(top, means[static_cast<std::size_t>(j)]);
    }
    for (int j = 0; j < size; ++j) {
        const double t = top > 0.0 ? means[static_cast<std::size_t>(j)] / top : 0.0;
        const auto rgb = heat_colormap(t);
        for (int c = 0; c < 3; ++c) {
            for (int y = 0; y < size; ++y) {
                img.at(c, y, j) = rgb[static_cast<std::size_t>(c)];
            }
        }
    }
    return img;
}

ImageTensor encode_scatter(const RateWindow& window, int size)
{
    require_window(window);
    require_size(size);
    ImageTensor img(size, size, Representation::ScatterPlot);
    const double top = window_top(window);
    const std::size_t n = window.in.size();
    for (std::size_t i = 0; i < n; ++i) {
        const int x = sample_to_column(i, n, size);
        img.at(0, rate_to_row(window.in[i], top, size), x) = 1.0f;
        img.at(2, rate_to_row(window.out[i], top, size), x) = 1.0f;
    }
    return img;
}

// ---------------------------------------------------------------------------

std::vector<double> gaf_rescale(std::span<const double> series)
{
    const auto [lo_it, hi_it] = std::minmax_element(series.begin(), series.end());
    const double lo = *lo_it;
    const double hi = *hi_it;
    std::vector<double> out(series.size(), 0.0);
    if (!(hi > lo)) {
        return out;
    }
    const double span = hi - lo;
    for (std::size_t i = 0; i < series.size(); ++i) {
        out[i] = std::clamp(((series[i] - hi) + (series[i] - lo)) / span, -1.0, 1.0);
    }
    return out;
}

GafMatrix gaf_matrix(std::span<const double> series)
{
    if (series.size() < 2) {
        throw ContractError("gaf_matrix: series needs at least 2 samples");
    }
    const auto scaled = gaf_rescale(series);
    std::vector<double> phi(scaled.size());
    for (std::size_t i = 0; i < scaled.size(); ++i) {
        phi[i] = std::acos(scaled[i]);
    }
    GafMatrix g;
    g.n = series.size();
    g.values.resize(g.n * g.n);
    for (std::size_t i = 0; i < g.n; ++i) {
        for (std::size_t j = 0; j < g.n; ++j) {
            g.values[i * g.n + j] = std::cos(phi[i] + phi[j]);
        }
    }
    return g;
}

void GafConfig::validate() const
{
    if (gaf_num != 1 && gaf_num != 2 && gaf_num != 4) {
        throw ContractError("gaf_num must be 1, 2 or 4");
    }
    if (static_cast<int>(granularities.size()) < gaf_num) {
        throw ContractError("GAF config lists fewer granularities than gaf_num");
    }
    for (std::size_t i = 0; i < granularities.size(); ++i) {
        if (granularities[i] < 1 || (i > 0 && granularities[i] <= granularities[i - 1])) {
            throw ContractError("GAF granularities must be positive and strictly increasing");
        }
    }
    if (window_len < 2) {
        throw ContractError("GAF window_len must be at least 2");
    }
}

void render_gaf_tile(const GafMatrix& g, ImageTensor& img, int top, int left, int tile_h, int tile_w)
{
    for (int py = 0; py < tile_h; ++py) {
        const std::size_t i = static_cast<std::size_t>(py) * g.n / static_cast<std::size_t>(tile_h);
        for (int px = 0; px < tile_w; ++px) {
            const std::size_t j = static_cast<std::size_t>(px) * g.n / static_cast<std::size_t>(tile_w);
            const auto v = static_cast<float>((g(i, j) + 1.0) / 2.0);
            for (int c = 0; c < 3; ++c) {
                img.at(c, top + py, left + px) = v;
            }
        }
    }
}

ImageTensor encode_gaf_composite(const RateTrace& trace, std::size_t center, const GafConfig& cfg, int size)
{
    cfg.validate();
    require_size(size);
    if (cfg.gaf_num > 1 && size % 2 != 0) {
        throw ContractError("GAF composite tiling needs an even image size");
    }
    if (trace.has_absent()) {
        throw ContractError("encode_gaf_composite: trace has absent samples");
    }
    ImageTensor img(size, size, Representation::GAF);
    const auto W = static_cast<std::size_t>(cfg.window_len);
    for (int k = 0; k < cfg.gaf_num; ++k) {
        const int mult = cfg.granularities[static_cast<std::size_t>(k)];
        const RateTrace coarse = mult == 1 ? trace : resample(trace, trace.granularity_s * mult);
        if (coarse.size() < W) {
            throw ContractError("encode_gaf_composite: trace of " + std::to_string(trace.size()) +
                                " samples cannot cover " + std::to_string(W) + " samples at " + std::to_string(mult) +
                                "x granularity");
        }
        const std::size_t c = center / static_cast<std::size_t>(mult);
        const std::size_t start = std::min(c > W / 2 ? c - W / 2 : 0, coarse.size() - W);
        const auto g = gaf_matrix(std::span<const double>(coarse.rates).subspan(start, W));
        if (cfg.gaf_num == 1) {
            render_gaf_tile(g, img, 0, 0, size, size);
        } else if (cfg.gaf_num == 2) {
            render_gaf_tile(g, img, 0, k * (size / 2), size, size / 2);
        } else {
            render_gaf_tile(g, img, (k / 2) * (size / 2), (k % 2) * (size / 2), size / 2, size / 2);
        }
    }
    return img;
}

// ---------------------------------------------------------------------------

std::vector<std::uint8_t> encode_ppm(const ImageTensor& img)
{
    const std::string header = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
    std::vector<std::uint8_t> bytes(header.begin(), header.end());
    bytes.reserve(header.size() + static_cast<std::size_t>(3 * img.width * img.height));
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            for (int c = 0; c < 3; ++c) {
                const float v = std::clamp(img.at(c, y, x), 0.0f, 1.0f);
                bytes.push_back(static_cast<std::uint8_t>(std::lround(v * 255.0f)));
            }
        }
    }
    return bytes;
}

void export_raster(const ImageTensor& img, const std::filesystem::path& path)
{
    const auto bytes = encode_ppm(img);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError(path.string(), "cannot open for writing");
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw IoError(path.string(), "write failed");
    }
}

ImageTensor read_raster(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError(path.string(), "cannot open for reading");
    }
    auto token = [&]() {
        std::string t;
        char ch = 0;
        while (in.get(ch)) {
            if (ch == '#') {
                std::string ignored;
                std::getline(in, ignored);
                continue;
            }
            if (std::isspace(static_cast<unsigned char>(ch))) {
                if (!t.empty()) {
                    break;
                }
                continue;
            }
            t.push_back(ch);
        }
        return t;
    };
    if (token() != "P6") {
        throw FormatError(path.string() + ": not a binary PPM (P6)");
    }
    const int w = std::atoi(token().c_str());
    const int h = std::atoi(token().c_str());
    const int maxval = std::atoi(token().c_str());
    if (w <= 0 || h <= 0 || maxval != 255) {
        throw FormatError(path.string() + ": unsupported PPM header");
    }
    std::vector<unsigned char> data(static_cast<std::size_t>(3 * w * h));
    in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size()));
    if (in.gcount() != static_cast<std::streamsize>(data.size())) {
        throw FormatError(path.string() + ": truncated PPM payload");
    }
    ImageTensor img(h, w, Representation::LineChart);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < 3; ++c) {
                img.at(c, y, x) = static_cast<float>(data[static_cast<std::size_t>((y * w + x) * 3 + c)]) / 255.0f;
            }
        }
    }
    return img;
}

} // namespace trafficbench
