#include "evsamp/plot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "evsamp/errors.hpp"

namespace evs {

namespace {

struct Canvas {
    int w, h;
    std::vector<std::uint8_t> rgb;  // row-major, top-down

    Canvas(int width, int height) : w(width), h(height) {
        rgb.assign(static_cast<std::size_t>(w) * h * 3, 0xff);
    }
    void set(int x, int y, const std::array<std::uint8_t, 3>& c) {
        if (x < 0 || x >= w || y < 0 || y >= h) return;
        const std::size_t i = (static_cast<std::size_t>(y) * w + x) * 3;
        rgb[i] = c[0];
        rgb[i + 1] = c[1];
        rgb[i + 2] = c[2];
    }
    void line(int x0, int y0, int x1, int y1, const std::array<std::uint8_t, 3>& c) {
        const int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
        const int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
        int err = dx + dy;
        while (true) {
            set(x0, y0, c);
            if (x0 == x1 && y0 == y1) break;
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
};

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

}  // namespace

void write_plot_bmp(const std::string& path, const std::vector<PlotSeries>& series, int width,
                    int height) {
    if (width < 16 || height < 16) throw InvalidConfigError("plot: canvas too small");
    Canvas canvas(width, height);

    const int mx = 8, my = 8;  // margins
    const std::array<std::uint8_t, 3> frame{0x40, 0x40, 0x40};
    canvas.line(mx, my, width - mx, my, frame);
    canvas.line(mx, height - my, width - mx, height - my, frame);
    canvas.line(mx, my, mx, height - my, frame);
    canvas.line(width - mx, my, width - mx, height - my, frame);

    double lo = 0.0, hi = 1.0;
    bool have = false;
    for (const PlotSeries& s : series) {
        for (double v : s.values) {
            if (!std::isfinite(v)) continue;
            if (!have) {
                lo = hi = v;
                have = true;
            } else {
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
        }
    }
    if (!have || hi - lo < 1e-12) {
        hi = lo + 1.0;
        lo -= 0.5;
    }

    const int px0 = mx + 1, px1 = width - mx - 1;
    const int py0 = height - my - 1, py1 = my + 1;  // y grows downward on canvas
    for (const PlotSeries& s : series) {
        if (s.values.size() < 2) continue;
        int prev_x = 0, prev_y = 0;
        for (std::size_t i = 0; i < s.values.size(); ++i) {
            const double fx = static_cast<double>(i) / static_cast<double>(s.values.size() - 1);
            const double fy = (s.values[i] - lo) / (hi - lo);
            const int x = px0 + static_cast<int>(std::lround(fx * (px1 - px0)));
            const int y = py0 + static_cast<int>(std::lround(fy * (py1 - py0)));
            if (i > 0) canvas.line(prev_x, prev_y, x, y, s.rgb);
            prev_x = x;
            prev_y = y;
        }
    }

    // 24-bit uncompressed BMP, rows padded to 4 bytes, stored bottom-up.
    const int row_bytes = width * 3;
    const int pad = (4 - row_bytes % 4) % 4;
    const std::uint32_t pixel_bytes = static_cast<std::uint32_t>((row_bytes + pad) * height);
    std::vector<std::uint8_t> out;
    out.reserve(54 + pixel_bytes);
    out.push_back('B');
    out.push_back('M');
    put_u32(out, 54 + pixel_bytes);
    put_u32(out, 0);
    put_u32(out, 54);
    put_u32(out, 40);
    put_u32(out, static_cast<std::uint32_t>(width));
    put_u32(out, static_cast<std::uint32_t>(height));
    put_u16(out, 1);
    put_u16(out, 24);
    put_u32(out, 0);
    put_u32(out, pixel_bytes);
    put_u32(out, 2835);
    put_u32(out, 2835);
    put_u32(out, 0);
    put_u32(out, 0);
    for (int y = height - 1; y >= 0; --y) {
        for (int x = 0; x < width; ++x) {
            const std::size_t i = (static_cast<std::size_t>(y) * width + x) * 3;
            out.push_back(canvas.rgb[i + 2]);  // BGR order
            out.push_back(canvas.rgb[i + 1]);
            out.push_back(canvas.rgb[i]);
        }
        for (int p = 0; p < pad; ++p) out.push_back(0);
    }

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("cannot open " + path + " for writing");
    f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
    if (!f) throw Error("short write to " + path);
}

}  // namespace evs
