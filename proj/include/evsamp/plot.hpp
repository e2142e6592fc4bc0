#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace evs {

struct PlotSeries {
    std::string name;
    std::vector<double> values;  // x is the index
    std::array<std::uint8_t, 3> rgb{0, 0, 0};
};

// Renders line series into a 24-bit BMP with an axes box and auto y-range.
// Deterministic pixel output for identical inputs.
void write_plot_bmp(const std::string& path, const std::vector<PlotSeries>& series, int width,
                    int height);

}  // namespace evs
