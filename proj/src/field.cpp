#include "rad/field.hpp"

#include <algorithm>
#include <numeric>

namespace rad {

Mask::Mask(int height, int width, std::uint8_t fill) : h_(height), w_(width) {
    require(height > 0 && width > 0, "mask: dimensions must be positive");
    require(fill <= 1, "mask: values must be 0 or 1");
    data_.assign(static_cast<std::size_t>(height) * width, fill);
}

Mask::Mask(int height, int width, std::vector<std::uint8_t> values)
    : h_(height), w_(width), data_(std::move(values)) {
    require(height > 0 && width > 0, "mask: dimensions must be positive");
    require(data_.size() == static_cast<std::size_t>(height) * width, "mask: value count does not match shape");
    require(std::all_of(data_.begin(), data_.end(), [](std::uint8_t v) { return v <= 1; }),
            "mask: values must be exactly 0 or 1");
}

std::size_t Mask::count() const {
    return std::accumulate(data_.begin(), data_.end(), std::size_t{0});
}

bool Mask::degenerate() const {
    const auto n = count();
    return n == 0 || n == data_.size();
}

Mask Mask::complement() const {
    Mask out = *this;
    for (auto& v : out.data_) v = 1 - v;
    return out;
}

}  // namespace rad
