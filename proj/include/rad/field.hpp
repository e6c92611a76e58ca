#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "rad/error.hpp"

namespace rad {

// H x W grid of doubles, row-major.
class Field {
public:
    Field() = default;
    Field(int height, int width, double fill = 0.0)
        : h_(height), w_(width), data_(checked_size(height, width), fill) {}
    Field(int height, int width, std::vector<double> values)
        : h_(height), w_(width), data_(std::move(values)) {
        require(data_.size() == checked_size(height, width), "field: value count does not match shape");
    }

    int height() const { return h_; }
    int width() const { return w_; }
    std::size_t size() const { return data_.size(); }
    bool same_shape(const Field& o) const { return h_ == o.h_ && w_ == o.w_; }

    double& operator()(int y, int x) { return data_[static_cast<std::size_t>(y) * w_ + x]; }
    double operator()(int y, int x) const { return data_[static_cast<std::size_t>(y) * w_ + x]; }
    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    std::span<double> values() { return data_; }
    std::span<const double> values() const { return data_; }

    bool operator==(const Field&) const = default;

private:
    static std::size_t checked_size(int h, int w) {
        require(h > 0 && w > 0, "field: dimensions must be positive");
        return static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
    }

    int h_ = 0;
    int w_ = 0;
    std::vector<double> data_;
};

// Binary H x W grid; 1 marks a pixel to inpaint.
class Mask {
public:
    Mask() = default;
    Mask(int height, int width, std::uint8_t fill = 0);
    Mask(int height, int width, std::vector<std::uint8_t> values);

    static Mask ones(int height, int width) { return Mask(height, width, 1); }
    static Mask zeros(int height, int width) { return Mask(height, width, 0); }

    int height() const { return h_; }
    int width() const { return w_; }
    std::size_t size() const { return data_.size(); }

    std::uint8_t operator()(int y, int x) const { return data_[static_cast<std::size_t>(y) * w_ + x]; }
    std::uint8_t operator[](std::size_t i) const { return data_[i]; }
    void set(int y, int x, bool on) { data_[static_cast<std::size_t>(y) * w_ + x] = on ? 1 : 0; }
    void set(std::size_t i, bool on) { data_[i] = on ? 1 : 0; }

    std::span<const std::uint8_t> values() const { return data_; }

    std::size_t count() const;
    double area_ratio() const { return static_cast<double>(count()) / static_cast<double>(size()); }
    // True when the mask is all zeros or all ones.
    bool degenerate() const;
    Mask complement() const;

    template <class F>
    bool shape_matches(const F& f) const {
        return h_ == f.height() && w_ == f.width();
    }

    bool operator==(const Mask&) const = default;

private:
    int h_ = 0;
    int w_ = 0;
    std::vector<std::uint8_t> data_;
};

}  // namespace rad
