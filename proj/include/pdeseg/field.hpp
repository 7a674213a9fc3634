#pragma once

#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

namespace pdeseg {

/// Dense H x W grid of doubles, row-major. Carries images, segmentation
/// fields, residuals and gradients alike; values are unconstrained unless a
/// consumer says otherwise.
class Field2D {
public:
    Field2D() = default;

    Field2D(int height, int width, double fill = 0.0)
        : height_(height), width_(width),
          values_(check_dims(height, width), fill) {}

    static Field2D from_values(int height, int width, std::vector<double> values) {
        if (values.size() != check_dims(height, width))
            throw std::invalid_argument("Field2D: values length does not match dims");
        Field2D f;
        f.height_ = height;
        f.width_ = width;
        f.values_ = std::move(values);
        return f;
    }

    int height() const { return height_; }
    int width() const { return width_; }
    std::size_t size() const { return values_.size(); }

    double& operator()(int i, int j) { return values_[static_cast<std::size_t>(i) * width_ + j]; }
    double operator()(int i, int j) const { return values_[static_cast<std::size_t>(i) * width_ + j]; }

    double& operator[](std::size_t k) { return values_[k]; }
    double operator[](std::size_t k) const { return values_[k]; }

    std::vector<double>& values() { return values_; }
    const std::vector<double>& values() const { return values_; }

    bool same_dims(const Field2D& o) const { return height_ == o.height_ && width_ == o.width_; }

private:
    static std::size_t check_dims(int height, int width) {
        if (height < 1 || width < 1)
            throw std::invalid_argument("Field2D: dims must be >= 1");
        return static_cast<std::size_t>(height) * static_cast<std::size_t>(width);
    }

    int height_ = 0;
    int width_ = 0;
    std::vector<double> values_;
};

/// H x W grid of {0,1} labels.
class BinaryMask {
public:
    BinaryMask() = default;

    BinaryMask(int height, int width, std::uint8_t fill = 0)
        : height_(height), width_(width) {
        if (height < 1 || width < 1)
            throw std::invalid_argument("BinaryMask: dims must be >= 1");
        if (fill > 1)
            throw std::invalid_argument("BinaryMask: values must be 0 or 1");
        values_.assign(static_cast<std::size_t>(height) * width, fill);
    }

    static BinaryMask from_values(int height, int width, std::vector<std::uint8_t> values) {
        BinaryMask m(height, width);
        if (values.size() != m.values_.size())
            throw std::invalid_argument("BinaryMask: values length does not match dims");
        for (auto v : values)
            if (v > 1) throw std::invalid_argument("BinaryMask: values must be 0 or 1");
        m.values_ = std::move(values);
        return m;
    }

    int height() const { return height_; }
    int width() const { return width_; }
    std::size_t size() const { return values_.size(); }

    std::uint8_t& operator()(int i, int j) { return values_[static_cast<std::size_t>(i) * width_ + j]; }
    std::uint8_t operator()(int i, int j) const { return values_[static_cast<std::size_t>(i) * width_ + j]; }

    std::uint8_t& operator[](std::size_t k) { return values_[k]; }
    std::uint8_t operator[](std::size_t k) const { return values_[k]; }

    std::vector<std::uint8_t>& values() { return values_; }
    const std::vector<std::uint8_t>& values() const { return values_; }

    bool same_dims(const BinaryMask& o) const { return height_ == o.height_ && width_ == o.width_; }

private:
    int height_ = 0;
    int width_ = 0;
    std::vector<std::uint8_t> values_;
};

/// Grid geometry for the finite-difference operators. h is the stencil
/// spacing; dx, dy weight the Riemann-sum cell area.
struct GridSpec {
    double h = 1.0;
    double dx = 1.0;
    double dy = 1.0;

    void validate() const {
        if (!(h > 0.0) || !(dx > 0.0) || !(dy > 0.0))
            throw std::invalid_argument("GridSpec: h, dx, dy must be > 0");
    }
};

} // namespace pdeseg
