#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "nids/common.hpp"

namespace nids {

struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> s, double fill = 0.0) : shape(std::move(s)), data(count(shape), fill) {}
    Tensor(std::vector<std::size_t> s, std::vector<double> values) : shape(std::move(s)), data(std::move(values)) {
        if (data.size() != count(shape)) throw ShapeError("Tensor: value count does not match shape");
    }

    static std::size_t count(const std::vector<std::size_t>& s) {
        return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
    }

    std::size_t size() const noexcept { return data.size(); }
    std::size_t rank() const noexcept { return shape.size(); }
    std::size_t dim(std::size_t i) const { return shape.at(i); }
    double* ptr() noexcept { return data.data(); }
    const double* ptr() const noexcept { return data.data(); }
    double& operator[](std::size_t i) { return data[i]; }
    double operator[](std::size_t i) const { return data[i]; }

    void reshape(std::vector<std::size_t> s) {
        if (count(s) != data.size()) throw ShapeError("Tensor::reshape: element count changes");
        shape = std::move(s);
    }
    void fill(double v) { std::fill(data.begin(), data.end(), v); }
    bool all_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

std::string shape_string(const std::vector<std::size_t>& s);

}  // namespace nids
