#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "uoda/errors.hpp"

namespace uoda {

using Shape = std::vector<std::size_t>;

std::string shape_to_string(const Shape& s);

// Dense row-major tensor of doubles. Rank 0/1/2 is all the engine needs.
class Tensor {
public:
    Tensor() = default;
    Tensor(Shape shape, std::vector<double> data);

    static Tensor zeros(Shape shape);
    static Tensor full(Shape shape, double value);
    static Tensor scalar(double value);                    // shape {1}
    static Tensor row_vector(std::vector<double> values);  // shape {n}
    static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    const Shape& shape() const { return shape_; }
    std::size_t numel() const { return data_.size(); }
    bool is_scalar() const { return data_.size() == 1; }

    std::size_t rows() const;
    std::size_t cols() const;

    double& at(std::size_t i) { return data_[i]; }
    double at(std::size_t i) const { return data_[i]; }
    double& at(std::size_t r, std::size_t c);
    double at(std::size_t r, std::size_t c) const;

    double item() const;  // numel()==1 required

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    bool all_finite() const;

    void fill(double value);
    void add_inplace(const Tensor& other);  // exact shape match

private:
    Shape shape_;
    std::vector<double> data_;
};

std::size_t shape_numel(const Shape& s);

}  // namespace uoda
