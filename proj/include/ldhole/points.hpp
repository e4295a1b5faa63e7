#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "ldhole/errors.hpp"

namespace ldhole {

/// A finite set of points in R^d, stored row-major.
class PointSet {
public:
    PointSet() = default;

    explicit PointSet(int dim) : dim_(dim) {
        if (dim < 1) throw DomainError("PointSet: dimension must be positive");
    }

    PointSet(int dim, std::vector<double> coords) : dim_(dim), coords_(std::move(coords)) {
        if (dim < 1) throw DomainError("PointSet: dimension must be positive");
        if (coords_.size() % static_cast<std::size_t>(dim) != 0)
            throw DomainError("PointSet: coordinate count is not a multiple of the dimension");
        for (double x : coords_)
            if (!std::isfinite(x)) throw DomainError("PointSet: non-finite coordinate");
    }

    /// Points given as a list of rows, e.g. {{0.0, 1.0}, {2.0, 3.0}}.
    PointSet(std::initializer_list<std::initializer_list<double>> rows) {
        for (const auto& row : rows) {
            if (dim_ == 0) dim_ = static_cast<int>(row.size());
            if (static_cast<int>(row.size()) != dim_ || dim_ == 0)
                throw DomainError("PointSet: ragged point list");
            coords_.insert(coords_.end(), row.begin(), row.end());
        }
    }

    int dim() const noexcept { return dim_; }
    std::size_t size() const noexcept { return dim_ == 0 ? 0 : coords_.size() / dim_; }
    bool empty() const noexcept { return size() == 0; }

    std::span<const double> operator[](std::size_t i) const {
        return {coords_.data() + i * dim_, static_cast<std::size_t>(dim_)};
    }

    void push_back(std::span<const double> p) {
        if (dim_ == 0) dim_ = static_cast<int>(p.size());
        if (static_cast<int>(p.size()) != dim_)
            throw DomainError("PointSet: point of dimension " + std::to_string(p.size()) +
                              " added to a set of dimension " + std::to_string(dim_));
        coords_.insert(coords_.end(), p.begin(), p.end());
    }

    void push_back(std::initializer_list<double> p) { push_back(std::span<const double>(p.begin(), p.size())); }

    const std::vector<double>& coords() const noexcept { return coords_; }

private:
    int dim_ = 0;
    std::vector<double> coords_;
};

/// Points of `a` followed by points of `b`. Either may be empty.
inline PointSet concat(const PointSet& a, const PointSet& b) {
    if (a.empty()) return b;
    if (b.empty()) return a;
    if (a.dim() != b.dim()) throw DomainError("concat: dimension mismatch");
    std::vector<double> c = a.coords();
    c.insert(c.end(), b.coords().begin(), b.coords().end());
    return PointSet(a.dim(), std::move(c));
}

inline double distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double d = a[k] - b[k];
        s += d * d;
    }
    return std::sqrt(s);
}

} // namespace ldhole
