#ifndef EOT_NUMERICS_HPP
#define EOT_NUMERICS_HPP

#include <cmath>
#include <cstdio>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace eot {

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Neumaier-compensated accumulator; keeps mass balances exact to ~1 ulp.
class StableSum {
public:
    void add(double x) {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x)) {
            comp_ += (sum_ - t) + x;
        } else {
            comp_ += (x - t) + sum_;
        }
        sum_ = t;
    }
    double total() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

inline double stable_sum(std::span<const double> xs) {
    StableSum s;
    for (double x : xs) s.add(x);
    return s.total();
}

// log(sum(exp(x_i))); entries of -inf contribute nothing, all -inf gives -inf.
inline double log_sum_exp(std::span<const double> xs) {
    double m = -kInf;
    for (double x : xs) m = std::max(m, x);
    if (m == -kInf) return -kInf;
    StableSum s;
    for (double x : xs) {
        if (x != -kInf) s.add(std::exp(x - m));
    }
    return m + std::log(s.total());
}

inline double sq(double x) { return x * x; }

// Round to 12 significant digits; the canonical form used for point identity.
inline double round_sig12(double x) {
    if (x == 0.0 || !std::isfinite(x)) return x == 0.0 ? 0.0 : x;
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.11e", x);
    return std::strtod(buf, nullptr);
}

inline std::string coord_key(std::span<const double> coords) {
    std::string key;
    char buf[48];
    for (double c : coords) {
        double r = round_sig12(c);
        if (r == 0.0) r = 0.0;  // collapse -0
        std::snprintf(buf, sizeof(buf), "%.11e;", r);
        key += buf;
    }
    return key;
}

// Minimal dense row-major matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
        : rows_(rows), cols_(cols), data_(std::move(data)) {
        if (data_.size() != rows_ * cols_) {
            throw std::invalid_argument("Matrix: data size does not match shape");
        }
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
    std::span<const double> row(std::size_t i) const {
        return {data_.data() + i * cols_, cols_};
    }
    const std::vector<double>& data() const { return data_; }
    std::vector<double>& data() { return data_; }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// Solves a * x = b by Gaussian elimination with partial pivoting.
// Throws on (numerically) singular a.
std::vector<double> solve_linear(Matrix a, std::vector<double> b);

}  // namespace eot

#endif
