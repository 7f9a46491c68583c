#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace mdae {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat32 = Eigen::Matrix<double, 3, 2>;

// All library errors derive from this; the CLI maps them to exit code 1.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class ParseError : public Error {
public:
    ParseError(const std::string& msg, std::size_t line)
        : Error(msg + " (line " + std::to_string(line) + ")"), line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

class IoError : public Error {
public:
    using Error::Error;
};

using Rng = std::mt19937_64;

// Worker cap for OpenMP regions. 0 means the runtime default.
void set_thread_cap(int n);
int thread_cap();

} // namespace mdae
