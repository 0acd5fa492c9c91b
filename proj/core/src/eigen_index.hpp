#pragma once

#include <Eigen/Dense>

#include <cstddef>

namespace pacbandit {

constexpr Eigen::Index idx(std::size_t i) { return static_cast<Eigen::Index>(i); }

}  // namespace pacbandit
