#pragma once

#include <istream>
#include <ostream>
#include <string>

#include "gqcnn/binary_io.hpp"
#include "gqcnn/tensor.hpp"

namespace gqcnn {

// GFT1 layout (little-endian): "GFT1", u8 dtype (0 = f32, 1 = f64), u8 rank,
// rank x u32 extents, then the elements in row-major order.

template <typename Scalar>
void write_tensor(std::ostream& out, const Tensor<Scalar>& tensor);

/// Throws FormatError on a bad magic or a dtype other than Scalar's,
/// DimensionError on a zero extent, IoError on truncation.
template <typename Scalar>
Tensor<Scalar> read_tensor(io::ByteReader& reader);

/// As above, but raises DimensionError before reading any element when the
/// stored extents differ from `expected`.
template <typename Scalar>
Tensor<Scalar> read_tensor(io::ByteReader& reader, const Shape& expected);

template <typename Scalar>
void save_tensor(const std::string& path, const Tensor<Scalar>& tensor);

template <typename Scalar>
Tensor<Scalar> load_tensor(const std::string& path);

}  // namespace gqcnn
