#include "gqcnn/tensor_io.hpp"

#include <fstream>
#include <limits>
#include <type_traits>

namespace gqcnn {

namespace {

template <typename Scalar>
constexpr std::uint8_t dtype_code() {
  return std::is_same_v<Scalar, float> ? 0 : 1;
}

}  // namespace

template <typename Scalar>
Tensor<Scalar> read_tensor_checked(io::ByteReader& reader, const Shape* expected);

template <typename Scalar>
void write_tensor(std::ostream& out, const Tensor<Scalar>& tensor) {
  if (tensor.rank() > std::numeric_limits<std::uint8_t>::max()) {
    throw DimensionError("GFT1 supports rank up to 255");
  }
  io::write_bytes(out, "GFT1", 4);
  io::write_le<std::uint8_t>(out, dtype_code<Scalar>());
  io::write_le<std::uint8_t>(out, static_cast<std::uint8_t>(tensor.rank()));
  for (Index extent : tensor.shape()) {
    if (extent > std::numeric_limits<std::uint32_t>::max()) {
      throw DimensionError("GFT1 extents must fit in u32, got " + to_string(tensor.shape()));
    }
    io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(extent));
  }
  io::write_bytes(out, tensor.data(), sizeof(Scalar) * static_cast<std::size_t>(tensor.size()));
}

template <typename Scalar>
Tensor<Scalar> read_tensor_checked(io::ByteReader& reader, const Shape* expected) {
  reader.expect_magic("GFT1");
  const auto dtype = reader.read<std::uint8_t>();
  if (dtype != dtype_code<Scalar>()) {
    throw FormatError("GFT1 dtype code " + std::to_string(dtype) + " at offset " +
                      std::to_string(reader.offset() - 1) + " does not match the requested type " +
                      std::to_string(dtype_code<Scalar>()));
  }
  const auto rank = reader.read<std::uint8_t>();
  Shape shape(rank);
  for (auto& extent : shape) {
    extent = reader.read<std::uint32_t>();
    if (extent == 0) {
      throw DimensionError("GFT1 zero extent at offset " + std::to_string(reader.offset() - 4));
    }
  }
  if (expected && shape != *expected) {
    throw DimensionError("GFT1 tensor ending at offset " + std::to_string(reader.offset()) +
                         " has extents " + to_string(shape) + ", expected " + to_string(*expected));
  }
  Storage<Scalar> values(numel(shape));
  reader.read_bytes(values.data(), sizeof(Scalar) * static_cast<std::size_t>(values.size()));
  return Tensor<Scalar>(std::move(shape), std::move(values));
}

template <typename Scalar>
Tensor<Scalar> read_tensor(io::ByteReader& reader) {
  return read_tensor_checked<Scalar>(reader, nullptr);
}

template <typename Scalar>
Tensor<Scalar> read_tensor(io::ByteReader& reader, const Shape& expected) {
  return read_tensor_checked<Scalar>(reader, &expected);
}

template <typename Scalar>
void save_tensor(const std::string& path, const Tensor<Scalar>& tensor) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  write_tensor(out, tensor);
  if (!out) throw IoError("write failed: " + path);
}

template <typename Scalar>
Tensor<Scalar> load_tensor(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  io::ByteReader reader(in);
  return read_tensor<Scalar>(reader);
}

template void write_tensor(std::ostream&, const Tensor<float>&);
template void write_tensor(std::ostream&, const Tensor<double>&);
template Tensor<float> read_tensor(io::ByteReader&);
template Tensor<double> read_tensor(io::ByteReader&);
template Tensor<float> read_tensor(io::ByteReader&, const Shape&);
template Tensor<double> read_tensor(io::ByteReader&, const Shape&);
template void save_tensor(const std::string&, const Tensor<float>&);
template void save_tensor(const std::string&, const Tensor<double>&);
template Tensor<float> load_tensor(const std::string&);
template Tensor<double> load_tensor(const std::string&);

}  // namespace gqcnn
