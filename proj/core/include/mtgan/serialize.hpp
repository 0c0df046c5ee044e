#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "mtgan/tensor.hpp"

namespace mtgan {

// Self-describing binary tensor container ("MTB1"): little-endian header,
// then one record per tensor: name, dtype (f64 only), dims, raw values.
// Also usable as an in-memory byte string so containers can be hashed
// without touching disk.
std::string encode_tensor_container(const std::map<std::string, Tensor>& tensors);
std::map<std::string, Tensor> decode_tensor_container(std::string_view bytes, const std::string& what);

void write_tensor_container(const std::filesystem::path& path, const std::map<std::string, Tensor>& tensors);
std::map<std::string, Tensor> read_tensor_container(const std::filesystem::path& path);

// Atomic text write: temp file in the same directory, then rename.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);
std::string read_file(const std::filesystem::path& path);

}  // namespace mtgan
