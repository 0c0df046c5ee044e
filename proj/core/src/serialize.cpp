#include "mtgan/serialize.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include "mtgan/common.hpp"

namespace mtgan {

namespace {

constexpr char kMagic[4] = {'M', 'T', 'B', '1'};
constexpr std::uint32_t kDtypeF64 = 0;

template <typename T>
void put(std::string& out, T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.append(buf, sizeof(T));
}

template <typename T>
T get(std::string_view bytes, std::size_t& pos, const std::string& what) {
    if (pos + sizeof(T) > bytes.size()) throw IntegrityError("truncated tensor container: " + what);
    T v;
    std::memcpy(&v, bytes.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
}

}  // namespace

std::string encode_tensor_container(const std::map<std::string, Tensor>& tensors) {
    std::string out;
    out.append(kMagic, 4);
    put<std::uint32_t>(out, 1);  // version
    put<std::uint64_t>(out, tensors.size());
    for (const auto& [name, t] : tensors) {
        put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
        out.append(name);
        put<std::uint32_t>(out, kDtypeF64);
        put<std::uint32_t>(out, static_cast<std::uint32_t>(t.shape().size()));
        for (std::int64_t d : t.shape()) put<std::int64_t>(out, d);
        const char* data = reinterpret_cast<const char*>(t.data());
        out.append(data, static_cast<std::size_t>(t.numel()) * sizeof(double));
    }
    return out;
}

std::map<std::string, Tensor> decode_tensor_container(std::string_view bytes, const std::string& what) {
    std::size_t pos = 0;
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0)
        throw IntegrityError("bad magic in tensor container: " + what);
    pos = 4;
    const auto version = get<std::uint32_t>(bytes, pos, what);
    if (version != 1) throw IntegrityError("unsupported container version " + std::to_string(version) + " in " + what);
    const auto count = get<std::uint64_t>(bytes, pos, what);
    std::map<std::string, Tensor> out;
    for (std::uint64_t i = 0; i < count; ++i) {
        const auto name_len = get<std::uint32_t>(bytes, pos, what);
        if (pos + name_len > bytes.size()) throw IntegrityError("truncated tensor name in " + what);
        std::string name(bytes.substr(pos, name_len));
        pos += name_len;
        const auto dtype = get<std::uint32_t>(bytes, pos, what);
        if (dtype != kDtypeF64) throw IntegrityError("unsupported dtype in " + what);
        const auto ndim = get<std::uint32_t>(bytes, pos, what);
        std::vector<std::int64_t> shape(ndim);
        for (auto& d : shape) {
            d = get<std::int64_t>(bytes, pos, what);
            if (d < 0) throw IntegrityError("negative dimension in " + what);
        }
        const std::int64_t numel = shape_numel(shape);
        const std::size_t nbytes = static_cast<std::size_t>(numel) * sizeof(double);
        if (pos + nbytes > bytes.size()) throw IntegrityError("truncated tensor data for '" + name + "' in " + what);
        std::vector<double> data(static_cast<std::size_t>(numel));
        std::memcpy(data.data(), bytes.data() + pos, nbytes);
        pos += nbytes;
        out.emplace(std::move(name), Tensor(std::move(shape), std::move(data)));
    }
    if (pos != bytes.size()) throw IntegrityError("trailing bytes in tensor container: " + what);
    return out;
}

void write_tensor_container(const std::filesystem::path& path, const std::map<std::string, Tensor>& tensors) {
    write_file_atomic(path, encode_tensor_container(tensors));
}

std::map<std::string, Tensor> read_tensor_container(const std::filesystem::path& path) {
    return decode_tensor_container(read_file(path), path.string());
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw IngestionError("cannot open for write: " + tmp.string());
        f.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        if (!f) throw IngestionError("short write: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IngestionError("cannot open: " + path.string());
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

}  // namespace mtgan
